// Copyright 2026 The Shapval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHAPVAL_SRC_BLOB_IO_H_
#define SHAPVAL_SRC_BLOB_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

// Headerless little-endian blobs of 4-byte scalars.
namespace shapval::internal {

template <typename T>
T ToLittleEndian(T v) {
  static_assert(sizeof(T) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bits = std::bit_cast<uint32_t>(v);
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) |
           ((bits >> 8) & 0xff00u) | (bits >> 24);
    return std::bit_cast<T>(bits);
  }
}

template <typename T>
absl::Status WriteBlob(const std::filesystem::path& path,
                       std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  for (T v : values) {
    const T le = ToLittleEndian(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  if (!out) return absl::DataLossError(absl::StrCat("short write to ", path.string()));
  return absl::OkStatus();
}

template <typename T>
absl::StatusOr<std::vector<T>> ReadBlob(const std::filesystem::path& path,
                                        size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() != expected_count * sizeof(T)) {
    return absl::InvalidArgumentError(
        absl::StrCat("shape mismatch: ", path.string(), " has ", bytes.size(),
                     " bytes, manifest implies ", expected_count * sizeof(T)));
  }
  std::vector<T> values(expected_count);
  for (size_t i = 0; i < expected_count; ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    values[i] = ToLittleEndian(v);
  }
  return values;
}

}  // namespace shapval::internal

#endif  // SHAPVAL_SRC_BLOB_IO_H_
