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

#ifndef SHAPVAL_STATUS_MACROS_H_
#define SHAPVAL_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define SHAPVAL_CONCAT_INNER_(a, b) a##b
#define SHAPVAL_CONCAT_(a, b) SHAPVAL_CONCAT_INNER_(a, b)

#define RETURN_IF_ERROR(expr)                    \
  do {                                           \
    const absl::Status _shapval_status = (expr); \
    if (!_shapval_status.ok()) {                 \
      return _shapval_status;                    \
    }                                            \
  } while (0)

#define SHAPVAL_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                                   \
  if (!statusor.ok()) {                                      \
    return statusor.status();                                \
  }                                                          \
  lhs = std::move(statusor).value()

#define ASSIGN_OR_RETURN(lhs, rexpr)                                         \
  SHAPVAL_ASSIGN_OR_RETURN_IMPL_(SHAPVAL_CONCAT_(_shapval_statusor_, __LINE__), \
                                 lhs, rexpr)

#endif  // SHAPVAL_STATUS_MACROS_H_
