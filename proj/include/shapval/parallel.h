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

#ifndef SHAPVAL_PARALLEL_H_
#define SHAPVAL_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace shapval {

// Runs fn(task) for task in [0, num_tasks) on up to `threads` workers. Tasks
// are claimed dynamically, so callers must write results into per-task slots
// and reduce them in task order to stay independent of the worker count.
template <typename Fn>
void ParallelFor(size_t num_tasks, int threads, Fn&& fn) {
  const size_t workers =
      std::min<size_t>(num_tasks, static_cast<size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (size_t task = 0; task < num_tasks; ++task) fn(task);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t task = next.fetch_add(1); task < num_tasks;
           task = next.fetch_add(1)) {
        fn(task);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace shapval

#endif  // SHAPVAL_PARALLEL_H_
