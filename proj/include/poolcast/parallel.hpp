// Copyright 2026 The Poolcast Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace poolcast {

namespace detail {
inline std::atomic<int> g_threads{0};
inline thread_local bool t_in_worker = false;
}  // namespace detail

/// Sets the worker count used by parallel loops; 0 means hardware concurrency.
inline void set_thread_count(int n) { detail::g_threads.store(std::max(0, n)); }

inline int thread_count() {
  const int n = detail::g_threads.load();
  if (n > 0) return n;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls body(i) for i in [0, n). Work is pulled from a shared counter; callers
/// write results by index so output never depends on scheduling. Nested calls
/// from inside a worker run serially.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const int workers = detail::t_in_worker ? 1 : std::min<int>(thread_count(), static_cast<int>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::t_in_worker = true;
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline constexpr std::size_t kReductionChunk = 4096;

/// Deterministic reduction over [0, n): fixed-size chunks are reduced by
/// chunk(begin, end, acc) in parallel, then combined in chunk order by
/// combine(total, part). The result is bit-identical for any thread count.
template <typename Acc, typename ChunkFn, typename CombineFn>
Acc chunked_reduce(std::size_t n, const Acc& zero, ChunkFn&& chunk, CombineFn&& combine) {
  const std::size_t chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<Acc> parts(chunks, zero);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t b = c * kReductionChunk;
    chunk(b, std::min(n, b + kReductionChunk), parts[c]);
  });
  Acc total = zero;
  for (auto& p : parts) combine(total, p);
  return total;
}

}  // namespace poolcast
