// Copyright 2026 The wideformer Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef WIDEFORMER_PARALLEL_HPP_
#define WIDEFORMER_PARALLEL_HPP_

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wf {

// WIDEFORMER_THREADS overrides the hardware thread count.
inline int thread_count() {
  if (const char* env = std::getenv("WIDEFORMER_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls body(i) for i in [0, count).  Each index must write only its own
// output slot; callers reduce afterwards in index order, which keeps every
// result independent of scheduling.
template <typename Body>
void parallel_for(long count, Body&& body) {
  const int threads = int(std::min<long>(thread_count(), count));
  if (threads <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (long i = w; i < count; i += threads) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace wf

#endif  // WIDEFORMER_PARALLEL_HPP_
