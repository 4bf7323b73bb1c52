/* Copyright 2026 The speechlm Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace speechlm {

// Static-partition fork/join pool. Every index of a parallel_for is owned by
// exactly one worker and processed in ascending order, so results are
// bit-identical for any thread count (reductions inside one element never
// cross threads).
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  void set_threads(int n) {
    std::lock_guard<std::mutex> lk(user_mu_);
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    threads_ = n < 1 ? 1 : (n > 4 * hw ? 4 * hw : n);
    std::lock_guard<std::mutex> g(mu_);
    ensure_workers(threads_ - 1);
  }

  int threads() const { return threads_; }

  // fn(tid) is invoked once for each tid in [0, nthreads); tid 0 runs on the
  // calling thread. Nested calls from inside a worker degrade to serial.
  void run(int nthreads, const std::function<void(int)>& fn) {
    if (nthreads <= 1 || in_worker_) {
      for (int t = 0; t < nthreads; ++t) fn(t);
      return;
    }
    std::unique_lock<std::mutex> lk(user_mu_);
    {
      std::lock_guard<std::mutex> g(mu_);
      ensure_workers(nthreads - 1);
      task_ = &fn;
      active_ = nthreads;
      pending_ = nthreads - 1;
      ++generation_;
    }
    cv_.notify_all();
    fn(0);
    std::unique_lock<std::mutex> g(mu_);
    done_cv_.wait(g, [&] { return pending_ == 0; });
    task_ = nullptr;
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> g(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

 private:
  ThreadPool() = default;

  // callers hold mu_
  void ensure_workers(int n) {
    while (static_cast<int>(workers_.size()) < n) {
      int tid = static_cast<int>(workers_.size()) + 1;
      workers_.emplace_back([this, tid] { worker_loop(tid); });
    }
  }

  void worker_loop(int tid) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> g(mu_);
        cv_.wait(g, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        if (tid < active_ && task_ != nullptr) task = task_;
      }
      if (task) {
        in_worker_ = true;
        (*task)(tid);
        in_worker_ = false;
        std::lock_guard<std::mutex> g(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::mutex user_mu_;  // serializes run() callers
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
  const std::function<void(int)>* task_ = nullptr;
  int active_ = 0;
  int pending_ = 0;
  int threads_ = 1;
  uint64_t generation_ = 0;
  bool stop_ = false;
  static thread_local bool in_worker_;
};

inline thread_local bool ThreadPool::in_worker_ = false;

inline void set_num_threads(int n) { ThreadPool::instance().set_threads(n); }
inline int num_threads() { return ThreadPool::instance().threads(); }

// Splits [0, n) into contiguous chunks, one per thread.
template <typename F>
void parallel_for(int64_t n, F&& fn) {
  int nt = num_threads();
  if (nt <= 1 || n < 2) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (nt > n) nt = static_cast<int>(n);
  int64_t chunk = (n + nt - 1) / nt;
  std::function<void(int)> task = [&](int tid) {
    int64_t lo = tid * chunk;
    int64_t hi = lo + chunk < n ? lo + chunk : n;
    for (int64_t i = lo; i < hi; ++i) fn(i);
  };
  ThreadPool::instance().run(nt, task);
}

}  // namespace speechlm
