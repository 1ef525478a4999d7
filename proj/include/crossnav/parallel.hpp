/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace crossnav {

/// Work partitioning is always by task index, never by thread, so results are
/// bit-identical for any worker count. Reductions must be done by the caller
/// in task-index order.
class ThreadPool {
 public:
  explicit ThreadPool(int n_threads) {
    n_threads = n_threads < 1 ? 1 : n_threads;
    workers_.reserve(static_cast<size_t>(n_threads - 1));
    for (int i = 1; i < n_threads; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  /// Runs fn(i) for i in [0, n). Blocks until all tasks finish. The calling
  /// thread participates. fn must not call parallel_for on the same pool.
  void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers_.empty() || n == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      fn_ = &fn;
      next_.store(0, std::memory_order_relaxed);
      total_ = n;
      generation_++;
    }
    cv_.notify_all();
    run_tasks(&fn);
    // wait until every worker that joined this generation has drained
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return active_ == 0; });
    fn_ = nullptr;
  }

 private:
  void run_tasks(const std::function<void(int)>* fn) {
    while (true) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      (*fn)(i);
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      const std::function<void(int)>* fn = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
        active_++;
      }
      // fn_ is null if this generation already drained and was torn down
      if (fn != nullptr) run_tasks(fn);
      {
        std::lock_guard<std::mutex> lk(mu_);
        active_--;
      }
      done_cv_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  int total_ = 0;
  int active_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

/// Global pool used by the training/eval loops; resized by the CLI --threads
/// flag. Defaults to the hardware concurrency.
inline ThreadPool& global_pool(int resize_to = 0) {
  static std::unique_ptr<ThreadPool> pool;
  static std::mutex mu;
  std::lock_guard<std::mutex> lk(mu);
  if (!pool || (resize_to > 0 && pool->size() != resize_to)) {
    int n = resize_to > 0
                ? resize_to
                : static_cast<int>(std::thread::hardware_concurrency());
    pool = std::make_unique<ThreadPool>(n);
  }
  return *pool;
}

}  // namespace crossnav
