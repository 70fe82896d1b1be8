// Copyright 2026 The FedNova Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDNOVA_THREAD_POOL_HPP
#define FEDNOVA_THREAD_POOL_HPP

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fednova::detail {

/// Fixed set of workers running index-parallel loops. parallel_for returns
/// after every task finished; the first failure in index order is rethrown.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    for (int w = 1; w < workers; ++w) threads_.emplace_back([this] { work(); });
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
    errors_.assign(n, nullptr);
    if (threads_.empty() || n <= 1) {
      for (std::size_t i = 0; i < n; ++i) run_one(task, i);
    } else {
      {
        std::lock_guard<std::mutex> lock(mutex_);
        task_ = &task;
        size_ = n;
        next_ = 0;
        pending_ = n;
        ++generation_;
      }
      wake_.notify_all();
      drain();
      std::unique_lock<std::mutex> lock(mutex_);
      done_.wait(lock, [this] { return pending_ == 0; });
      task_ = nullptr;
    }
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void run_one(const std::function<void(std::size_t)>& task, std::size_t i) {
    try {
      task(i);
    } catch (...) {
      errors_[i] = std::current_exception();
    }
  }

  // Claims indices until the current loop is exhausted.
  void drain() {
    for (;;) {
      std::size_t i;
      const std::function<void(std::size_t)>* task;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        if (task_ == nullptr || next_ >= size_) return;
        i = next_++;
        task = task_;
      }
      run_one(*task, i);
      std::lock_guard<std::mutex> lock(mutex_);
      if (--pending_ == 0) done_.notify_all();
    }
  }

  void work() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_, done_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t size_ = 0, next_ = 0, pending_ = 0, generation_ = 0;
  std::vector<std::exception_ptr> errors_;
  bool stop_ = false;
};

}  // namespace fednova::detail

#endif  // FEDNOVA_THREAD_POOL_HPP
