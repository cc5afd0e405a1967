#pragma once

#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <type_traits>
#include <utility>

namespace concord::protocol {

// FIFO executor for one session's mutations. Tasks run one at a time in
// submission order on whichever caller finds the queue idle; other callers
// wait on their futures. No dedicated thread.
class SerialQueue {
 public:
  template <class F>
  auto submit(F&& task) -> std::future<std::invoke_result_t<F>> {
    using R = std::invoke_result_t<F>;
    auto packaged = std::make_shared<std::packaged_task<R()>>(std::forward<F>(task));
    auto future = packaged->get_future();
    {
      std::lock_guard lock(mu_);
      tasks_.emplace_back([packaged] { (*packaged)(); });
      if (draining_) return future;
      draining_ = true;
    }
    drain();
    return future;
  }

  // Runs `task` through the queue and waits for its result.
  template <class F>
  auto run(F&& task) -> std::invoke_result_t<F> {
    return submit(std::forward<F>(task)).get();
  }

 private:
  void drain() {
    for (;;) {
      std::function<void()> next;
      {
        std::lock_guard lock(mu_);
        if (tasks_.empty()) {
          draining_ = false;
          return;
        }
        next = std::move(tasks_.front());
        tasks_.pop_front();
      }
      next();
    }
  }

  std::mutex mu_;
  std::deque<std::function<void()>> tasks_;
  bool draining_ = false;
};

}  // namespace concord::protocol
