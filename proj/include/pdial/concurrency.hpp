#pragma once

#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>

namespace pdial {

/// Caps the number of in-flight remote requests. One limiter may be shared
/// between the embedding and LLM clients.
class FanoutLimiter {
 public:
  explicit FanoutLimiter(std::size_t limit = 4) : available_(limit == 0 ? 1 : limit) {}

  FanoutLimiter(const FanoutLimiter&) = delete;
  FanoutLimiter& operator=(const FanoutLimiter&) = delete;

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++available_;
    }
    cv_.notify_one();
  }

  class Slot {
   public:
    explicit Slot(FanoutLimiter& l) : limiter_(l) { limiter_.acquire(); }
    ~Slot() { limiter_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    FanoutLimiter& limiter_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

inline std::shared_ptr<FanoutLimiter> default_limiter() {
  static auto shared = std::make_shared<FanoutLimiter>(4);
  return shared;
}

}  // namespace pdial
