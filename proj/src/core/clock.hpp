#pragma once

#include <atomic>
#include <cstdint>

namespace sertier {

// Global logical clock. Every sequence number in the system (begin/commit
// ordering, leases, snapshots) is drawn from one monotone counter; wall-clock
// time is never used for correctness.
class EventClock {
 public:
  uint64_t tick() { return counter_.fetch_add(1, std::memory_order_relaxed) + 1; }
  uint64_t now() const { return counter_.load(std::memory_order_relaxed); }

 private:
  std::atomic<uint64_t> counter_{0};
};

}  // namespace sertier
