#pragma once

#include <cstdint>
#include <deque>
#include <list>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "core/clock.hpp"
#include "core/types.hpp"

namespace sertier {

enum class LockMode : uint8_t { None = 0, Shared = 1, Exclusive = 2 };

enum class LockVerdict : uint8_t {
  Granted = 0,
  Wait,  // requester is older than every holder: poll again
  Die,   // WAIT-DIE verdict for the younger requester, not a fault
};

struct LockEntry {
  Key key;
  LockMode type = LockMode::None;
  uint32_t lock_num = 0;
  std::set<uint64_t> holders;
  std::deque<std::pair<uint64_t, LockMode>> wait_list;
  std::optional<Version> latest_version;  // middle-tier version cache
  uint64_t lease = 0;
};

// Validation lock table: fixed bucket array of lock entries keyed by data
// item, with a cached latest committed version and a GC lease per entry.
// Smaller txn id means older; WAIT-DIE lets older requesters wait and kills
// younger ones, so no wait cycle can form.
class ValidationLockTable {
 public:
  ValidationLockTable(EventClock& clock, size_t buckets = 4096, uint64_t lease_ticks = 1000);

  // Polled by validate(): a Wait verdict keeps the request queued (FIFO), a
  // queued waiter is granted before any later-arriving compatible requester.
  LockVerdict try_lock(const Key& key, uint64_t txn_id, LockMode mode);
  void release(const Key& key, uint64_t txn_id);

  std::optional<Version> cached_version(const Key& key);
  void store_cached_version(const Key& key, Version version);

  // Evicts unlocked entries whose lease expired. Returns the evicted count.
  size_t gc_sweep(uint64_t now);

  size_t entry_count() const;
  bool has_entry(const Key& key) const;

 private:
  struct Bucket {
    mutable std::mutex mu;
    std::list<LockEntry> entries;
  };

  Bucket& bucket_for(const Key& key);
  const Bucket& bucket_for(const Key& key) const;
  LockEntry& touch_entry(Bucket& bucket, const Key& key);
  void sweep_bucket(Bucket& bucket, uint64_t now, const Key* keep);

  EventClock& clock_;
  uint64_t lease_ticks_;
  std::vector<Bucket> buckets_;
};

}  // namespace sertier
