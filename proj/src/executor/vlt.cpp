#include "executor/vlt.hpp"

#include <algorithm>

namespace sertier {

ValidationLockTable::ValidationLockTable(EventClock& clock, size_t buckets, uint64_t lease_ticks)
    : clock_(clock), lease_ticks_(lease_ticks), buckets_(buckets == 0 ? 1 : buckets) {}

ValidationLockTable::Bucket& ValidationLockTable::bucket_for(const Key& key) {
  return buckets_[KeyHash{}(key) % buckets_.size()];
}

const ValidationLockTable::Bucket& ValidationLockTable::bucket_for(const Key& key) const {
  return buckets_[KeyHash{}(key) % buckets_.size()];
}

void ValidationLockTable::sweep_bucket(Bucket& bucket, uint64_t now, const Key* keep) {
  bucket.entries.remove_if([&](const LockEntry& e) {
    if (keep && e.key == *keep) return false;
    return e.type == LockMode::None && e.wait_list.empty() && e.lease < now;
  });
}

LockEntry& ValidationLockTable::touch_entry(Bucket& bucket, const Key& key) {
  uint64_t now = clock_.now();
  sweep_bucket(bucket, now, &key);
  for (LockEntry& e : bucket.entries) {
    if (e.key == key) {
      e.lease = now + lease_ticks_;
      return e;
    }
  }
  bucket.entries.push_back({});
  LockEntry& e = bucket.entries.back();
  e.key = key;
  e.lease = now + lease_ticks_;
  return e;
}

LockVerdict ValidationLockTable::try_lock(const Key& key, uint64_t txn_id, LockMode mode) {
  Bucket& bucket = bucket_for(key);
  std::lock_guard<std::mutex> lock(bucket.mu);
  LockEntry& e = touch_entry(bucket, key);

  auto drop_own_wait = [&] {
    std::erase_if(e.wait_list, [&](const auto& w) { return w.first == txn_id; });
  };

  if (e.holders.count(txn_id)) {
    if (mode == e.type || mode == LockMode::Shared) {
      drop_own_wait();
      return LockVerdict::Granted;
    }
    if (e.lock_num == 1) {  // sole holder upgrading Shared -> Exclusive
      e.type = LockMode::Exclusive;
      drop_own_wait();
      return LockVerdict::Granted;
    }
  }

  bool queued = false;
  for (auto& [id, m] : e.wait_list) {
    if (id == txn_id) {
      queued = true;
      break;
    }
  }

  bool front_of_queue = queued && e.wait_list.front().first == txn_id;
  bool compatible = e.type == LockMode::None ||
                    (e.type == LockMode::Shared && mode == LockMode::Shared && !e.holders.count(txn_id));
  if (compatible && (e.wait_list.empty() || front_of_queue)) {
    if (queued) e.wait_list.pop_front();
    e.type = mode == LockMode::Exclusive ? LockMode::Exclusive : LockMode::Shared;
    e.holders.insert(txn_id);
    e.lock_num = static_cast<uint32_t>(e.holders.size());
    return LockVerdict::Granted;
  }

  if (queued) return LockVerdict::Wait;

  // WAIT-DIE: only a requester older than every current holder may wait.
  for (uint64_t holder : e.holders) {
    if (holder != txn_id && txn_id > holder) return LockVerdict::Die;
  }
  e.wait_list.push_back({txn_id, mode});
  return LockVerdict::Wait;
}

void ValidationLockTable::release(const Key& key, uint64_t txn_id) {
  Bucket& bucket = bucket_for(key);
  std::lock_guard<std::mutex> lock(bucket.mu);
  for (LockEntry& e : bucket.entries) {
    if (!(e.key == key)) continue;
    if (e.holders.erase(txn_id)) {
      e.lock_num = static_cast<uint32_t>(e.holders.size());
      if (e.lock_num == 0) e.type = LockMode::None;
    }
    return;
  }
}

std::optional<Version> ValidationLockTable::cached_version(const Key& key) {
  Bucket& bucket = bucket_for(key);
  std::lock_guard<std::mutex> lock(bucket.mu);
  LockEntry& e = touch_entry(bucket, key);
  return e.latest_version;
}

void ValidationLockTable::store_cached_version(const Key& key, Version version) {
  Bucket& bucket = bucket_for(key);
  std::lock_guard<std::mutex> lock(bucket.mu);
  LockEntry& e = touch_entry(bucket, key);
  e.latest_version = version;
}

size_t ValidationLockTable::gc_sweep(uint64_t now) {
  size_t evicted = 0;
  for (Bucket& bucket : buckets_) {
    std::lock_guard<std::mutex> lock(bucket.mu);
    size_t before = bucket.entries.size();
    sweep_bucket(bucket, now, nullptr);
    evicted += before - bucket.entries.size();
  }
  return evicted;
}

size_t ValidationLockTable::entry_count() const {
  size_t n = 0;
  for (const Bucket& bucket : buckets_) {
    std::lock_guard<std::mutex> lock(bucket.mu);
    n += bucket.entries.size();
  }
  return n;
}

bool ValidationLockTable::has_entry(const Key& key) const {
  const Bucket& bucket = bucket_for(key);
  std::lock_guard<std::mutex> lock(bucket.mu);
  for (const LockEntry& e : bucket.entries)
    if (e.key == key) return true;
  return false;
}

}  // namespace sertier
