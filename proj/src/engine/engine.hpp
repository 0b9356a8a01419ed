#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/clock.hpp"
#include "core/types.hpp"

namespace sertier {

class KeyNotFound : public Error {
 public:
  explicit KeyNotFound(const Key& key)
      : Error("key not found: " + key.relation + "/" + std::to_string(key.id)) {}
};

struct VersionEntry {
  Version version = 0;
  int64_t value = 0;
  uint64_t installer_txn = 0;
  uint64_t commit_seq = 0;
};

struct ReadResult {
  int64_t value = 0;
  Version version = 0;
  bool own_write = false;
};

enum class WriteStatus : uint8_t {
  Ok = 0,
  Conflict,  // first-committer-wins under SI/SER
  Timeout,   // write-lock wait budget exhausted
};

struct WriteResult {
  WriteStatus status = WriteStatus::Ok;
  Version base_version = 0;  // latest committed version when the write succeeded
};

struct CommitResult {
  bool committed = false;
  uint64_t commit_seq = 0;
  // Installed version per key, in key order.
  std::vector<std::pair<Key, Version>> installed;
};

// Embedded multi-version storage engine. Stands in for the RDBMS: snapshot
// reads under SI/SER, per-statement reads under RC, write locks at every
// level, first-committer-wins, and exact commit-time serialization-graph
// certification when the level is SER.
class Engine {
 public:
  struct Txn {
    uint64_t id = 0;
    IsolationLevel level = IsolationLevel::RC;
    uint64_t snapshot_seq = 0;
    bool active = true;
    // First observed committed version per key (own writes excluded).
    std::map<Key, Version> read_set;
    std::map<Key, int64_t> write_set;
    std::map<Key, Version> write_base;
  };

  explicit Engine(EventClock& clock, uint64_t write_wait_budget = 100)
      : clock_(clock), write_wait_budget_(write_wait_budget) {}

  void load_key(const Key& key, int64_t value);
  bool has_key(const Key& key) const;

  Txn* begin(uint64_t txn_id, IsolationLevel level);

  ReadResult read(Txn& txn, const Key& key);
  WriteResult write(Txn& txn, const Key& key, int64_t value);
  CommitResult commit(Txn& txn);
  void rollback(Txn& txn);
  void release(uint64_t txn_id);  // drop bookkeeping for a finished txn

  Version latest_version(const Key& key) const;
  int64_t latest_value(const Key& key) const;

  // Deterministic version-chain dump for the given keys (sorted if empty, all
  // loaded keys).
  std::string dump_chains(std::vector<Key> keys = {}) const;

  // Post-run invariant checks, used by tests.
  void check_chain_invariants() const;

 private:
  struct KeyState {
    mutable std::mutex mu;
    std::condition_variable cv;
    std::vector<VersionEntry> chain;
    uint64_t write_holder = 0;  // txn id, 0 when free
    std::deque<uint64_t> wait_queue;
  };

  struct CertRecord {
    uint64_t txn_id = 0;
    uint64_t snapshot_seq = 0;
    uint64_t commit_seq = 0;
    std::map<Key, Version> reads;
    std::map<Key, Version> writes;
  };

  KeyState* find_key(const Key& key) const;
  bool acquire_write_lock(Txn& txn, KeyState& ks);
  void release_write_locks(Txn& txn);
  bool certify_ser(const Txn& txn, const std::map<Key, Version>& prospective) const;
  void prune_cert_records();

  EventClock& clock_;
  uint64_t write_wait_budget_;

  mutable std::shared_mutex map_mu_;
  std::unordered_map<Key, std::unique_ptr<KeyState>, KeyHash> keys_;

  mutable std::mutex txn_mu_;
  std::unordered_map<uint64_t, std::unique_ptr<Txn>> txns_;

  mutable std::mutex commit_mu_;
  std::vector<CertRecord> cert_records_;
};

}  // namespace sertier
