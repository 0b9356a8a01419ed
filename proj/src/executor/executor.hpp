#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "analyzer/analyzer.hpp"
#include "core/clock.hpp"
#include "core/history.hpp"
#include "core/types.hpp"
#include "engine/engine.hpp"
#include "executor/governor.hpp"
#include "executor/vlt.hpp"

namespace sertier {

class UnknownTemplate : public Error {
 public:
  explicit UnknownTemplate(const std::string& name) : Error("unknown template: " + name) {}
};

struct CoordinatorConfig {
  IsolationLevel initial_level = IsolationLevel::SI;
  size_t vlt_buckets = 4096;
  uint64_t lease_ticks = 1000;
  uint64_t gc_period_ticks = 10000;
  uint32_t retry_budget = 10;
  uint64_t engine_wait_budget = 100;
  bool cc_enabled = true;
  bool civ_enabled = true;
  bool civ_recheck = true;       // the cross-isolation read-set recheck during Draining
  bool background_gc = false;    // periodic sweep thread (opportunistic GC always runs)
  bool coherence_checks = false; // assert cache == engine latest at update points
};

enum class TxnPhase : uint8_t { Executing = 0, Validating, Committing, Done };

struct RuntimeTransaction {
  uint64_t id = 0;  // doubles as the WAIT-DIE age: smaller id = older
  uint32_t template_id = 0;
  std::string template_name;
  IsolationLevel level = IsolationLevel::RC;
  uint64_t begin_seq = 0;
  TxnPhase phase = TxnPhase::Executing;
  TxnOutcome outcome = TxnOutcome::Committed;
  std::optional<std::string> abort_reason;
  uint64_t wait_ticks = 0;

  // Tracked items for the level's vulnerable dependencies.
  std::vector<std::pair<Key, Version>> vread_set;   // version observed
  std::vector<std::pair<Key, Version>> vwrite_set;  // version to install

  Engine::Txn* engine = nullptr;
  std::vector<HistoryOp> ops;
  std::vector<bool> op_own_write;  // reads of own uncommitted writes, patched at commit
  std::vector<std::pair<Key, LockMode>> held_locks;
};

struct StepResult {
  bool ok = true;
  int64_t value = 0;
};

// The middle tier: runs transactions against the engine, tracks the reads and
// writes that participate in vulnerable dependencies, and schedules commit
// order to match dependency order through the validation lock table.
class Coordinator {
 public:
  explicit Coordinator(CoordinatorConfig config = {});
  ~Coordinator();

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  uint32_t register_template(TransactionTemplate tpl);
  // Builds the static graph and the per-level vulnerable dependency sets.
  void analysis();
  bool analyzed() const { return analyzed_; }

  void load_key(const Key& key, int64_t value);

  std::unique_ptr<RuntimeTransaction> begin(const std::string& template_name);
  StepResult execute_step(RuntimeTransaction& txn, size_t step_index,
                          const std::vector<uint64_t>& args,
                          std::optional<int64_t> write_value = std::nullopt);
  TxnOutcome commit(RuntimeTransaction& txn);
  void rollback(RuntimeTransaction& txn);  // user abort

  bool request_transition(IsolationLevel new_level);

  // Validation-lock demands under the stricter of the two levels, over the
  // transaction's full engine read/write sets.
  std::vector<std::pair<Key, LockMode>> civ_lock_plan(const RuntimeTransaction& txn,
                                                      IsolationLevel old_level,
                                                      IsolationLevel new_level) const;

  Engine& engine() { return engine_; }
  EventClock& clock() { return clock_; }
  TransitionGovernor& governor() { return governor_; }
  ValidationLockTable& vlt() { return vlt_; }
  HistoryLog& history() { return log_; }
  const TemplateRegistry& registry() const { return registry_; }
  const CoordinatorConfig& config() const { return config_; }
  const StaticDependencyGraph& static_graph() const;
  const VulnerableDependencySet& vulnerable_set(IsolationLevel level) const;

  uint64_t coherence_failures() const { return coherence_failures_.load(); }

 private:
  struct LevelRoles {
    std::set<std::pair<uint32_t, std::string>> readers;  // (template id, relation)
    std::set<std::pair<uint32_t, std::string>> writers;
  };

  static int strictness(IsolationLevel level);
  const LevelRoles& roles(IsolationLevel level) const;
  bool tracked_read(IsolationLevel level, uint32_t tpl, const std::string& relation) const;
  bool tracked_write(IsolationLevel level, uint32_t tpl, const std::string& relation) const;

  void finish(RuntimeTransaction& txn, TxnOutcome outcome, std::optional<std::string> reason);
  void abort_txn(RuntimeTransaction& txn, const std::string& reason);
  bool acquire_validation_locks(RuntimeTransaction& txn,
                                const std::vector<std::pair<Key, LockMode>>& plan);
  void release_validation_locks(RuntimeTransaction& txn);
  Version resolve_latest(const Key& key);
  Version engine_base_version(const RuntimeTransaction& txn, const Key& key) const;

  CoordinatorConfig config_;
  EventClock clock_;
  Engine engine_;
  ValidationLockTable vlt_;
  TransitionGovernor governor_;
  TemplateRegistry registry_;
  HistoryLog log_;

  bool analyzed_ = false;
  std::optional<StaticDependencyGraph> graph_;
  std::map<IsolationLevel, VulnerableDependencySet> vulnerable_;
  std::map<IsolationLevel, LevelRoles> roles_;

  std::atomic<uint64_t> next_txn_id_{1};
  std::atomic<uint64_t> coherence_failures_{0};

  std::atomic<bool> stop_gc_{false};
  std::thread gc_thread_;
};

}  // namespace sertier
