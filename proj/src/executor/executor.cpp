#include "executor/executor.hpp"

#include <algorithm>
#include <chrono>

namespace sertier {

Coordinator::Coordinator(CoordinatorConfig config)
    : config_(config),
      engine_(clock_, config.engine_wait_budget),
      vlt_(clock_, config.vlt_buckets, config.lease_ticks),
      governor_(clock_, config.initial_level, config.civ_enabled) {
  if (config_.background_gc) {
    gc_thread_ = std::thread([this] {
      uint64_t last_sweep = 0;
      while (!stop_gc_.load(std::memory_order_relaxed)) {
        uint64_t now = clock_.now();
        if (now - last_sweep >= config_.gc_period_ticks) {
          vlt_.gc_sweep(now);
          last_sweep = now;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    });
  }
}

Coordinator::~Coordinator() {
  stop_gc_.store(true);
  if (gc_thread_.joinable()) gc_thread_.join();
}

uint32_t Coordinator::register_template(TransactionTemplate tpl) {
  if (analyzed_) throw Error("cannot register templates after analysis()");
  return registry_.register_template(std::move(tpl));
}

void Coordinator::analysis() {
  graph_ = build_static_graph(registry_);
  for (IsolationLevel level : {IsolationLevel::RC, IsolationLevel::SI}) {
    VulnerableDependencySet set = find_vulnerable_dependencies(*graph_, level);
    LevelRoles r;
    for (const VulnerablePair& p : set.pairs) {
      r.readers.insert({*registry_.id_of(p.reader_template), p.relation});
      r.writers.insert({*registry_.id_of(p.writer_template), p.relation});
    }
    vulnerable_[level] = std::move(set);
    roles_[level] = std::move(r);
  }
  vulnerable_[IsolationLevel::SER] = {IsolationLevel::SER, {}};
  roles_[IsolationLevel::SER] = {};
  analyzed_ = true;
}

const StaticDependencyGraph& Coordinator::static_graph() const {
  if (!graph_) throw Error("analysis() has not run");
  return *graph_;
}

const VulnerableDependencySet& Coordinator::vulnerable_set(IsolationLevel level) const {
  auto it = vulnerable_.find(level);
  if (it == vulnerable_.end()) throw Error("analysis() has not run");
  return it->second;
}

void Coordinator::load_key(const Key& key, int64_t value) { engine_.load_key(key, value); }

int Coordinator::strictness(IsolationLevel level) {
  switch (level) {
    case IsolationLevel::RC: return 2;
    case IsolationLevel::SI: return 1;
    case IsolationLevel::SER: return 0;
  }
  return 0;
}

const Coordinator::LevelRoles& Coordinator::roles(IsolationLevel level) const {
  return roles_.at(level);
}

bool Coordinator::tracked_read(IsolationLevel level, uint32_t tpl, const std::string& relation) const {
  if (level == IsolationLevel::SER) return false;
  return roles(level).readers.count({tpl, relation}) > 0;
}

bool Coordinator::tracked_write(IsolationLevel level, uint32_t tpl, const std::string& relation) const {
  if (level == IsolationLevel::SER) return false;
  return roles(level).writers.count({tpl, relation}) > 0;
}

std::unique_ptr<RuntimeTransaction> Coordinator::begin(const std::string& template_name) {
  if (!analyzed_) throw Error("analysis() must run before transactions start");
  auto tpl_id = registry_.id_of(template_name);
  if (!tpl_id) throw UnknownTemplate(template_name);

  auto txn = std::make_unique<RuntimeTransaction>();
  txn->id = next_txn_id_.fetch_add(1);
  txn->template_id = *tpl_id;
  txn->template_name = template_name;
  auto [level, begin_seq] = governor_.begin_txn(txn->id);
  txn->level = level;
  txn->begin_seq = begin_seq;
  txn->engine = engine_.begin(txn->id, level);
  return txn;
}

StepResult Coordinator::execute_step(RuntimeTransaction& txn, size_t step_index,
                                     const std::vector<uint64_t>& args,
                                     std::optional<int64_t> write_value) {
  if (txn.phase != TxnPhase::Executing) throw Error("execute_step outside the execution phase");
  const TransactionTemplate& tpl = registry_.at(txn.template_id);
  if (step_index >= tpl.steps.size()) throw Error("step index out of range");
  const Step& step = tpl.steps[step_index];
  if (args.size() != tpl.arity) throw Error("argument count does not match template arity");

  Key key{step.relation, args[step.key_param]};

  if (step.mode == AccessMode::Read) {
    ReadResult r;
    try {
      r = engine_.read(*txn.engine, key);
    } catch (const KeyNotFound&) {
      abort_txn(txn, abort_reason::kUser);
      throw;
    }
    txn.ops.push_back({AccessMode::Read, key, r.version});
    txn.op_own_write.push_back(r.own_write);
    if (!r.own_write && config_.cc_enabled &&
        tracked_read(txn.level, txn.template_id, step.relation)) {
      bool seen = false;
      for (auto& [k, v] : txn.vread_set) {
        if (k == key) {
          seen = true;
          break;
        }
      }
      if (!seen) txn.vread_set.push_back({key, r.version});
    }
    return {true, r.value};
  }

  if (!write_value) throw Error("write step needs a value");
  WriteResult w;
  try {
    w = engine_.write(*txn.engine, key, *write_value);
  } catch (const KeyNotFound&) {
    abort_txn(txn, abort_reason::kUser);
    throw;
  }
  if (w.status != WriteStatus::Ok) {
    abort_txn(txn, abort_reason::kEngineWwConflict);
    return {false, 0};
  }

  Version to_install = engine_base_version(txn, key) + 1;
  txn.ops.push_back({AccessMode::Write, key, to_install});
  txn.op_own_write.push_back(false);
  if (config_.cc_enabled && tracked_write(txn.level, txn.template_id, step.relation)) {
    bool seen = false;
    for (auto& [k, v] : txn.vwrite_set) {
      if (k == key) {
        v = to_install;
        seen = true;
        break;
      }
    }
    if (!seen) txn.vwrite_set.push_back({key, to_install});
  }
  return {true, *write_value};
}

// The version this transaction expects to install next for the key: one past
// the version it observed reading the key, or one past the committed version
// its engine write landed on.
Version Coordinator::engine_base_version(const RuntimeTransaction& txn, const Key& key) const {
  auto rs = txn.engine->read_set.find(key);
  if (rs != txn.engine->read_set.end()) return rs->second;
  return txn.engine->write_base.at(key);
}

std::vector<std::pair<Key, LockMode>> Coordinator::civ_lock_plan(const RuntimeTransaction& txn,
                                                                 IsolationLevel old_level,
                                                                 IsolationLevel new_level) const {
  IsolationLevel strict =
      strictness(old_level) >= strictness(new_level) ? old_level : new_level;
  std::map<Key, LockMode> plan;
  if (strict != IsolationLevel::SER) {
    for (const auto& [key, version] : txn.engine->read_set) {
      if (tracked_read(strict, txn.template_id, key.relation)) plan[key] = LockMode::Shared;
    }
    for (const auto& [key, value] : txn.engine->write_set) {
      if (tracked_write(strict, txn.template_id, key.relation)) plan[key] = LockMode::Exclusive;
    }
  }
  return {plan.begin(), plan.end()};
}

bool Coordinator::acquire_validation_locks(RuntimeTransaction& txn,
                                           const std::vector<std::pair<Key, LockMode>>& plan) {
  // Keys are locked in sorted order; WAIT-DIE breaks the remaining conflicts.
  for (const auto& [key, mode] : plan) {
    while (true) {
      LockVerdict verdict = vlt_.try_lock(key, txn.id, mode);
      if (verdict == LockVerdict::Granted) {
        txn.held_locks.push_back({key, mode});
        break;
      }
      if (verdict == LockVerdict::Die) return false;
      txn.wait_ticks += 1;
      clock_.tick();
      std::this_thread::sleep_for(std::chrono::microseconds(50));
    }
  }
  return true;
}

void Coordinator::release_validation_locks(RuntimeTransaction& txn) {
  for (const auto& [key, mode] : txn.held_locks) vlt_.release(key, txn.id);
  txn.held_locks.clear();
}

Version Coordinator::resolve_latest(const Key& key) {
  if (auto cached = vlt_.cached_version(key)) {
    if (config_.coherence_checks && *cached != engine_.latest_version(key))
      coherence_failures_.fetch_add(1);
    return *cached;
  }
  Version latest = engine_.latest_version(key);
  vlt_.store_cached_version(key, latest);
  return latest;
}

TxnOutcome Coordinator::commit(RuntimeTransaction& txn) {
  if (txn.phase == TxnPhase::Done) return txn.outcome;
  if (txn.phase != TxnPhase::Executing) throw Error("commit outside the execution phase");

  ValidationTicket ticket;
  if (config_.cc_enabled && config_.civ_enabled) {
    ticket = governor_.enter_validation(txn.id);
  }

  if (config_.cc_enabled) {
    txn.phase = TxnPhase::Validating;

    // Lock plan: the transaction's own tracked items, widened to the stricter
    // level's demands while a transition is draining.
    std::map<Key, LockMode> plan;
    std::set<Key> own_reads, own_writes;
    for (const auto& [key, v] : txn.vread_set) {
      plan[key] = LockMode::Shared;
      own_reads.insert(key);
    }
    for (const auto& [key, v] : txn.vwrite_set) {
      plan[key] = LockMode::Exclusive;
      own_writes.insert(key);
    }
    bool civ = ticket.cross_isolation && config_.civ_recheck;
    if (civ) {
      for (const auto& [key, mode] : civ_lock_plan(txn, ticket.old_level, ticket.new_level)) {
        auto it = plan.find(key);
        if (it == plan.end() || mode == LockMode::Exclusive) plan[key] = mode;
      }
    }

    std::vector<std::pair<Key, LockMode>> ordered(plan.begin(), plan.end());
    if (!acquire_validation_locks(txn, ordered)) {
      abort_txn(txn, abort_reason::kWaitDie);
      return txn.outcome;
    }

    // Own-level validation: reads must still observe the latest committed
    // version, writes must still install the next one.
    for (const auto& [key, observed] : txn.vread_set) {
      if (resolve_latest(key) != observed) {
        abort_txn(txn, abort_reason::kVersionMismatch);
        return txn.outcome;
      }
    }
    for (const auto& [key, to_install] : txn.vwrite_set) {
      if (resolve_latest(key) + 1 != to_install) {
        abort_txn(txn, abort_reason::kVersionMismatch);
        return txn.outcome;
      }
    }

    // Update-style guard: a key this transaction read and then wrote must not
    // have been overwritten in between. Stable without validation locks; the
    // engine write lock on the key is still held.
    for (const auto& [key, value] : txn.engine->write_set) {
      auto rs = txn.engine->read_set.find(key);
      if (rs == txn.engine->read_set.end()) continue;
      if (engine_.latest_version(key) != rs->second) {
        abort_txn(txn, abort_reason::kVersionMismatch);
        return txn.outcome;
      }
    }

    // Cross-isolation recheck: any read the stricter plan covers must be
    // unchanged, whether or not this transaction's own level tracks it.
    if (civ) {
      for (const auto& [key, mode] : txn.held_locks) {
        if (mode == LockMode::Shared) {
          if (own_reads.count(key)) continue;
          Version observed = txn.engine->read_set.at(key);
          if (resolve_latest(key) != observed) {
            abort_txn(txn, abort_reason::kCivVersionMismatch);
            return txn.outcome;
          }
        } else {
          if (own_writes.count(key)) continue;
          if (!txn.engine->write_set.count(key)) continue;
          if (resolve_latest(key) != engine_base_version(txn, key)) {
            abort_txn(txn, abort_reason::kCivVersionMismatch);
            return txn.outcome;
          }
        }
      }
    }
  }

  txn.phase = TxnPhase::Committing;
  CommitResult result = engine_.commit(*txn.engine);
  if (!result.committed) {
    release_validation_locks(txn);
    txn.phase = TxnPhase::Done;
    finish(txn, TxnOutcome::Aborted, abort_reason::kEngineSsi);
    return txn.outcome;
  }

  // Publish installed versions to the version cache, then release validation
  // locks, strictly after the engine commit so the engine's commit order
  // matches the middle-tier order.
  std::map<Key, Version> installed(result.installed.begin(), result.installed.end());
  for (const auto& [key, mode] : txn.held_locks) {
    if (mode != LockMode::Exclusive) continue;
    auto it = installed.find(key);
    if (it != installed.end()) {
      vlt_.store_cached_version(key, it->second);
      if (config_.coherence_checks && engine_.latest_version(key) != it->second)
        coherence_failures_.fetch_add(1);
    }
  }
  release_validation_locks(txn);

  // Patch write ops (and reads of own writes) with the installed versions.
  for (size_t i = 0; i < txn.ops.size(); ++i) {
    HistoryOp& op = txn.ops[i];
    auto it = installed.find(op.key);
    if (it == installed.end()) continue;
    if (op.mode == AccessMode::Write || txn.op_own_write[i]) op.version = it->second;
  }

  txn.phase = TxnPhase::Done;
  finish(txn, TxnOutcome::Committed, std::nullopt);
  return txn.outcome;
}

void Coordinator::rollback(RuntimeTransaction& txn) {
  if (txn.phase == TxnPhase::Done) return;
  abort_txn(txn, abort_reason::kUser);
}

void Coordinator::abort_txn(RuntimeTransaction& txn, const std::string& reason) {
  release_validation_locks(txn);
  engine_.rollback(*txn.engine);
  txn.phase = TxnPhase::Done;
  finish(txn, TxnOutcome::Aborted, reason);
}

void Coordinator::finish(RuntimeTransaction& txn, TxnOutcome outcome,
                         std::optional<std::string> reason) {
  txn.outcome = outcome;
  txn.abort_reason = std::move(reason);
  engine_.release(txn.id);
  txn.engine = nullptr;

  HistoryRecord rec;
  rec.txn_id = txn.id;
  rec.template_name = txn.template_name;
  rec.level = txn.level;
  rec.begin_seq = txn.begin_seq;
  rec.end_seq = clock_.tick();
  rec.outcome = outcome;
  rec.abort_reason = txn.abort_reason;
  rec.ops = txn.ops;
  log_.append(std::move(rec));

  governor_.txn_finished(txn.id);
}

bool Coordinator::request_transition(IsolationLevel new_level) {
  return governor_.request_transition(new_level);
}

}  // namespace sertier
