#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>

#include "core/clock.hpp"
#include "core/types.hpp"

namespace sertier {

enum class TransitionMode : uint8_t { Steady = 0, Barrier, Draining };

struct TransitionState {
  TransitionMode mode = TransitionMode::Steady;
  IsolationLevel current = IsolationLevel::SI;  // steady level, or I_old while switching
  IsolationLevel target = IsolationLevel::SI;   // I_new while switching
  uint64_t transition_seq = 0;
  std::set<uint64_t> remaining_old;
};

struct ValidationTicket {
  bool cross_isolation = false;  // validate under the cross-isolation rules
  IsolationLevel old_level = IsolationLevel::SI;
  IsolationLevel new_level = IsolationLevel::SI;
};

// Orchestrates isolation-level transitions. A switch runs Barrier (no
// transaction may enter the validation phase; execution continues) until the
// in-flight validations finish, then Draining (cross-isolation validation)
// until every transaction begun under I_old is committed or aborted.
//
// With civ disabled the switch is a naive instant level flip, kept as the
// negative control for the cross-isolation scenarios.
class TransitionGovernor {
 public:
  TransitionGovernor(EventClock& clock, IsolationLevel initial, bool civ_enabled)
      : clock_(clock), civ_enabled_(civ_enabled) {
    state_.current = initial;
    state_.target = initial;
  }

  // Stamps begin_seq and picks the level for a new transaction.
  std::pair<IsolationLevel, uint64_t> begin_txn(uint64_t txn_id);

  bool request_transition(IsolationLevel new_level);

  // Blocks while the governor is in Barrier, then registers the transaction
  // as validating and says which rules apply.
  ValidationTicket enter_validation(uint64_t txn_id);

  void txn_finished(uint64_t txn_id);

  // Removes one id from the draining set; returns false for unknown ids.
  bool drain_tick(uint64_t txn_id);

  TransitionState state() const;
  IsolationLevel steady_level() const;
  uint64_t transitions_requested() const { return requested_; }
  uint64_t transitions_completed() const { return completed_; }

 private:
  void enter_draining_locked();
  void drain_advanced_locked();
  void finish_locked();

  EventClock& clock_;
  bool civ_enabled_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  TransitionState state_;
  std::map<uint64_t, uint64_t> live_;      // txn id -> begin_seq
  std::set<uint64_t> in_validation_;
  std::set<uint64_t> barrier_waits_on_;    // validations that must finish before Draining
  bool overlap_phase_ = false;             // draining the transactions that overlapped I_old
  uint64_t requested_ = 0;
  uint64_t completed_ = 0;
};

}  // namespace sertier
