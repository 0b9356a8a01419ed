#include "executor/governor.hpp"

namespace sertier {

std::pair<IsolationLevel, uint64_t> TransitionGovernor::begin_txn(uint64_t txn_id) {
  std::lock_guard<std::mutex> lock(mu_);
  IsolationLevel level =
      state_.mode == TransitionMode::Steady ? state_.current : state_.target;
  uint64_t begin_seq = clock_.tick();
  live_.emplace(txn_id, begin_seq);
  return {level, begin_seq};
}

bool TransitionGovernor::request_transition(IsolationLevel new_level) {
  std::lock_guard<std::mutex> lock(mu_);
  if (state_.mode != TransitionMode::Steady) return false;
  if (new_level == state_.current) return false;
  ++requested_;

  if (!civ_enabled_) {
    state_.current = new_level;
    state_.target = new_level;
    ++completed_;
    return true;
  }

  state_.target = new_level;
  state_.transition_seq = clock_.tick();
  state_.mode = TransitionMode::Barrier;
  barrier_waits_on_ = in_validation_;
  if (barrier_waits_on_.empty()) enter_draining_locked();
  return true;
}

void TransitionGovernor::enter_draining_locked() {
  state_.mode = TransitionMode::Draining;
  overlap_phase_ = false;
  state_.remaining_old.clear();
  for (const auto& [id, begin_seq] : live_) {
    if (begin_seq < state_.transition_seq) state_.remaining_old.insert(id);
  }
  if (state_.remaining_old.empty()) drain_advanced_locked();
  cv_.notify_all();
}

// The old-level transactions are gone, but new-level transactions that
// overlapped them may still be running; when the new level is SER their
// dependencies on the old era are invisible to the engine's certifier, so
// they must still pass the cross-isolation validation. One more generation
// suffices: anything begun from here on cannot read past an old-era commit.
void TransitionGovernor::drain_advanced_locked() {
  if (!overlap_phase_) {
    overlap_phase_ = true;
    uint64_t drain_end = clock_.tick();
    state_.remaining_old.clear();
    for (const auto& [id, begin_seq] : live_) {
      if (begin_seq < drain_end) state_.remaining_old.insert(id);
    }
    if (!state_.remaining_old.empty()) return;
  }
  finish_locked();
}

void TransitionGovernor::finish_locked() {
  state_.mode = TransitionMode::Steady;
  state_.current = state_.target;
  state_.remaining_old.clear();
  overlap_phase_ = false;
  ++completed_;
  cv_.notify_all();
}

ValidationTicket TransitionGovernor::enter_validation(uint64_t txn_id) {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return state_.mode != TransitionMode::Barrier; });
  in_validation_.insert(txn_id);
  ValidationTicket ticket;
  if (state_.mode == TransitionMode::Draining) {
    ticket.cross_isolation = true;
    ticket.old_level = state_.current;
    ticket.new_level = state_.target;
  }
  return ticket;
}

void TransitionGovernor::txn_finished(uint64_t txn_id) {
  std::lock_guard<std::mutex> lock(mu_);
  live_.erase(txn_id);
  in_validation_.erase(txn_id);
  if (state_.mode == TransitionMode::Barrier) {
    barrier_waits_on_.erase(txn_id);
    if (barrier_waits_on_.empty()) enter_draining_locked();
  } else if (state_.mode == TransitionMode::Draining) {
    if (state_.remaining_old.erase(txn_id) && state_.remaining_old.empty())
      drain_advanced_locked();
  }
}

bool TransitionGovernor::drain_tick(uint64_t txn_id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (state_.mode != TransitionMode::Draining) return false;
  if (!state_.remaining_old.erase(txn_id)) return false;
  live_.erase(txn_id);
  if (state_.remaining_old.empty()) drain_advanced_locked();
  return true;
}

TransitionState TransitionGovernor::state() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_;
}

IsolationLevel TransitionGovernor::steady_level() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_.mode == TransitionMode::Steady ? state_.current : state_.target;
}

}  // namespace sertier
