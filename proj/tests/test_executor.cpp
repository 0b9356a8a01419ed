#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "bench/workload.hpp"
#include "executor/executor.hpp"
#include "oracle/oracle.hpp"

using namespace sertier;

namespace {

std::unique_ptr<Coordinator> smallbank_coord(IsolationLevel level, bool cc = true,
                                             uint64_t accounts = 10) {
  CoordinatorConfig config;
  config.initial_level = level;
  config.cc_enabled = cc;
  config.civ_enabled = cc;
  auto coord = std::make_unique<Coordinator>(config);
  TemplateRegistry bank = bench::smallbank_templates();
  for (const TransactionTemplate& tpl : bank.all()) coord->register_template(tpl);
  coord->analysis();
  for (uint64_t i = 0; i < accounts; ++i) {
    coord->load_key({"checking", i}, 100);
    coord->load_key({"savings", i}, 100);
  }
  return coord;
}

bool has_key(const std::vector<std::pair<Key, Version>>& set, const Key& key) {
  for (const auto& [k, v] : set)
    if (k == key) return true;
  return false;
}

}  // namespace

TEST_CASE("begin rejects unknown templates and unanalyzed coordinators") {
  CoordinatorConfig config;
  Coordinator coord(config);
  coord.register_template({"t", 1, {{AccessMode::Read, "r", 0}}});
  CHECK_THROWS_AS(coord.begin("t"), Error);  // analysis() has not run
  coord.analysis();
  CHECK_THROWS_AS(coord.begin("nope"), UnknownTemplate);
}

TEST_CASE("SER transactions track nothing") {
  auto coord = smallbank_coord(IsolationLevel::SER);
  auto txn = coord->begin("balance");
  CHECK(txn->level == IsolationLevel::SER);
  coord->execute_step(*txn, 0, {1});
  coord->execute_step(*txn, 1, {1});
  CHECK(txn->vread_set.empty());
  CHECK(txn->vwrite_set.empty());
  CHECK(coord->commit(*txn) == TxnOutcome::Committed);
  CHECK(coord->vlt().entry_count() == 0);  // zero lock operations
}

TEST_CASE("RC tracks balance reads of both relations") {
  auto coord = smallbank_coord(IsolationLevel::RC);
  auto txn = coord->begin("balance");
  coord->execute_step(*txn, 0, {2});
  coord->execute_step(*txn, 1, {2});
  CHECK(has_key(txn->vread_set, {"checking", 2}));
  CHECK(has_key(txn->vread_set, {"savings", 2}));
  CHECK(coord->commit(*txn) == TxnOutcome::Committed);
}

TEST_CASE("SI tracks only the write_check/transact_savings pair") {
  auto coord = smallbank_coord(IsolationLevel::SI);

  auto dc = coord->begin("deposit_checking");
  int64_t c = coord->execute_step(*dc, 0, {3}).value;
  coord->execute_step(*dc, 1, {3}, c + 5);
  CHECK(dc->vread_set.empty());
  CHECK(dc->vwrite_set.empty());
  coord->commit(*dc);

  auto wc = coord->begin("write_check");
  coord->execute_step(*wc, 0, {3});  // checking read: untracked at SI
  coord->execute_step(*wc, 1, {3});  // savings read: tracked
  CHECK_FALSE(has_key(wc->vread_set, {"checking", 3}));
  CHECK(has_key(wc->vread_set, {"savings", 3}));
  coord->execute_step(*wc, 2, {3}, 1);
  CHECK(wc->vwrite_set.empty());  // write_check's write is not SI-vulnerable
  coord->commit(*wc);

  auto ts = coord->begin("transact_savings");
  int64_t s = coord->execute_step(*ts, 0, {3}).value;
  coord->execute_step(*ts, 1, {3}, s + 5);
  CHECK(has_key(ts->vwrite_set, {"savings", 3}));
  coord->commit(*ts);

  auto bal = coord->begin("balance");
  coord->execute_step(*bal, 0, {3});
  coord->execute_step(*bal, 1, {3});
  CHECK(bal->vread_set.empty());  // balance is not the reader of the SI pair
  coord->commit(*bal);
}

TEST_CASE("a newer committed version aborts validation") {
  auto coord = smallbank_coord(IsolationLevel::SI);
  auto wc = coord->begin("write_check");
  coord->execute_step(*wc, 0, {4});
  coord->execute_step(*wc, 1, {4});  // savings observed at version 0

  auto ts = coord->begin("transact_savings");
  int64_t s = coord->execute_step(*ts, 0, {4}).value;
  coord->execute_step(*ts, 1, {4}, s + 20);
  CHECK(coord->commit(*ts) == TxnOutcome::Committed);

  coord->execute_step(*wc, 2, {4}, 90);
  CHECK(coord->commit(*wc) == TxnOutcome::Aborted);
  CHECK(wc->abort_reason == abort_reason::kVersionMismatch);
}

TEST_CASE("exclusive validation waiters block until the shared holder commits") {
  auto coord = smallbank_coord(IsolationLevel::SI);
  auto ts = coord->begin("transact_savings");  // older than the fake holder
  int64_t s = coord->execute_step(*ts, 0, {5}).value;
  coord->execute_step(*ts, 1, {5}, s + 20);

  // A younger reader is mid-validation, holding the shared lock.
  const Key savings{"savings", 5};
  uint64_t fake_reader = 1u << 20;
  REQUIRE(coord->vlt().try_lock(savings, fake_reader, LockMode::Shared) == LockVerdict::Granted);

  std::atomic<bool> committed{false};
  std::thread committer([&] {
    coord->commit(*ts);
    committed.store(true);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  CHECK_FALSE(committed.load());  // still waiting on the validation lock

  coord->vlt().release(savings, fake_reader);
  committer.join();
  CHECK(ts->outcome == TxnOutcome::Committed);
  CHECK(ts->wait_ticks > 0);
}

TEST_CASE("younger exclusive requester dies instead of waiting") {
  auto coord = smallbank_coord(IsolationLevel::SI);
  const Key savings{"savings", 6};
  // An older transaction id holds the shared lock.
  REQUIRE(coord->vlt().try_lock(savings, 0, LockMode::Shared) == LockVerdict::Granted);

  auto ts = coord->begin("transact_savings");
  int64_t s = coord->execute_step(*ts, 0, {6}).value;
  coord->execute_step(*ts, 1, {6}, s + 20);
  CHECK(coord->commit(*ts) == TxnOutcome::Aborted);
  CHECK(ts->abort_reason == abort_reason::kWaitDie);
  coord->vlt().release(savings, 0);

  // Retry with a fresh id succeeds.
  auto retry = coord->begin("transact_savings");
  CHECK(retry->id > ts->id);
  s = coord->execute_step(*retry, 0, {6}).value;
  coord->execute_step(*retry, 1, {6}, s + 20);
  CHECK(coord->commit(*retry) == TxnOutcome::Committed);
}

TEST_CASE("update-style read-then-write races abort even when untracked") {
  CoordinatorConfig config;
  config.initial_level = IsolationLevel::RC;
  Coordinator coord(config);
  coord.register_template({"inc", 1, {{AccessMode::Read, "r", 0}, {AccessMode::Write, "r", 0}}});
  coord.analysis();
  // No vulnerable dependencies at all: the only read is covered by the write.
  CHECK(coord.vulnerable_set(IsolationLevel::RC).pairs.empty());
  coord.load_key({"r", 1}, 0);

  auto slow = coord.begin("inc");
  int64_t v = coord.execute_step(*slow, 0, {1}).value;

  auto fast = coord.begin("inc");
  int64_t fv = coord.execute_step(*fast, 0, {1}).value;
  coord.execute_step(*fast, 1, {1}, fv + 1);
  CHECK(coord.commit(*fast) == TxnOutcome::Committed);

  coord.execute_step(*slow, 1, {1}, v + 1);
  CHECK(coord.commit(*slow) == TxnOutcome::Aborted);
  CHECK(slow->abort_reason == abort_reason::kVersionMismatch);

  // The surviving value reflects exactly one increment.
  CHECK(coord.engine().latest_value({"r", 1}) == 1);
}

TEST_CASE("engine write conflicts abort the runtime transaction") {
  auto coord = smallbank_coord(IsolationLevel::SI);
  auto a = coord->begin("deposit_checking");
  int64_t av = coord->execute_step(*a, 0, {7}).value;
  coord->execute_step(*a, 1, {7}, av + 1);
  CHECK(coord->commit(*a) == TxnOutcome::Committed);

  auto b = coord->begin("deposit_checking");
  // b's snapshot predates nothing: begin after commit, so no conflict.
  int64_t bv = coord->execute_step(*b, 0, {7}).value;
  CHECK(bv == av + 1);
  coord->execute_step(*b, 1, {7}, bv + 1);
  CHECK(coord->commit(*b) == TxnOutcome::Committed);

  auto c = coord->begin("deposit_checking");
  coord->execute_step(*c, 0, {7});
  auto d = coord->begin("deposit_checking");
  int64_t dv = coord->execute_step(*d, 0, {7}).value;
  coord->execute_step(*d, 1, {7}, dv + 1);
  CHECK(coord->commit(*d) == TxnOutcome::Committed);
  // c's snapshot now trails d's commit: first-committer-wins.
  StepResult r = coord->execute_step(*c, 1, {7}, 0);
  CHECK_FALSE(r.ok);
  CHECK(c->outcome == TxnOutcome::Aborted);
  CHECK(c->abort_reason == abort_reason::kEngineWwConflict);
}

TEST_CASE("user rollback records the user reason") {
  auto coord = smallbank_coord(IsolationLevel::RC);
  auto txn = coord->begin("balance");
  coord->execute_step(*txn, 0, {1});
  coord->rollback(*txn);
  CHECK(txn->outcome == TxnOutcome::Aborted);
  CHECK(txn->abort_reason == abort_reason::kUser);
  auto history = coord->history().snapshot();
  REQUIRE(history.size() == 1);
  CHECK(history[0].abort_reason == std::string("user"));
}

namespace {

struct MiniRun {
  std::vector<HistoryRecord> history;
  uint64_t coherence_failures = 0;
};

MiniRun random_smallbank_run(IsolationLevel level, bool cc, uint64_t seed) {
  bench::WorkloadConfig config;
  config.benchmark = "smallbank";
  config.sessions = 8;
  config.duration_ops = 120;
  config.skew = 0.9;
  config.accounts = 40;
  config.seed = seed;
  config.fixed_level = level;
  config.cc_enabled = cc;
  config.civ_enabled = cc;
  bench::RunResult result = bench::run_workload(config);
  return {std::move(result.history), 0};
}

}  // namespace

TEST_CASE("middle tier keeps RC and SI histories serializable") {
  for (uint64_t seed = 0; seed < 15; ++seed) {
    for (IsolationLevel level : {IsolationLevel::RC, IsolationLevel::SI}) {
      auto run = random_smallbank_run(level, true, seed);
      auto verdict = check_serializable(build_dsg(run.history));
      CHECK(verdict.serializable);
      CHECK(find_vulnerable_violations(run.history, level).empty());
    }
  }
}

TEST_CASE("disabling the middle tier lets cycles through eventually") {
  int cycles = 0;
  for (uint64_t seed = 0; seed < 40 && cycles == 0; ++seed) {
    for (IsolationLevel level : {IsolationLevel::RC, IsolationLevel::SI}) {
      auto run = random_smallbank_run(level, false, seed);
      if (!check_serializable(build_dsg(run.history)).serializable) ++cycles;
    }
  }
  CHECK(cycles > 0);
}

TEST_CASE("event counter never hands out duplicate seqs in a run") {
  auto run = random_smallbank_run(IsolationLevel::RC, true, 3);
  std::set<uint64_t> seqs;
  for (const HistoryRecord& rec : run.history) {
    CHECK(seqs.insert(rec.begin_seq).second);
    CHECK(seqs.insert(rec.end_seq).second);
  }
}

TEST_CASE("version cache stays coherent at update points") {
  CoordinatorConfig config;
  config.initial_level = IsolationLevel::RC;
  config.coherence_checks = true;
  Coordinator coord(config);
  TemplateRegistry bank = bench::smallbank_templates();
  for (const TransactionTemplate& tpl : bank.all()) coord.register_template(tpl);
  coord.analysis();
  for (uint64_t i = 0; i < 4; ++i) {
    coord.load_key({"checking", i}, 100);
    coord.load_key({"savings", i}, 100);
  }
  for (int round = 0; round < 50; ++round) {
    auto ts = coord.begin("transact_savings");
    uint64_t acct = static_cast<uint64_t>(round % 4);
    int64_t s = coord.execute_step(*ts, 0, {acct}).value;
    coord.execute_step(*ts, 1, {acct}, s + 1);
    coord.commit(*ts);

    auto bal = coord.begin("balance");
    coord.execute_step(*bal, 0, {acct});
    coord.execute_step(*bal, 1, {acct});
    coord.commit(*bal);
  }
  CHECK(coord.coherence_failures() == 0);
}
