#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <map>
#include <random>
#include <thread>

#include "core/clock.hpp"
#include "engine/engine.hpp"
#include "oracle/oracle.hpp"

using namespace sertier;

namespace {

const Key kX{"item", 0};
const Key kY{"item", 1};

struct EngineFixture {
  EventClock clock;
  Engine engine{clock};
  uint64_t next_id = 1;

  EngineFixture() {
    engine.load_key(kX, 10);
    engine.load_key(kY, 10);
  }
  Engine::Txn* begin(IsolationLevel level) { return engine.begin(next_id++, level); }
};

}  // namespace

TEST_CASE("SI reads come from the snapshot") {
  EngineFixture f;
  Engine::Txn* reader = f.begin(IsolationLevel::SI);
  Engine::Txn* writer = f.begin(IsolationLevel::SI);
  f.engine.write(*writer, kX, 42);
  f.engine.commit(*writer);

  ReadResult r = f.engine.read(*reader, kX);
  CHECK(r.value == 10);
  CHECK(r.version == 0);
}

TEST_CASE("RC reads the most recently committed version") {
  EngineFixture f;
  Engine::Txn* reader = f.begin(IsolationLevel::RC);
  CHECK(f.engine.read(*reader, kX).version == 0);

  Engine::Txn* writer = f.begin(IsolationLevel::RC);
  f.engine.write(*writer, kX, 42);
  f.engine.commit(*writer);

  // Non-repeatable read is allowed at RC.
  ReadResult again = f.engine.read(*reader, kX);
  CHECK(again.value == 42);
  CHECK(again.version == 1);
}

TEST_CASE("SER visibility behaves like SI") {
  EngineFixture f;
  Engine::Txn* reader = f.begin(IsolationLevel::SER);
  Engine::Txn* writer = f.begin(IsolationLevel::RC);
  f.engine.write(*writer, kX, 42);
  f.engine.commit(*writer);
  CHECK(f.engine.read(*reader, kX).version == 0);
}

TEST_CASE("reading your own uncommitted write") {
  EngineFixture f;
  Engine::Txn* t = f.begin(IsolationLevel::SI);
  f.engine.write(*t, kX, 77);
  ReadResult r = f.engine.read(*t, kX);
  CHECK(r.own_write);
  CHECK(r.value == 77);
  CHECK(r.version == 1);  // provisional: current latest + 1
}

TEST_CASE("SI transaction sees its snapshot even after two later commits") {
  EngineFixture f;
  Engine::Txn* reader = f.begin(IsolationLevel::SI);
  for (int i = 0; i < 2; ++i) {
    Engine::Txn* w = f.begin(IsolationLevel::RC);
    f.engine.write(*w, kX, 100 + i);
    f.engine.commit(*w);
  }
  CHECK(f.engine.latest_version(kX) == 2);
  CHECK(f.engine.read(*reader, kX).version == 0);
}

TEST_CASE("first committer wins under SI") {
  EngineFixture f;
  Engine::Txn* a = f.begin(IsolationLevel::SI);
  Engine::Txn* b = f.begin(IsolationLevel::SI);
  CHECK(f.engine.write(*a, kX, 1).status == WriteStatus::Ok);
  f.engine.commit(*a);
  CHECK(f.engine.write(*b, kX, 2).status == WriteStatus::Conflict);
}

TEST_CASE("RC writers proceed after the blocker commits") {
  EngineFixture f;
  Engine::Txn* a = f.begin(IsolationLevel::RC);
  Engine::Txn* b = f.begin(IsolationLevel::RC);
  CHECK(f.engine.write(*a, kX, 1).status == WriteStatus::Ok);

  std::thread committer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    f.engine.commit(*a);
  });
  WriteResult w = f.engine.write(*b, kX, 2);  // blocks until a finishes
  committer.join();
  CHECK(w.status == WriteStatus::Ok);
  CHECK(w.base_version == 1);
  CommitResult c = f.engine.commit(*b);
  CHECK(c.committed);
  CHECK(f.engine.latest_version(kX) == 2);
  CHECK(f.engine.latest_value(kX) == 2);
}

TEST_CASE("write lock waiters give up after the budget") {
  EventClock clock;
  Engine engine(clock, 20);
  engine.load_key(kX, 0);
  Engine::Txn* holder = engine.begin(1, IsolationLevel::RC);
  Engine::Txn* waiter = engine.begin(2, IsolationLevel::RC);
  engine.write(*holder, kX, 1);
  CHECK(engine.write(*waiter, kX, 2).status == WriteStatus::Timeout);
  engine.rollback(*holder);
  engine.rollback(*waiter);
}

TEST_CASE("write skew commits under SI and one aborts under SER") {
  auto run = [](IsolationLevel level) {
    EngineFixture f;
    Engine::Txn* t1 = f.begin(level);
    Engine::Txn* t2 = f.begin(level);
    f.engine.read(*t1, kX);
    f.engine.read(*t1, kY);
    f.engine.read(*t2, kX);
    f.engine.read(*t2, kY);
    f.engine.write(*t1, kX, -50);
    f.engine.write(*t2, kY, -50);
    CommitResult c1 = f.engine.commit(*t1);
    CommitResult c2 = f.engine.commit(*t2);
    return std::make_pair(c1.committed, c2.committed);
  };

  auto [si1, si2] = run(IsolationLevel::SI);
  CHECK(si1);
  CHECK(si2);

  auto [ser1, ser2] = run(IsolationLevel::SER);
  CHECK(ser1);
  CHECK_FALSE(ser2);  // certification turns the second commit away
}

TEST_CASE("commit with an empty write set always succeeds") {
  EngineFixture f;
  Engine::Txn* t = f.begin(IsolationLevel::SER);
  f.engine.read(*t, kX);
  CommitResult c = f.engine.commit(*t);
  CHECK(c.committed);
  CHECK(c.installed.empty());
  CHECK(f.engine.latest_version(kX) == 0);
}

TEST_CASE("latest version counts committed writes only") {
  EngineFixture f;
  CHECK(f.engine.latest_version(kX) == 0);
  for (int i = 0; i < 3; ++i) {
    Engine::Txn* w = f.begin(IsolationLevel::RC);
    f.engine.write(*w, kX, i);
    f.engine.commit(*w);
  }
  CHECK(f.engine.latest_version(kX) == 3);

  Engine::Txn* pending = f.begin(IsolationLevel::RC);
  f.engine.write(*pending, kX, 99);
  CHECK(f.engine.latest_version(kX) == 3);
  f.engine.rollback(*pending);
  CHECK(f.engine.latest_version(kX) == 3);
}

TEST_CASE("reads of unknown keys fail") {
  EngineFixture f;
  Engine::Txn* t = f.begin(IsolationLevel::RC);
  CHECK_THROWS_AS(f.engine.read(*t, {"nope", 1}), KeyNotFound);
  CHECK_THROWS_AS(f.engine.latest_version({"nope", 1}), KeyNotFound);
}

TEST_CASE("dump is deterministic and shows chains") {
  EngineFixture f;
  Engine::Txn* w = f.begin(IsolationLevel::RC);
  f.engine.write(*w, kX, 5);
  f.engine.commit(*w);
  std::string a = f.engine.dump_chains();
  std::string b = f.engine.dump_chains();
  CHECK(a == b);
  CHECK(a.find("item/0: v0=10@0 v1=5@") != std::string::npos);
}

namespace {

// Random concurrent engine workload; returns a history assembled from the
// per-transaction logs so the oracle can inspect the run.
std::vector<HistoryRecord> random_engine_run(IsolationLevel level, uint64_t seed, int sessions,
                                             int txns_per_session) {
  EventClock clock;
  Engine engine(clock);
  const int nkeys = 6;
  for (int k = 0; k < nkeys; ++k) engine.load_key({"item", static_cast<uint64_t>(k)}, 100);

  std::mutex mu;
  std::vector<HistoryRecord> history;
  std::atomic<uint64_t> ids{1};

  auto worker = [&](int session) {
    std::mt19937_64 rng(seed * 131 + session);
    std::uniform_int_distribution<uint64_t> key(0, nkeys - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> ops(1, 4);
    for (int i = 0; i < txns_per_session; ++i) {
      uint64_t id = ids.fetch_add(1);
      Engine::Txn* txn = engine.begin(id, level);
      HistoryRecord rec;
      rec.txn_id = id;
      rec.template_name = "random";
      rec.level = level;
      rec.begin_seq = txn->snapshot_seq;
      bool aborted = false;
      int n = ops(rng);
      std::vector<size_t> patch_ops;
      for (int op = 0; op < n && !aborted; ++op) {
        std::this_thread::yield();
        Key k{"item", key(rng)};
        if (coin(rng)) {
          ReadResult r = engine.read(*txn, k);
          rec.ops.push_back({AccessMode::Read, k, r.version});
          if (r.own_write) patch_ops.push_back(rec.ops.size() - 1);
        } else {
          WriteResult w = engine.write(*txn, k, static_cast<int64_t>(id));
          if (w.status != WriteStatus::Ok) {
            aborted = true;
            break;
          }
          rec.ops.push_back({AccessMode::Write, k, w.base_version + 1});
          patch_ops.push_back(rec.ops.size() - 1);
        }
      }
      if (!aborted) {
        CommitResult c = engine.commit(*txn);
        if (c.committed) {
          std::map<Key, Version> installed(c.installed.begin(), c.installed.end());
          for (size_t idx : patch_ops) rec.ops[idx].version = installed.at(rec.ops[idx].key);
          rec.outcome = TxnOutcome::Committed;
        } else {
          aborted = true;
        }
      } else {
        engine.rollback(*txn);
      }
      if (aborted) {
        rec.outcome = TxnOutcome::Aborted;
        rec.abort_reason = "engine_ww_conflict";
      }
      rec.end_seq = clock.tick();
      engine.release(id);
      std::lock_guard<std::mutex> lock(mu);
      history.push_back(std::move(rec));
    }
  };

  std::vector<std::thread> threads;
  for (int s = 0; s < sessions; ++s) threads.emplace_back(worker, s);
  for (auto& t : threads) t.join();
  engine.check_chain_invariants();
  return history;
}

}  // namespace

TEST_CASE("chains stay consecutive and ordered after concurrent runs") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    random_engine_run(IsolationLevel::RC, seed, 4, 25);
    random_engine_run(IsolationLevel::SI, seed, 4, 25);
  }
}

TEST_CASE("SER certification keeps every history acyclic") {
  int cycles = 0;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    auto history = random_engine_run(IsolationLevel::SER, seed, 8, 6);
    if (!check_serializable(build_dsg(history)).serializable) ++cycles;
  }
  CHECK(cycles == 0);
}

TEST_CASE("SI with no middle tier admits cycles somewhere in the sweep") {
  int cycles = 0;
  for (uint64_t seed = 0; seed < 120; ++seed) {
    auto history = random_engine_run(IsolationLevel::SI, seed, 8, 6);
    if (!check_serializable(build_dsg(history)).serializable) ++cycles;
  }
  CHECK(cycles > 0);
}
