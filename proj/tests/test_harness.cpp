#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bench/workload.hpp"
#include "core/history.hpp"
#include "oracle/oracle.hpp"

using namespace sertier;
using namespace sertier::bench;

TEST_CASE("smallbank registry matches the benchmark shape") {
  auto registry = smallbank_templates();
  REQUIRE(registry.size() == 5);
  const TransactionTemplate* bal = registry.find("balance");
  REQUIRE(bal);
  for (const Step& s : bal->steps) CHECK(s.mode == AccessMode::Read);  // read-only

  const TransactionTemplate* amg = registry.find("amalgamate");
  REQUIRE(amg);
  CHECK(amg->arity == 2);
  CHECK(amg->steps.size() == 6);
}

TEST_CASE("ycsb template write counts at the boundaries") {
  auto all_reads = ycsb_template("y", 10, 0);
  for (const Step& s : all_reads.steps) CHECK(s.mode == AccessMode::Read);

  auto all_writes = ycsb_template("y", 10, 100);
  for (const Step& s : all_writes.steps) CHECK(s.mode == AccessMode::Write);

  auto mixed = ycsb_template("y", 10, 10);
  int writes = 0;
  for (const Step& s : mixed.steps)
    if (s.mode == AccessMode::Write) ++writes;
  CHECK(writes == 1);
  CHECK(mixed.arity == 10);
}

TEST_CASE("zipf sampler stays in range and skews toward small keys") {
  std::mt19937_64 rng(5);
  ZipfGenerator zipf(1000, 0.9);
  size_t low = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    uint64_t k = zipf.next(rng);
    CHECK(k < 1000);
    if (k < 10) ++low;
  }
  CHECK(low > n / 10);  // the hot decile dominates

  ZipfGenerator uniform(1000, 0.0);
  size_t low_uniform = 0;
  for (int i = 0; i < n; ++i)
    if (uniform.next(rng) < 10) ++low_uniform;
  CHECK(low_uniform < n / 50);
}

TEST_CASE("config text parsing") {
  WorkloadConfig config = parse_config_text(
      "benchmark = smallbank\n"
      "sessions = 4\n"
      "duration_ops = 500\n"
      "skew = 0.9\n"
      "level_mode = rc\n"
      "cc_enabled = true\n"
      "template_mix = balance:60,write_check:40\n"
      "# comment line\n"
      "seed = 7\n");
  CHECK(config.benchmark == "smallbank");
  CHECK(config.sessions == 4);
  CHECK(config.fixed_level == IsolationLevel::RC);
  CHECK_FALSE(config.adaptive);
  CHECK(config.template_mix.at("balance") == 60);
  config.validate();

  CHECK_THROWS_AS(parse_config_text("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("sessions\n"), ConfigError);
  WorkloadConfig bad_mix = parse_config_text("template_mix = balance:10\n");
  CHECK_THROWS_AS(bad_mix.validate(), ConfigError);
}

TEST_CASE("single-session runs are bit-for-bit reproducible") {
  WorkloadConfig config;
  config.benchmark = "smallbank";
  config.sessions = 1;
  config.duration_ops = 60;
  config.accounts = 10;
  config.skew = 0.9;
  config.seed = 12;
  config.fixed_level = IsolationLevel::RC;

  auto serialize_all = [](const std::vector<HistoryRecord>& history) {
    std::string out;
    for (const HistoryRecord& rec : history) out += serialize_history_record(rec) + "\n";
    return out;
  };
  RunResult a = run_workload(config);
  RunResult b = run_workload(config);
  CHECK(serialize_all(a.history) == serialize_all(b.history));
  CHECK(check_serializable(build_dsg(a.history)).serializable);
}

TEST_CASE("metrics accounting identity holds") {
  WorkloadConfig config;
  config.benchmark = "smallbank";
  config.sessions = 6;
  config.duration_ops = 300;
  config.accounts = 12;
  config.skew = 1.0;
  config.seed = 3;
  config.fixed_level = IsolationLevel::SI;
  config.retry_budget = 2;

  RunResult result = run_workload(config);
  CHECK(result.metrics.committed + result.metrics.terminal_aborts() == config.duration_ops);
  uint64_t level_total = 0;
  for (const auto& [level, count] : result.metrics.per_level) level_total += count;
  CHECK(level_total == config.duration_ops);

  std::string json = metrics_to_json(result.metrics);
  CHECK(json.find("\"committed\"") != std::string::npos);
}

TEST_CASE("amalgamate-only mixes conserve total funds") {
  for (IsolationLevel level : {IsolationLevel::RC, IsolationLevel::SI, IsolationLevel::SER}) {
    WorkloadConfig config;
    config.benchmark = "smallbank";
    config.sessions = 6;
    config.duration_ops = 250;
    config.accounts = 16;
    config.skew = 0.9;
    config.seed = 21;
    config.fixed_level = level;
    config.template_mix = {{"amalgamate", 70}, {"balance", 30}};

    RunResult result = run_workload(config);
    REQUIRE(result.total_balance.has_value());
    CHECK(*result.total_balance ==
          static_cast<int64_t>(config.accounts) * 2 * config.initial_balance);
    CHECK(check_serializable(build_dsg(result.history)).serializable);
  }
}

TEST_CASE("ycsb runs stay serializable with the middle tier on") {
  for (IsolationLevel level : {IsolationLevel::RC, IsolationLevel::SI}) {
    WorkloadConfig config;
    config.benchmark = "ycsb";
    config.sessions = 6;
    config.duration_ops = 150;
    config.keys = 50;
    config.skew = 0.9;
    config.write_pct = 30;
    config.ops_per_txn = 6;
    config.seed = 8;
    config.fixed_level = level;
    RunResult result = run_workload(config);
    CHECK(check_serializable(build_dsg(result.history)).serializable);
  }
}

TEST_CASE("write skew scenario outcomes") {
  ScenarioResult si = scenario_write_skew(IsolationLevel::SI);
  CHECK(si.lines[0] == "T1 committed");
  CHECK(si.lines[1] == "T2 committed");
  CHECK_FALSE(si.serializable);  // SI admits write skew

  ScenarioResult ser = scenario_write_skew(IsolationLevel::SER);
  CHECK(ser.lines[0] == "T1 committed");
  CHECK(ser.lines[1] == "T2 aborted (engine_ssi)");
  CHECK(ser.serializable);
}

TEST_CASE("example 1 interleaving cycles without the middle tier and not with it") {
  ScenarioResult off = scenario_example1(false);
  CHECK_FALSE(off.serializable);

  ScenarioResult on = scenario_example1(true);
  CHECK(on.serializable);
  CHECK(on.lines[2] == "T_wc aborted (version_mismatch)");
}

TEST_CASE("transaction-processing figure: both commit, dependency order preserved") {
  ScenarioResult result = scenario_fig_processing();
  CHECK(result.serializable);
  CHECK(result.lines[0] == "T_wc committed");
  CHECK(result.lines[1] == "T_ts committed");
  // write_check committed first: its record appears before transact_savings'.
  uint64_t wc_end = 0, ts_end = 0;
  for (const HistoryRecord& rec : result.history) {
    if (rec.template_name == "write_check") wc_end = rec.end_seq;
    if (rec.template_name == "transact_savings") ts_end = rec.end_seq;
  }
  CHECK(wc_end < ts_end);
}

TEST_CASE("cross-isolation switch scenario") {
  ScenarioResult civ_on = scenario_example3(true);
  CHECK(civ_on.serializable);
  bool t1_aborted = false;
  for (const std::string& line : civ_on.lines)
    if (line == "T1 aborted (civ_version_mismatch)") t1_aborted = true;
  CHECK(t1_aborted);

  ScenarioResult civ_off = scenario_example3(false);
  CHECK_FALSE(civ_off.serializable);
  bool t1_committed = false;
  for (const std::string& line : civ_off.lines)
    if (line == "T1 committed") t1_committed = true;
  CHECK(t1_committed);

  ScenarioResult quiet = scenario_example3(true, false);
  CHECK(quiet.serializable);
  for (size_t i = 0; i + 1 < quiet.lines.size(); ++i)
    CHECK(quiet.lines[i].find("committed") != std::string::npos);
}

TEST_CASE("adaptive phase shift triggers at least one transition") {
  WorkloadConfig config;
  config.benchmark = "ycsb";
  config.sessions = 4;
  config.duration_ops = 600;
  config.keys = 400;
  config.skew = 0.9;
  config.write_pct = 10;
  config.phase_shift_write_pct = 60;
  config.ops_per_txn = 8;
  config.seed = 4;
  config.adaptive = true;
  config.fixed_level = IsolationLevel::SI;
  config.adapt_every = 64;
  config.batch_size = 64;

  RunResult result = run_workload(config);
  CHECK(result.metrics.transitions_requested >= 1);
  CHECK(result.metrics.transitions_completed >= 1);
  CHECK(check_serializable(build_dsg(result.history)).serializable);
}
