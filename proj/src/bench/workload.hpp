#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "executor/executor.hpp"

namespace sertier {
namespace bench {

struct WorkloadConfig {
  std::string benchmark = "smallbank";  // smallbank | ycsb
  uint32_t sessions = 8;
  uint64_t duration_ops = 1000;  // total transactions across sessions
  double skew = 0.7;             // Zipfian exponent
  uint32_t write_pct = 10;       // ycsb
  uint32_t ops_per_txn = 10;     // ycsb
  std::map<std::string, uint32_t> template_mix;  // smallbank; weights sum to 100
  uint64_t seed = 0;

  bool adaptive = false;
  IsolationLevel fixed_level = IsolationLevel::SI;
  bool cc_enabled = true;
  bool civ_enabled = true;
  bool civ_recheck = true;

  uint64_t accounts = 40000;  // smallbank
  uint64_t keys = 100000;     // ycsb
  int64_t initial_balance = 100;
  uint32_t think_ticks = 0;
  uint32_t retry_budget = 10;

  uint32_t adapt_every = 256;  // history records between adapter steps
  uint32_t batch_size = 256;
  std::string weights_path;               // adaptive: empty -> heuristic
  uint32_t phase_shift_write_pct = 0;     // ycsb: second-half write_pct, 0 = none
  std::optional<IsolationLevel> mid_run_transition;  // fire a switch halfway through

  size_t vlt_buckets = 4096;
  uint64_t lease_ticks = 1000;
  uint64_t gc_period_ticks = 10000;
  bool background_gc = false;
  uint64_t watchdog_stall_ms = 10000;

  void validate() const;  // throws ConfigError
};

struct RunMetrics {
  uint64_t committed = 0;
  std::map<std::string, uint64_t> aborted_by_reason;  // terminal aborts
  uint64_t retries = 0;
  std::map<std::string, uint64_t> per_level;
  uint64_t transitions_requested = 0;
  uint64_t transitions_completed = 0;
  std::map<std::string, uint64_t> wait_ticks_histogram;
  uint64_t watchdog_stalls = 0;

  uint64_t terminal_aborts() const;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<HistoryRecord> history;
  // SmallBank only: sum of every checking and savings balance after the run.
  std::optional<int64_t> total_balance;
};

// The five SmallBank templates. Reads feeding an update of the same account
// stay attached to that update, read-only lookups are separate steps.
TemplateRegistry smallbank_templates();

// One fixed-shape template over usertable: reads first, then writes, with
// round(ops * write_pct / 100) writes. The key sampler supplies parameters.
TransactionTemplate ycsb_template(const std::string& name, uint32_t ops_per_txn,
                                  uint32_t write_pct);

// Zipfian sampler over [0, n) via rejection inversion; exponent 0 is uniform.
class ZipfGenerator {
 public:
  ZipfGenerator(uint64_t n, double exponent);
  uint64_t next(std::mt19937_64& rng) const;

 private:
  double h_integral(double x) const;
  double h(double x) const;
  double h_integral_inverse(double x) const;

  uint64_t n_;
  double exponent_;
  double h_x1_, h_n_, s_;
};

RunResult run_workload(const WorkloadConfig& config);

std::string metrics_to_json(const RunMetrics& metrics);

WorkloadConfig parse_config_text(const std::string& text);
WorkloadConfig load_config_file(const std::string& path);

// --- deterministic scenario scripts ---

struct ScenarioResult {
  std::vector<HistoryRecord> history;
  std::vector<std::string> lines;  // human-readable outcome lines
  bool serializable = true;
};

// Two snapshot transactions with disjoint writes over each other's reads.
ScenarioResult scenario_write_skew(IsolationLevel level);

// The three-transaction SmallBank interleaving (balance / write_check /
// transact_savings) that closes a cycle at RC when the middle tier is off.
ScenarioResult scenario_example1(bool cc_enabled);

// write_check and transact_savings on one savings key under SI; both commit
// and the commit order follows the read-write dependency.
ScenarioResult scenario_fig_processing();

// Three transactions across a SER -> RC switch fired mid-script. With civ the
// in-flight SER transaction aborts; with naive switching it commits and the
// history has a cycle. Without the switch the script runs sequentially.
ScenarioResult scenario_example3(bool civ_enabled, bool fire_transition = true);

}  // namespace bench
}  // namespace sertier
