#include "bench/workload.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adapter/adapter.hpp"

namespace sertier {
namespace bench {

void WorkloadConfig::validate() const {
  if (benchmark != "smallbank" && benchmark != "ycsb")
    throw ConfigError("unknown benchmark: " + benchmark);
  if (sessions < 1) throw ConfigError("sessions must be >= 1");
  if (duration_ops < 1) throw ConfigError("duration_ops must be >= 1");
  if (skew < 0) throw ConfigError("skew must be >= 0");
  if (write_pct > 100) throw ConfigError("write_pct must be <= 100");
  if (phase_shift_write_pct > 100) throw ConfigError("phase_shift_write_pct must be <= 100");
  if (ops_per_txn < 1) throw ConfigError("ops_per_txn must be >= 1");
  if (benchmark == "smallbank" && accounts < 2) throw ConfigError("accounts must be >= 2");
  if (benchmark == "ycsb" && keys < 1) throw ConfigError("keys must be >= 1");
  if (!template_mix.empty()) {
    uint32_t sum = 0;
    for (const auto& [name, weight] : template_mix) sum += weight;
    if (sum != 100) throw ConfigError("template_mix weights must sum to 100");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (adapt_every < 1) throw ConfigError("adapt_every must be >= 1");
}

uint64_t RunMetrics::terminal_aborts() const {
  uint64_t n = 0;
  for (const auto& [reason, count] : aborted_by_reason) n += count;
  return n;
}

TemplateRegistry smallbank_templates() {
  TemplateRegistry registry;
  registry.register_template({"amalgamate",
                              2,
                              {{AccessMode::Read, "checking", 0},
                               {AccessMode::Read, "savings", 0},
                               {AccessMode::Read, "checking", 1},
                               {AccessMode::Write, "checking", 0},
                               {AccessMode::Write, "savings", 0},
                               {AccessMode::Write, "checking", 1}}});
  registry.register_template(
      {"balance", 1, {{AccessMode::Read, "checking", 0}, {AccessMode::Read, "savings", 0}}});
  registry.register_template(
      {"deposit_checking", 1, {{AccessMode::Read, "checking", 0}, {AccessMode::Write, "checking", 0}}});
  registry.register_template(
      {"transact_savings", 1, {{AccessMode::Read, "savings", 0}, {AccessMode::Write, "savings", 0}}});
  registry.register_template({"write_check",
                              1,
                              {{AccessMode::Read, "checking", 0},
                               {AccessMode::Read, "savings", 0},
                               {AccessMode::Write, "checking", 0}}});
  return registry;
}

TransactionTemplate ycsb_template(const std::string& name, uint32_t ops_per_txn,
                                  uint32_t write_pct) {
  if (write_pct > 100) throw ConfigError("write_pct must be <= 100");
  uint32_t writes = static_cast<uint32_t>(
      std::lround(static_cast<double>(ops_per_txn) * write_pct / 100.0));
  writes = std::min(writes, ops_per_txn);
  TransactionTemplate tpl;
  tpl.name = name;
  tpl.arity = ops_per_txn;
  for (uint32_t i = 0; i < ops_per_txn; ++i) {
    AccessMode mode = i < ops_per_txn - writes ? AccessMode::Read : AccessMode::Write;
    tpl.steps.push_back({mode, "usertable", i});
  }
  return tpl;
}

ZipfGenerator::ZipfGenerator(uint64_t n, double exponent) : n_(n), exponent_(exponent) {
  if (n == 0) throw ConfigError("zipf domain must be non-empty");
  h_x1_ = h_integral(1.5) - 1.0;
  h_n_ = h_integral(static_cast<double>(n) + 0.5);
  s_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfGenerator::h_integral(double x) const {
  double log_x = std::log(x);
  if (std::abs(exponent_ - 1.0) < 1e-12) return log_x;
  return std::expm1((1.0 - exponent_) * log_x) / (1.0 - exponent_);
}

double ZipfGenerator::h(double x) const { return std::exp(-exponent_ * std::log(x)); }

double ZipfGenerator::h_integral_inverse(double x) const {
  if (std::abs(exponent_ - 1.0) < 1e-12) return std::exp(x);
  double t = x * (1.0 - exponent_);
  if (t < -1.0) t = -1.0;
  return std::exp(std::log1p(t) / (1.0 - exponent_));
}

uint64_t ZipfGenerator::next(std::mt19937_64& rng) const {
  if (n_ == 1) return 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (true) {
    double u = h_n_ + unit(rng) * (h_x1_ - h_n_);
    double x = h_integral_inverse(u);
    uint64_t k = static_cast<uint64_t>(x + 0.5);
    if (k < 1) k = 1;
    if (k > n_) k = n_;
    if (static_cast<double>(k) - x <= s_ || u >= h_integral(static_cast<double>(k) + 0.5) - h(static_cast<double>(k))) {
      return k - 1;
    }
  }
}

namespace {

struct LogicalTxn {
  std::string template_name;
  std::vector<uint64_t> args;
  std::vector<int64_t> amounts;  // per-template meaning
};

// Runs one attempt; the transaction is finished (committed or aborted) on
// return.
TxnOutcome run_attempt(Coordinator& coord, const LogicalTxn& work, uint32_t think_ticks,
                       std::string* abort_reason_out, uint64_t* wait_ticks_out,
                       IsolationLevel* level_out) {
  auto txn = coord.begin(work.template_name);
  if (level_out) *level_out = txn->level;
  auto think = [&] {
    for (uint32_t i = 0; i < think_ticks; ++i) coord.clock().tick();
    std::this_thread::yield();  // give concurrent sessions a turn between statements
  };

  auto fail = [&](std::string* reason) {
    if (reason && txn->abort_reason) *reason = *txn->abort_reason;
    if (wait_ticks_out) *wait_ticks_out = txn->wait_ticks;
    return TxnOutcome::Aborted;
  };

  const std::string& name = work.template_name;
  StepResult r;
  auto step = [&](size_t idx, std::optional<int64_t> value = std::nullopt) {
    r = coord.execute_step(*txn, idx, work.args, value);
    think();
    return r.ok;
  };

  bool ok = true;
  if (name == "amalgamate") {
    int64_t c1 = 0, s1 = 0, c2 = 0;
    ok = ok && step(0) && (c1 = r.value, true);
    ok = ok && step(1) && (s1 = r.value, true);
    ok = ok && step(2) && (c2 = r.value, true);
    ok = ok && step(3, 0);
    ok = ok && step(4, 0);
    ok = ok && step(5, c2 + c1 + s1);
  } else if (name == "balance") {
    ok = ok && step(0) && step(1);
  } else if (name == "deposit_checking") {
    int64_t c = 0;
    ok = ok && step(0) && (c = r.value, true);
    ok = ok && step(1, c + work.amounts[0]);
  } else if (name == "transact_savings") {
    int64_t s = 0;
    ok = ok && step(0) && (s = r.value, true);
    ok = ok && step(1, s + work.amounts[0]);
  } else if (name == "write_check") {
    int64_t c = 0, s = 0;
    ok = ok && step(0) && (c = r.value, true);
    ok = ok && step(1) && (s = r.value, true);
    int64_t amount = work.amounts[0];
    int64_t penalty = (c + s) < amount ? 1 : 0;
    ok = ok && step(2, c - amount - penalty);
  } else {
    // ycsb-style: reads first, then writes with sampled values
    const TransactionTemplate& tpl = *coord.registry().find(name);
    size_t write_idx = 0;
    for (size_t i = 0; i < tpl.steps.size() && ok; ++i) {
      if (tpl.steps[i].mode == AccessMode::Read) {
        ok = step(i);
      } else {
        ok = step(i, work.amounts[write_idx++ % work.amounts.size()]);
      }
    }
  }

  if (!ok) return fail(abort_reason_out);
  TxnOutcome outcome = coord.commit(*txn);
  if (wait_ticks_out) *wait_ticks_out = txn->wait_ticks;
  if (outcome == TxnOutcome::Aborted && abort_reason_out && txn->abort_reason)
    *abort_reason_out = *txn->abort_reason;
  return outcome;
}

const char* wait_bucket(uint64_t ticks) {
  if (ticks == 0) return "0";
  if (ticks <= 10) return "1-10";
  if (ticks <= 100) return "11-100";
  if (ticks <= 1000) return "101-1000";
  return ">1000";
}

struct AdapterState {
  std::mutex mu;
  size_t cursor = 0;
  uint64_t next_trigger = 0;
  std::optional<PredictorWeights> weights;
  HeuristicThresholds thresholds;
  std::vector<std::string> relations;
};

void adapter_step(Coordinator& coord, AdapterState& state, const WorkloadConfig& config) {
  std::lock_guard<std::mutex> lock(state.mu);
  auto all = coord.history().snapshot();
  if (all.size() <= state.cursor) return;
  std::vector<HistoryRecord> fresh(all.begin() + static_cast<long>(state.cursor), all.end());
  state.cursor = all.size();

  auto batch = sample_batch(fresh, config.batch_size, config.seed ^ all.size());
  if (batch.empty()) return;
  WorkloadGraph g = build_workload_graph(batch, state.relations);
  IsolationLevel current = coord.governor().steady_level();
  Prediction p;
  if (state.weights) {
    p = forward(g, *state.weights, current);
  } else {
    p = heuristic_predict(workload_stats(batch, g), state.thresholds);
  }
  if (p.chosen != current && coord.governor().state().mode == TransitionMode::Steady) {
    coord.request_transition(p.chosen);
  }
}

}  // namespace

RunResult run_workload(const WorkloadConfig& config) {
  config.validate();

  CoordinatorConfig cc;
  cc.initial_level = config.fixed_level;
  cc.vlt_buckets = config.vlt_buckets;
  cc.lease_ticks = config.lease_ticks;
  cc.gc_period_ticks = config.gc_period_ticks;
  cc.retry_budget = config.retry_budget;
  cc.cc_enabled = config.cc_enabled;
  cc.civ_enabled = config.civ_enabled;
  cc.civ_recheck = config.civ_recheck;
  cc.background_gc = config.background_gc;
  Coordinator coord(cc);

  const bool phase_shift = config.benchmark == "ycsb" && config.phase_shift_write_pct > 0;
  if (config.benchmark == "smallbank") {
    TemplateRegistry bank = smallbank_templates();
    for (const TransactionTemplate& tpl : bank.all()) coord.register_template(tpl);
    for (uint64_t i = 0; i < config.accounts; ++i) {
      coord.load_key({"checking", i}, config.initial_balance);
      coord.load_key({"savings", i}, config.initial_balance);
    }
  } else {
    coord.register_template(ycsb_template("ycsb_a", config.ops_per_txn, config.write_pct));
    if (phase_shift)
      coord.register_template(
          ycsb_template("ycsb_b", config.ops_per_txn, config.phase_shift_write_pct));
    for (uint64_t i = 0; i < config.keys; ++i) coord.load_key({"usertable", i}, 0);
  }
  coord.analysis();

  std::vector<std::pair<std::string, uint32_t>> mix;
  if (config.benchmark == "smallbank") {
    std::map<std::string, uint32_t> weights = config.template_mix;
    if (weights.empty()) {
      weights = {{"amalgamate", 20},
                 {"balance", 20},
                 {"deposit_checking", 20},
                 {"transact_savings", 20},
                 {"write_check", 20}};
    }
    for (const auto& [name, weight] : weights) {
      if (!coord.registry().find(name)) throw ConfigError("unknown template in mix: " + name);
      if (weight > 0) mix.push_back({name, weight});
    }
  }

  AdapterState adapter;
  if (config.adaptive) {
    if (!config.weights_path.empty()) adapter.weights = load_weights(config.weights_path);
    if (config.benchmark == "smallbank") {
      adapter.relations = {"checking", "savings"};
    } else {
      adapter.relations = {"usertable"};
    }
  }
  std::atomic<uint64_t> adapt_pending{0};
  if (config.adaptive) {
    adapter.next_trigger = config.adapt_every;
    coord.history().set_append_hook([&](size_t count) {
      if (count >= adapter.next_trigger) {
        adapter.next_trigger += config.adapt_every;
        adapt_pending.fetch_add(1);
      }
    });
  }

  RunMetrics metrics;
  std::mutex metrics_mu;
  std::atomic<uint64_t> next_logical{0};
  std::atomic<uint64_t> progress{0};
  std::atomic<bool> done{false};

  auto worker = [&](uint32_t session) {
    std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ull + session + 1);
    ZipfGenerator zipf(config.benchmark == "smallbank" ? config.accounts : config.keys,
                       config.skew);
    std::uniform_int_distribution<int64_t> amount_dist(1, 20);
    std::uniform_int_distribution<uint32_t> pct(0, 99);

    while (true) {
      uint64_t idx = next_logical.fetch_add(1);
      if (idx >= config.duration_ops) break;
      if (config.mid_run_transition && idx == config.duration_ops / 2)
        coord.request_transition(*config.mid_run_transition);

      LogicalTxn work;
      if (config.benchmark == "smallbank") {
        uint32_t roll = pct(rng);
        uint32_t acc = 0;
        for (const auto& [name, weight] : mix) {
          acc += weight;
          if (roll < acc) {
            work.template_name = name;
            break;
          }
        }
        if (work.template_name == "amalgamate") {
          uint64_t a = zipf.next(rng);
          uint64_t b = zipf.next(rng);
          while (b == a) b = zipf.next(rng);
          work.args = {a, b};
        } else {
          work.args = {zipf.next(rng)};
        }
        work.amounts = {amount_dist(rng)};
      } else {
        work.template_name =
            phase_shift && idx >= config.duration_ops / 2 ? "ycsb_b" : "ycsb_a";
        const TransactionTemplate& tpl = *coord.registry().find(work.template_name);
        for (uint32_t p = 0; p < tpl.arity; ++p) work.args.push_back(zipf.next(rng));
        for (uint32_t p = 0; p < tpl.arity; ++p) work.amounts.push_back(amount_dist(rng));
      }

      std::string reason;
      uint64_t waited = 0;
      IsolationLevel level = config.fixed_level;
      TxnOutcome outcome = TxnOutcome::Aborted;
      uint64_t attempt = 0;
      while (true) {
        reason.clear();
        outcome = run_attempt(coord, work, config.think_ticks, &reason, &waited, &level);
        {
          std::lock_guard<std::mutex> lock(metrics_mu);
          ++metrics.wait_ticks_histogram[wait_bucket(waited)];
        }
        if (outcome == TxnOutcome::Committed || reason == abort_reason::kUser ||
            attempt >= config.retry_budget)
          break;
        ++attempt;
        std::lock_guard<std::mutex> lock(metrics_mu);
        ++metrics.retries;
      }

      {
        std::lock_guard<std::mutex> lock(metrics_mu);
        if (outcome == TxnOutcome::Committed) {
          ++metrics.committed;
        } else {
          ++metrics.aborted_by_reason[reason.empty() ? "user" : reason];
        }
        ++metrics.per_level[to_string(level)];
      }
      progress.fetch_add(1);

      if (config.adaptive && adapt_pending.load() > 0) {
        uint64_t expected = adapt_pending.load();
        while (expected > 0 && !adapt_pending.compare_exchange_weak(expected, expected - 1)) {
        }
        if (expected > 0) adapter_step(coord, adapter, config);
      }
    }
  };

  std::thread watchdog([&] {
    uint64_t last_progress = 0;
    auto last_change = std::chrono::steady_clock::now();
    while (!done.load(std::memory_order_relaxed)) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      uint64_t now_progress = progress.load();
      auto now = std::chrono::steady_clock::now();
      if (now_progress != last_progress) {
        last_progress = now_progress;
        last_change = now;
      } else if (now - last_change > std::chrono::milliseconds(config.watchdog_stall_ms)) {
        std::lock_guard<std::mutex> lock(metrics_mu);
        ++metrics.watchdog_stalls;
        last_change = now;
      }
    }
  });

  std::vector<std::thread> threads;
  threads.reserve(config.sessions);
  for (uint32_t s = 0; s < config.sessions; ++s) threads.emplace_back(worker, s);
  for (std::thread& t : threads) t.join();
  done.store(true);
  watchdog.join();

  coord.history().set_append_hook(nullptr);
  coord.engine().check_chain_invariants();

  RunResult result;
  result.metrics = std::move(metrics);
  result.metrics.transitions_requested = coord.governor().transitions_requested();
  result.metrics.transitions_completed = coord.governor().transitions_completed();
  result.history = coord.history().snapshot();
  if (config.benchmark == "smallbank") {
    int64_t total = 0;
    for (uint64_t i = 0; i < config.accounts; ++i) {
      total += coord.engine().latest_value({"checking", i});
      total += coord.engine().latest_value({"savings", i});
    }
    result.total_balance = total;
  }
  return result;
}

std::string metrics_to_json(const RunMetrics& metrics) {
  nlohmann::ordered_json doc;
  doc["committed"] = metrics.committed;
  doc["aborted"] = nlohmann::ordered_json::object();
  for (const auto& [reason, count] : metrics.aborted_by_reason) doc["aborted"][reason] = count;
  doc["retries"] = metrics.retries;
  doc["per_level"] = nlohmann::ordered_json::object();
  for (const auto& [level, count] : metrics.per_level) doc["per_level"][level] = count;
  doc["transitions_requested"] = metrics.transitions_requested;
  doc["transitions_completed"] = metrics.transitions_completed;
  doc["validation_wait_ticks"] = nlohmann::ordered_json::object();
  for (const auto& [bucket, count] : metrics.wait_ticks_histogram)
    doc["validation_wait_ticks"][bucket] = count;
  doc["watchdog_stalls"] = metrics.watchdog_stalls;
  return doc.dump(2);
}

WorkloadConfig parse_config_text(const std::string& text) {
  WorkloadConfig config;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    auto as_u64 = [&] { return std::stoull(value); };
    auto as_bool = [&] {
      if (value == "true" || value == "1" || value == "on") return true;
      if (value == "false" || value == "0" || value == "off") return false;
      throw ConfigError("config key " + key + " expects a boolean, got '" + value + "'");
    };

    try {
      if (key == "benchmark") {
        config.benchmark = value;
      } else if (key == "sessions") {
        config.sessions = static_cast<uint32_t>(as_u64());
      } else if (key == "duration_ops") {
        config.duration_ops = as_u64();
      } else if (key == "skew") {
        config.skew = std::stod(value);
      } else if (key == "write_pct") {
        config.write_pct = static_cast<uint32_t>(as_u64());
      } else if (key == "ops_per_txn") {
        config.ops_per_txn = static_cast<uint32_t>(as_u64());
      } else if (key == "template_mix") {
        config.template_mix.clear();
        std::istringstream items(value);
        std::string item;
        while (std::getline(items, item, ',')) {
          auto colon = item.find(':');
          if (colon == std::string::npos)
            throw ConfigError("template_mix entries look like name:weight");
          config.template_mix[item.substr(0, colon)] =
              static_cast<uint32_t>(std::stoul(item.substr(colon + 1)));
        }
      } else if (key == "seed") {
        config.seed = as_u64();
      } else if (key == "level_mode") {
        if (value == "adaptive") {
          config.adaptive = true;
        } else {
          auto lvl = isolation_from_string(value);
          if (!lvl) throw ConfigError("level_mode expects rc|si|ser|adaptive");
          config.adaptive = false;
          config.fixed_level = *lvl;
        }
      } else if (key == "initial_level") {
        auto lvl = isolation_from_string(value);
        if (!lvl) throw ConfigError("initial_level expects rc|si|ser");
        config.fixed_level = *lvl;
      } else if (key == "cc_enabled") {
        config.cc_enabled = as_bool();
      } else if (key == "civ_enabled") {
        config.civ_enabled = as_bool();
      } else if (key == "civ_recheck") {
        config.civ_recheck = as_bool();
      } else if (key == "accounts") {
        config.accounts = as_u64();
      } else if (key == "keys") {
        config.keys = as_u64();
      } else if (key == "initial_balance") {
        config.initial_balance = std::stoll(value);
      } else if (key == "think_ticks") {
        config.think_ticks = static_cast<uint32_t>(as_u64());
      } else if (key == "retry_budget") {
        config.retry_budget = static_cast<uint32_t>(as_u64());
      } else if (key == "adapt_every") {
        config.adapt_every = static_cast<uint32_t>(as_u64());
      } else if (key == "batch_size") {
        config.batch_size = static_cast<uint32_t>(as_u64());
      } else if (key == "weights") {
        config.weights_path = value;
      } else if (key == "phase_shift_write_pct") {
        config.phase_shift_write_pct = static_cast<uint32_t>(as_u64());
      } else if (key == "transition_to") {
        auto lvl = isolation_from_string(value);
        if (!lvl) throw ConfigError("transition_to expects rc|si|ser");
        config.mid_run_transition = *lvl;
      } else if (key == "vlt_buckets") {
        config.vlt_buckets = as_u64();
      } else if (key == "lease_ticks") {
        config.lease_ticks = as_u64();
      } else if (key == "gc_period_ticks") {
        config.gc_period_ticks = as_u64();
      } else if (key == "background_gc") {
        config.background_gc = as_bool();
      } else if (key == "watchdog_stall_ms") {
        config.watchdog_stall_ms = as_u64();
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad value for config key " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("value out of range for config key " + key);
    }
  }
  return config;
}

WorkloadConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace bench
}  // namespace sertier
