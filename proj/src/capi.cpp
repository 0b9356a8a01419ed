#include "sertier.h"

#include <cstring>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "adapter/adapter.hpp"
#include "analyzer/analyzer.hpp"
#include "bench/workload.hpp"
#include "core/history.hpp"
#include "executor/executor.hpp"
#include "oracle/oracle.hpp"

using namespace sertier;

struct sertier_coord {
  std::unique_ptr<Coordinator> impl;
};

struct sertier_txn {
  sertier_coord* coord = nullptr;
  std::unique_ptr<RuntimeTransaction> impl;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
sertier_status guard(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return SERTIER_ERR_CONFIG;
  } catch (const MalformedRecord& e) {
    g_last_error = e.what();
    return SERTIER_ERR_IO;
  } catch (const Error& e) {
    g_last_error = e.what();
    return SERTIER_ERR_STATE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SERTIER_ERR_INTERNAL;
  }
}

IsolationLevel parse_level_or_throw(const char* level) {
  if (!level) throw ConfigError("isolation level is required");
  auto parsed = isolation_from_string(level);
  if (!parsed) throw ConfigError(std::string("unknown isolation level: ") + level);
  return *parsed;
}

}  // namespace

extern "C" {

const char* sertier_last_error(void) { return g_last_error.c_str(); }

void sertier_string_free(char* s) { std::free(s); }

sertier_status sertier_coord_create(const char* config_json, sertier_coord** out) {
  return guard([&]() -> sertier_status {
    if (!out) throw ConfigError("out parameter is null");
    CoordinatorConfig config;
    if (config_json && *config_json) {
      nlohmann::json doc = nlohmann::json::parse(config_json, nullptr, false);
      if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
      if (doc.contains("initial_level"))
        config.initial_level = parse_level_or_throw(doc["initial_level"].get<std::string>().c_str());
      if (doc.contains("cc_enabled")) config.cc_enabled = doc["cc_enabled"].get<bool>();
      if (doc.contains("civ_enabled")) config.civ_enabled = doc["civ_enabled"].get<bool>();
      if (doc.contains("civ_recheck")) config.civ_recheck = doc["civ_recheck"].get<bool>();
      if (doc.contains("vlt_buckets")) config.vlt_buckets = doc["vlt_buckets"].get<size_t>();
      if (doc.contains("lease_ticks")) config.lease_ticks = doc["lease_ticks"].get<uint64_t>();
      if (doc.contains("gc_period_ticks"))
        config.gc_period_ticks = doc["gc_period_ticks"].get<uint64_t>();
      if (doc.contains("retry_budget")) config.retry_budget = doc["retry_budget"].get<uint32_t>();
      if (doc.contains("background_gc")) config.background_gc = doc["background_gc"].get<bool>();
    }
    auto coord = new sertier_coord{std::make_unique<Coordinator>(config)};
    *out = coord;
    return SERTIER_OK;
  });
}

void sertier_coord_destroy(sertier_coord* coord) { delete coord; }

sertier_status sertier_register(sertier_coord* coord, const char* template_json, int32_t* out_id) {
  return guard([&]() -> sertier_status {
    if (!coord || !template_json) throw ConfigError("null argument");
    std::string wrapped = std::string("[") + template_json + "]";
    TemplateRegistry parsed = parse_registry_json(wrapped);
    uint32_t id = coord->impl->register_template(parsed.at(0));
    if (out_id) *out_id = static_cast<int32_t>(id);
    return SERTIER_OK;
  });
}

sertier_status sertier_analysis(sertier_coord* coord) {
  return guard([&]() -> sertier_status {
    if (!coord) throw ConfigError("null coordinator");
    coord->impl->analysis();
    return SERTIER_OK;
  });
}

sertier_status sertier_load_key(sertier_coord* coord, const char* relation, uint64_t id,
                                int64_t value) {
  return guard([&]() -> sertier_status {
    if (!coord || !relation) throw ConfigError("null argument");
    coord->impl->load_key({relation, id}, value);
    return SERTIER_OK;
  });
}

sertier_status sertier_begin(sertier_coord* coord, const char* template_name, sertier_txn** out) {
  return guard([&]() -> sertier_status {
    if (!coord || !template_name || !out) throw ConfigError("null argument");
    auto txn = new sertier_txn;
    txn->coord = coord;
    txn->impl = coord->impl->begin(template_name);
    *out = txn;
    return SERTIER_OK;
  });
}

sertier_status sertier_execute(sertier_txn* txn, size_t step_index, const uint64_t* args,
                               size_t nargs, const int64_t* write_value, int64_t* out_value) {
  return guard([&]() -> sertier_status {
    if (!txn) throw ConfigError("null transaction");
    std::vector<uint64_t> argv(args, args + nargs);
    std::optional<int64_t> value;
    if (write_value) value = *write_value;
    StepResult r = txn->coord->impl->execute_step(*txn->impl, step_index, argv, value);
    if (!r.ok) return SERTIER_ABORTED;
    if (out_value) *out_value = r.value;
    return SERTIER_OK;
  });
}

sertier_status sertier_commit(sertier_txn* txn) {
  return guard([&]() -> sertier_status {
    if (!txn) throw ConfigError("null transaction");
    TxnOutcome outcome = txn->coord->impl->commit(*txn->impl);
    return outcome == TxnOutcome::Committed ? SERTIER_OK : SERTIER_ABORTED;
  });
}

sertier_status sertier_rollback(sertier_txn* txn) {
  return guard([&]() -> sertier_status {
    if (!txn) throw ConfigError("null transaction");
    txn->coord->impl->rollback(*txn->impl);
    return SERTIER_OK;
  });
}

const char* sertier_txn_abort_reason(sertier_txn* txn) {
  if (!txn || !txn->impl->abort_reason) return nullptr;
  return txn->impl->abort_reason->c_str();
}

uint64_t sertier_txn_id(sertier_txn* txn) { return txn ? txn->impl->id : 0; }

void sertier_txn_close(sertier_txn* txn) { delete txn; }

sertier_status sertier_request_transition(sertier_coord* coord, const char* level) {
  return guard([&]() -> sertier_status {
    if (!coord) throw ConfigError("null coordinator");
    bool accepted = coord->impl->request_transition(parse_level_or_throw(level));
    return accepted ? SERTIER_OK : SERTIER_REJECTED;
  });
}

sertier_status sertier_history_json(sertier_coord* coord, char** out_jsonl) {
  return guard([&]() -> sertier_status {
    if (!coord || !out_jsonl) throw ConfigError("null argument");
    std::string out;
    for (const HistoryRecord& rec : coord->impl->history().snapshot()) {
      out += serialize_history_record(rec);
      out += '\n';
    }
    *out_jsonl = dup_string(out);
    return SERTIER_OK;
  });
}

sertier_status sertier_dump_engine(sertier_coord* coord, char** out_text) {
  return guard([&]() -> sertier_status {
    if (!coord || !out_text) throw ConfigError("null argument");
    *out_text = dup_string(coord->impl->engine().dump_chains());
    return SERTIER_OK;
  });
}

sertier_status sertier_analyze_templates(const char* templates_json, const char* level,
                                         char** out_report_json, char** out_dot) {
  return guard([&]() -> sertier_status {
    if (!templates_json || !out_report_json) throw ConfigError("null argument");
    IsolationLevel lvl = parse_level_or_throw(level);
    if (lvl == IsolationLevel::SER) throw ConfigError("analysis levels are rc and si");
    TemplateRegistry registry = parse_registry_json(templates_json);
    StaticDependencyGraph graph = build_static_graph(registry);
    auto structures = find_dangerous_structures(graph, lvl);
    VulnerableDependencySet vulnerable = find_vulnerable_dependencies(graph, lvl);

    nlohmann::ordered_json doc;
    doc["level"] = to_string(lvl);
    doc["vertices"] = graph.vertices;
    doc["edges"] = nlohmann::ordered_json::array();
    for (const GraphEdge& e : graph.edges)
      doc["edges"].push_back(
          {{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}, {"relation", e.relation}});
    doc["dangerous_structures"] = nlohmann::ordered_json::array();
    for (const auto& s : structures) {
      nlohmann::ordered_json js;
      js["pairs"] = nlohmann::ordered_json::array();
      for (const auto& [from, to] : s.pairs) js["pairs"].push_back({{"from", from}, {"to", to}});
      doc["dangerous_structures"].push_back(std::move(js));
    }
    doc["vulnerable_dependencies"] = nlohmann::ordered_json::array();
    for (const VulnerablePair& p : vulnerable.pairs)
      doc["vulnerable_dependencies"].push_back(
          {{"reader", p.reader_template}, {"writer", p.writer_template}, {"relation", p.relation}});
    doc["safe"] = structures.empty();
    *out_report_json = dup_string(doc.dump(2));
    if (out_dot) *out_dot = dup_string(export_dot(graph, &vulnerable));
    return SERTIER_OK;
  });
}

sertier_status sertier_run_workload(const char* config_text, const char* history_path,
                                    char** out_metrics_json) {
  return guard([&]() -> sertier_status {
    if (!config_text) throw ConfigError("null config");
    bench::WorkloadConfig config = bench::parse_config_text(config_text);
    bench::RunResult result = bench::run_workload(config);
    if (history_path) write_history_file(history_path, result.history);
    if (out_metrics_json) *out_metrics_json = dup_string(bench::metrics_to_json(result.metrics));
    return SERTIER_OK;
  });
}

sertier_status sertier_check_history(const char* history_path, const char* level_or_null,
                                     int want_witness, char** out_verdict_json) {
  return guard([&]() -> sertier_status {
    if (!history_path) throw ConfigError("null history path");
    std::vector<HistoryRecord> history = read_history_file(history_path);
    OracleVerdict verdict = check_serializable(build_dsg(history));

    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(verdict_to_json(verdict));
    if (!want_witness) doc.erase("witness_cycle");
    if (level_or_null) {
      IsolationLevel lvl = parse_level_or_throw(level_or_null);
      if (lvl == IsolationLevel::SER) throw ConfigError("violation scan levels are rc and si");
      auto violations = find_vulnerable_violations(history, lvl);
      doc["vulnerable_violations"] = nlohmann::ordered_json::array();
      for (const auto& v : violations)
        doc["vulnerable_violations"].push_back({{"reader", v.reader_txn},
                                                {"writer", v.writer_txn},
                                                {"relation", v.key.relation},
                                                {"id", v.key.id}});
    }
    if (out_verdict_json) *out_verdict_json = dup_string(doc.dump(2));
    return verdict.serializable ? SERTIER_OK : SERTIER_NOT_SERIALIZABLE;
  });
}

sertier_status sertier_predict(const char* history_path, uint32_t batch_size, uint64_t seed,
                               const char* weights_path_or_null, char** out_json) {
  return guard([&]() -> sertier_status {
    if (!history_path || !out_json) throw ConfigError("null argument");
    std::vector<HistoryRecord> history = read_history_file(history_path);
    auto batch = sample_batch(history, batch_size, seed);
    auto relations = collect_relations(history);
    WorkloadGraph graph = build_workload_graph(batch, relations);
    Prediction p;
    WorkloadStats stats = workload_stats(batch, graph);
    if (weights_path_or_null) {
      PredictorWeights weights = load_weights(weights_path_or_null);
      p = forward(graph, weights);
    } else {
      p = heuristic_predict(stats);
    }
    nlohmann::ordered_json doc;
    doc["batch"] = batch.size();
    doc["vertices"] = graph.vertex_count;
    doc["edges"] = graph.edges.size();
    doc["write_ratio"] = stats.write_ratio;
    doc["conflict_edge_density"] = stats.conflict_edge_density;
    doc["probs"] = {{"RC", p.probs[0]}, {"SI", p.probs[1]}, {"SER", p.probs[2]}};
    doc["chosen"] = to_string(p.chosen);
    *out_json = dup_string(doc.dump(2));
    return SERTIER_OK;
  });
}

sertier_status sertier_transition_demo(int civ_enabled, int fire_transition, char** out_json) {
  return guard([&]() -> sertier_status {
    bench::ScenarioResult result =
        bench::scenario_example3(civ_enabled != 0, fire_transition != 0);
    nlohmann::ordered_json doc;
    doc["civ_enabled"] = civ_enabled != 0;
    doc["lines"] = result.lines;
    doc["serializable"] = result.serializable;
    if (out_json) *out_json = dup_string(doc.dump(2));
    return result.serializable ? SERTIER_OK : SERTIER_NOT_SERIALIZABLE;
  });
}

sertier_status sertier_dump_history_chains(const char* history_path, const char* keys_csv,
                                           char** out_text) {
  return guard([&]() -> sertier_status {
    if (!history_path || !out_text) throw ConfigError("null argument");
    std::vector<HistoryRecord> history = read_history_file(history_path);

    std::map<Key, std::map<Version, std::pair<uint64_t, uint64_t>>> chains;  // v -> (txn, seq)
    for (const HistoryRecord& rec : history) {
      if (rec.outcome != TxnOutcome::Committed) continue;
      for (const HistoryOp& op : rec.ops) {
        if (op.mode == AccessMode::Write) chains[op.key][op.version] = {rec.txn_id, rec.end_seq};
      }
    }

    std::optional<std::vector<Key>> filter;
    if (keys_csv && *keys_csv) {
      filter.emplace();
      std::istringstream in(keys_csv);
      std::string item;
      while (std::getline(in, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("keys look like relation:id");
        filter->push_back({item.substr(0, colon), std::stoull(item.substr(colon + 1))});
      }
    }

    std::ostringstream out;
    auto emit = [&](const Key& key) {
      out << key.relation << "/" << key.id << ": v0(initial)";
      auto it = chains.find(key);
      if (it != chains.end()) {
        for (const auto& [v, who] : it->second)
          out << " v" << v << "(txn " << who.first << "@" << who.second << ")";
      }
      out << "\n";
    };
    if (filter) {
      for (const Key& key : *filter) emit(key);
    } else {
      for (const auto& [key, chain] : chains) emit(key);
    }
    *out_text = dup_string(out.str());
    return SERTIER_OK;
  });
}

}  // extern "C"
