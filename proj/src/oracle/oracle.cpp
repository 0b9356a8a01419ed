#include "oracle/oracle.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

namespace sertier {

namespace {

struct KeyFacts {
  std::map<Version, uint64_t> installers;                 // version -> txn
  std::vector<std::pair<uint64_t, Version>> reads;        // (txn, version)
};

std::map<Key, KeyFacts> collect_facts(const std::vector<HistoryRecord>& history) {
  std::map<Key, KeyFacts> facts;
  for (const HistoryRecord& rec : history) {
    if (rec.outcome != TxnOutcome::Committed) continue;
    for (const HistoryOp& op : rec.ops) {
      KeyFacts& f = facts[op.key];
      if (op.mode == AccessMode::Write) {
        auto [it, inserted] = f.installers.emplace(op.version, rec.txn_id);
        if (!inserted && it->second != rec.txn_id)
          throw InconsistentHistory(op.key, "version " + std::to_string(op.version) +
                                                " installed twice");
      } else {
        f.reads.push_back({rec.txn_id, op.version});
      }
    }
  }
  for (auto& [key, f] : facts) {
    Version expect = 1;
    for (const auto& [v, txn] : f.installers) {
      if (v != expect)
        throw InconsistentHistory(key, "installed versions not consecutive near v" +
                                           std::to_string(v));
      ++expect;
    }
    for (const auto& [txn, v] : f.reads) {
      if (v != 0 && !f.installers.count(v))
        throw InconsistentHistory(key, "read of never-installed version " + std::to_string(v));
    }
  }
  return facts;
}

}  // namespace

SerializationGraph build_dsg(const std::vector<HistoryRecord>& history) {
  SerializationGraph g;
  for (const HistoryRecord& rec : history)
    if (rec.outcome == TxnOutcome::Committed) g.vertices.push_back(rec.txn_id);
  std::sort(g.vertices.begin(), g.vertices.end());

  auto facts = collect_facts(history);
  std::set<DsgEdge> edges;
  for (const auto& [key, f] : facts) {
    for (const auto& [v, installer] : f.installers) {
      auto next = f.installers.find(v + 1);
      if (next != f.installers.end() && next->second != installer)
        edges.insert({installer, next->second, DependencyKind::WW, key});
    }
    for (const auto& [reader, v] : f.reads) {
      if (v > 0) {
        uint64_t installer = f.installers.at(v);
        if (installer != reader) edges.insert({installer, reader, DependencyKind::WR, key});
      }
      auto next = f.installers.find(v + 1);
      if (next != f.installers.end() && next->second != reader)
        edges.insert({reader, next->second, DependencyKind::RW, key});
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

OracleVerdict check_serializable(const SerializationGraph& g) {
  std::map<uint64_t, std::vector<std::pair<uint64_t, DependencyKind>>> adj;
  for (const DsgEdge& e : g.edges) adj[e.from].push_back({e.to, e.kind});

  enum class Color { White, Gray, Black };
  std::map<uint64_t, Color> color;
  for (uint64_t v : g.vertices) color[v] = Color::White;

  // Iterative DFS keeping the gray path so a back edge yields the cycle.
  std::vector<std::pair<uint64_t, DependencyKind>> path;  // (txn, kind of edge taken to leave it)
  for (uint64_t root : g.vertices) {
    if (color[root] != Color::White) continue;
    struct Frame {
      uint64_t node;
      size_t next_child = 0;
    };
    std::vector<Frame> stack{{root}};
    color[root] = Color::Gray;
    while (!stack.empty()) {
      Frame& frame = stack.back();
      auto& children = adj[frame.node];
      if (frame.next_child < children.size()) {
        auto [child, kind] = children[frame.next_child++];
        if (color[child] == Color::Gray) {
          OracleVerdict verdict;
          verdict.serializable = false;
          // Cycle: from `child` along the gray stack back to `child`.
          bool in_cycle = false;
          for (size_t i = 0; i < stack.size(); ++i) {
            if (stack[i].node == child) in_cycle = true;
            if (!in_cycle) continue;
            DependencyKind hop_kind;
            if (i + 1 < stack.size()) {
              // Edge actually taken from stack[i] to stack[i+1].
              hop_kind = DependencyKind::WW;
              for (auto& [to, k] : adj[stack[i].node]) {
                if (to == stack[i + 1].node) {
                  hop_kind = k;
                  break;
                }
              }
            } else {
              hop_kind = kind;  // closing edge back to child
            }
            verdict.witness_cycle.push_back({stack[i].node, hop_kind});
          }
          return verdict;
        }
        if (color[child] == Color::White) {
          color[child] = Color::Gray;
          stack.push_back({child});
        }
      } else {
        color[frame.node] = Color::Black;
        stack.pop_back();
      }
    }
  }
  return {};
}

std::vector<VulnerableViolation> find_vulnerable_violations(const std::vector<HistoryRecord>& history,
                                                            IsolationLevel level) {
  if (level == IsolationLevel::SER) return {};

  std::map<uint64_t, uint64_t> commit_seq;
  for (const HistoryRecord& rec : history)
    if (rec.outcome == TxnOutcome::Committed) commit_seq[rec.txn_id] = rec.end_seq;

  SerializationGraph g = build_dsg(history);
  std::set<uint64_t> has_incoming_rw;
  for (const DsgEdge& e : g.edges)
    if (e.kind == DependencyKind::RW) has_incoming_rw.insert(e.to);

  std::vector<VulnerableViolation> out;
  for (const DsgEdge& e : g.edges) {
    if (e.kind != DependencyKind::RW) continue;
    if (level == IsolationLevel::SI && !has_incoming_rw.count(e.from)) continue;
    if (commit_seq.at(e.to) < commit_seq.at(e.from)) out.push_back({e.from, e.to, e.key});
  }
  return out;
}

bool brute_force_serializable(const std::vector<HistoryRecord>& history) {
  std::vector<const HistoryRecord*> committed;
  for (const HistoryRecord& rec : history)
    if (rec.outcome == TxnOutcome::Committed) committed.push_back(&rec);
  if (committed.size() > 8) throw Error("brute force limited to 8 committed transactions");

  std::sort(committed.begin(), committed.end(),
            [](const HistoryRecord* a, const HistoryRecord* b) { return a->txn_id < b->txn_id; });

  auto replays = [&](const std::vector<const HistoryRecord*>& order) {
    std::map<Key, Version> current;
    for (const HistoryRecord* rec : order) {
      std::set<Key> own_installs;  // a repeated write reuses the installed version
      for (const HistoryOp& op : rec->ops) {
        Version& cur = current[op.key];  // 0 when untouched
        if (op.mode == AccessMode::Read) {
          if (cur != op.version) return false;
        } else if (own_installs.count(op.key)) {
          if (cur != op.version) return false;
        } else {
          if (cur + 1 != op.version) return false;
          cur = op.version;
          own_installs.insert(op.key);
        }
      }
    }
    return true;
  };

  std::vector<const HistoryRecord*> perm = committed;
  do {
    if (replays(perm)) return true;
  } while (std::next_permutation(perm.begin(), perm.end(),
                                 [](const HistoryRecord* a, const HistoryRecord* b) {
                                   return a->txn_id < b->txn_id;
                                 }));
  return false;
}

std::string verdict_to_json(const OracleVerdict& verdict) {
  nlohmann::ordered_json doc;
  doc["serializable"] = verdict.serializable;
  if (!verdict.serializable) {
    doc["witness_cycle"] = nlohmann::ordered_json::array();
    for (const WitnessHop& hop : verdict.witness_cycle) {
      doc["witness_cycle"].push_back({{"txn_id", hop.txn_id}, {"edge", to_string(hop.kind)}});
    }
  }
  return doc.dump();
}

}  // namespace sertier
