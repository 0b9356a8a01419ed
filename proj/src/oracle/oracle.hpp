#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace sertier {

class InconsistentHistory : public Error {
 public:
  InconsistentHistory(const Key& key, const std::string& detail)
      : Error("inconsistent history on " + key.relation + "/" + std::to_string(key.id) + ": " +
              detail) {}
};

struct DsgEdge {
  uint64_t from = 0;
  uint64_t to = 0;
  DependencyKind kind = DependencyKind::WW;
  Key key;

  bool operator==(const DsgEdge&) const = default;
  bool operator<(const DsgEdge& o) const {
    if (from != o.from) return from < o.from;
    if (to != o.to) return to < o.to;
    if (kind != o.kind) return kind < o.kind;
    return key < o.key;
  }
};

// Direct serialization graph over the committed transactions of a history.
// WW/RW edges connect adjacent installs (transitive reduction); cycles are
// preserved under that reduction.
struct SerializationGraph {
  std::vector<uint64_t> vertices;  // committed txn ids, sorted
  std::vector<DsgEdge> edges;      // sorted
};

struct WitnessHop {
  uint64_t txn_id = 0;
  DependencyKind kind = DependencyKind::WW;  // edge leaving this txn
};

struct OracleVerdict {
  bool serializable = true;
  std::vector<WitnessHop> witness_cycle;  // present iff not serializable
};

SerializationGraph build_dsg(const std::vector<HistoryRecord>& history);

OracleVerdict check_serializable(const SerializationGraph& g);

struct VulnerableViolation {
  uint64_t reader_txn = 0;
  uint64_t writer_txn = 0;
  Key key;

  bool operator==(const VulnerableViolation&) const = default;
};

// Runtime vulnerable dependencies (reader -> writer RW edges; under SI only
// those with a preceding RW edge into the reader) whose commit order is
// inverted. Empty is the sufficient condition the executor enforces.
std::vector<VulnerableViolation> find_vulnerable_violations(const std::vector<HistoryRecord>& history,
                                                            IsolationLevel level);

// Ground-truth serializability for small histories: some permutation of the
// committed transactions, replayed sequentially, reproduces every read's
// observed version and every write's installed version.
bool brute_force_serializable(const std::vector<HistoryRecord>& history);

std::string verdict_to_json(const OracleVerdict& verdict);

}  // namespace sertier
