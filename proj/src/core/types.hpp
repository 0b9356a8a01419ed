#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sertier {

enum class IsolationLevel : uint8_t { RC = 0, SI = 1, SER = 2 };

// Ordering RC < SI < SER is for reporting only, never for correctness logic.
inline bool operator<(IsolationLevel a, IsolationLevel b) {
  return static_cast<uint8_t>(a) < static_cast<uint8_t>(b);
}

const char* to_string(IsolationLevel level);
std::optional<IsolationLevel> isolation_from_string(const std::string& s);

// Serialization-graph dependency kinds. The adapter's workload graph uses an
// extra RR label for its edges; RR never appears here.
enum class DependencyKind : uint8_t { WW = 0, WR = 1, RW = 2 };

const char* to_string(DependencyKind kind);

enum class AccessMode : uint8_t { Read = 0, Write = 1 };

const char* to_string(AccessMode mode);

// One data item: (relation, id) pairs are the modeled access granularity.
struct Key {
  std::string relation;
  uint64_t id = 0;

  bool operator==(const Key& o) const { return id == o.id && relation == o.relation; }
  bool operator<(const Key& o) const {
    if (relation != o.relation) return relation < o.relation;
    return id < o.id;
  }
};

struct KeyHash {
  size_t operator()(const Key& k) const {
    // FNV-1a over relation bytes, then mix in the id.
    uint64_t h = 1469598103934665603ull;
    for (char c : k.relation) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= k.id + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};

// Versions are a per-key monotone counter; 0 is the initial load, each
// committed write to the key increments it by exactly 1.
using Version = uint64_t;

struct Step {
  AccessMode mode = AccessMode::Read;
  std::string relation;
  uint32_t key_param = 0;

  bool operator==(const Step&) const = default;
};

// Named sequence of parameterized read/write steps; the unit of static
// analysis and the shape of everything the executor runs.
struct TransactionTemplate {
  std::string name;
  uint32_t arity = 0;
  std::vector<Step> steps;

  bool operator==(const TransactionTemplate&) const = default;

  void validate() const;
};

enum class TxnOutcome : uint8_t { Committed = 0, Aborted = 1 };

const char* to_string(TxnOutcome outcome);

// Closed abort-reason vocabulary so tests can assert the cause of aborts.
namespace abort_reason {
inline constexpr const char* kVersionMismatch = "version_mismatch";
inline constexpr const char* kWaitDie = "wait_die";
inline constexpr const char* kEngineWwConflict = "engine_ww_conflict";
inline constexpr const char* kEngineSsi = "engine_ssi";
inline constexpr const char* kCivVersionMismatch = "civ_version_mismatch";
inline constexpr const char* kUser = "user";

bool is_known(const std::string& reason);
}  // namespace abort_reason

struct HistoryOp {
  AccessMode mode = AccessMode::Read;
  Key key;
  Version version = 0;  // observed for reads, installed for writes

  bool operator==(const HistoryOp&) const = default;
};

// Append-only record of one finished transaction; everything the offline
// oracle and the adapter need to reconstruct dependencies.
struct HistoryRecord {
  uint64_t txn_id = 0;
  std::string template_name;
  IsolationLevel level = IsolationLevel::RC;
  uint64_t begin_seq = 0;
  uint64_t end_seq = 0;
  TxnOutcome outcome = TxnOutcome::Committed;
  std::optional<std::string> abort_reason;
  std::vector<HistoryOp> ops;

  bool operator==(const HistoryRecord&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sertier
