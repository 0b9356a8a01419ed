#include "core/types.hpp"

namespace sertier {

const char* to_string(IsolationLevel level) {
  switch (level) {
    case IsolationLevel::RC: return "RC";
    case IsolationLevel::SI: return "SI";
    case IsolationLevel::SER: return "SER";
  }
  return "?";
}

std::optional<IsolationLevel> isolation_from_string(const std::string& s) {
  if (s == "RC" || s == "rc") return IsolationLevel::RC;
  if (s == "SI" || s == "si") return IsolationLevel::SI;
  if (s == "SER" || s == "ser") return IsolationLevel::SER;
  return std::nullopt;
}

const char* to_string(DependencyKind kind) {
  switch (kind) {
    case DependencyKind::WW: return "ww";
    case DependencyKind::WR: return "wr";
    case DependencyKind::RW: return "rw";
  }
  return "?";
}

const char* to_string(AccessMode mode) {
  return mode == AccessMode::Read ? "Read" : "Write";
}

const char* to_string(TxnOutcome outcome) {
  return outcome == TxnOutcome::Committed ? "Committed" : "Aborted";
}

namespace abort_reason {
bool is_known(const std::string& reason) {
  return reason == kVersionMismatch || reason == kWaitDie || reason == kEngineWwConflict ||
         reason == kEngineSsi || reason == kCivVersionMismatch || reason == kUser;
}
}  // namespace abort_reason

void TransactionTemplate::validate() const {
  if (name.empty()) throw ConfigError("template name must be non-empty");
  if (steps.empty()) throw ConfigError("template '" + name + "' has no steps");
  for (const Step& s : steps) {
    if (s.relation.empty()) throw ConfigError("template '" + name + "' has a step with empty relation");
    if (s.key_param >= arity)
      throw ConfigError("template '" + name + "' references parameter " +
                        std::to_string(s.key_param) + " but arity is " + std::to_string(arity));
  }
}

}  // namespace sertier
