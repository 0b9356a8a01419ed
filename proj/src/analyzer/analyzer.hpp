#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace sertier {

class DuplicateTemplateName : public Error {
 public:
  explicit DuplicateTemplateName(const std::string& name)
      : Error("template name already registered: " + name) {}
};

class EmptyRegistry : public Error {
 public:
  EmptyRegistry() : Error("no templates registered") {}
};

class UnsupportedLevel : public Error {
 public:
  explicit UnsupportedLevel(IsolationLevel level)
      : Error(std::string("analysis not defined for level ") + to_string(level)) {}
};

class TemplateRegistry {
 public:
  // Returns a dense id (0,1,2,...). Throws DuplicateTemplateName / ConfigError.
  uint32_t register_template(TransactionTemplate tpl);

  const TransactionTemplate& at(uint32_t id) const { return templates_.at(id); }
  const TransactionTemplate* find(const std::string& name) const;
  std::optional<uint32_t> id_of(const std::string& name) const;
  size_t size() const { return templates_.size(); }
  const std::vector<TransactionTemplate>& all() const { return templates_; }

 private:
  std::vector<TransactionTemplate> templates_;
  std::map<std::string, uint32_t> by_name_;
};

struct GraphEdge {
  std::string from;
  std::string to;
  DependencyKind kind = DependencyKind::WW;
  std::string relation;

  bool operator==(const GraphEdge&) const = default;
  bool operator<(const GraphEdge& o) const {
    if (from != o.from) return from < o.from;
    if (to != o.to) return to < o.to;
    if (kind != o.kind) return kind < o.kind;
    return relation < o.relation;
  }
};

// Template-level dependency graph. Edges over-approximate the runtime
// dependencies the executor has to care about; see build_static_graph for the
// exact derivation rules.
struct StaticDependencyGraph {
  std::vector<std::string> vertices;  // sorted template names
  std::vector<GraphEdge> edges;       // sorted by (from, to, kind, relation)

  std::vector<GraphEdge> edges_of_kind(DependencyKind kind) const;
};

// A dangerous structure at template granularity: one RW template pair under
// RC, two consecutive RW template pairs under SI. `edges` lists every graph
// edge backing the structure (a pair may conflict on several relations).
struct DangerousStructure {
  std::vector<std::pair<std::string, std::string>> pairs;  // 1 (RC) or 2 (SI)
  std::vector<GraphEdge> edges;

  bool operator==(const DangerousStructure&) const = default;
};

struct VulnerablePair {
  std::string reader_template;
  std::string writer_template;
  std::string relation;

  bool operator==(const VulnerablePair&) const = default;
  bool operator<(const VulnerablePair& o) const {
    if (reader_template != o.reader_template) return reader_template < o.reader_template;
    if (writer_template != o.writer_template) return writer_template < o.writer_template;
    return relation < o.relation;
  }
};

// The RW edges whose commit order must match dependency order to keep the
// schedule serializable at `level`: every RW edge under RC, only the second
// edge of two consecutive RW edges under SI.
struct VulnerableDependencySet {
  IsolationLevel level = IsolationLevel::RC;
  std::vector<VulnerablePair> pairs;  // sorted, deduplicated

  bool contains_reader(const std::string& tpl, const std::string& relation) const;
  bool contains_writer(const std::string& tpl, const std::string& relation) const;
};

// Derivation rules, per ordered template pair (A, B) and relation:
//   WW: A and B both write the relation.
//   WR: A writes it and B reads it.
//   RW: A has an uncovered read of it and B writes it, unless shielded.
// A read step is covered when the same template writes the same relation
// through the same parameter (an update-style read-modify-write); covered
// reads never create RW edges because the co-located write both collides
// write-write with any concurrent writer and carries the observed version the
// validation phase rechecks. A remaining read/write step pair is shielded
// when a preceding covered read-modify-write of A on another relation is
// forced (by parameter equality) to collide with the same writer, which makes
// the executor's write recheck subsume the edge.
StaticDependencyGraph build_static_graph(const TemplateRegistry& registry);

std::vector<DangerousStructure> find_dangerous_structures(const StaticDependencyGraph& g,
                                                          IsolationLevel level);

VulnerableDependencySet find_vulnerable_dependencies(const StaticDependencyGraph& g,
                                                     IsolationLevel level);

// GraphViz digraph text; deterministic. RW edges are labeled "rw" and edges in
// `vulnerable` (when given) are styled dashed.
std::string export_dot(const StaticDependencyGraph& g,
                       const VulnerableDependencySet* vulnerable = nullptr);

// Registry file format: JSON array of {name, arity, steps:[{mode,relation,key_param}]}.
TemplateRegistry parse_registry_json(const std::string& text);
std::string registry_to_json(const TemplateRegistry& registry);

}  // namespace sertier
