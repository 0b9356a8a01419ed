#include "analyzer/analyzer.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace sertier {

uint32_t TemplateRegistry::register_template(TransactionTemplate tpl) {
  tpl.validate();
  if (by_name_.count(tpl.name)) throw DuplicateTemplateName(tpl.name);
  uint32_t id = static_cast<uint32_t>(templates_.size());
  by_name_.emplace(tpl.name, id);
  templates_.push_back(std::move(tpl));
  return id;
}

const TransactionTemplate* TemplateRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &templates_[it->second];
}

std::optional<uint32_t> TemplateRegistry::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<GraphEdge> StaticDependencyGraph::edges_of_kind(DependencyKind kind) const {
  std::vector<GraphEdge> out;
  for (const GraphEdge& e : edges)
    if (e.kind == kind) out.push_back(e);
  return out;
}

namespace {

struct TemplateAccess {
  std::set<std::string> written;                               // relations with >= 1 write step
  std::set<std::string> read_any;                              // relations with >= 1 read step
  std::vector<std::pair<size_t, Step>> uncovered_reads;        // (step index, step)
  std::set<std::pair<std::string, uint32_t>> writes_by_param;  // (relation, param)
  std::set<std::pair<std::string, uint32_t>> reads_by_param;
  // Earliest step index of a covered read per (relation, param).
  std::map<std::pair<std::string, uint32_t>, size_t> covered_read_pos;
};

TemplateAccess analyze_template(const TransactionTemplate& tpl) {
  TemplateAccess acc;
  for (const Step& s : tpl.steps) {
    if (s.mode == AccessMode::Write) {
      acc.written.insert(s.relation);
      acc.writes_by_param.insert({s.relation, s.key_param});
    } else {
      acc.read_any.insert(s.relation);
      acc.reads_by_param.insert({s.relation, s.key_param});
    }
  }
  for (size_t i = 0; i < tpl.steps.size(); ++i) {
    const Step& s = tpl.steps[i];
    if (s.mode != AccessMode::Read) continue;
    if (acc.writes_by_param.count({s.relation, s.key_param})) {
      auto key = std::make_pair(s.relation, s.key_param);
      auto it = acc.covered_read_pos.find(key);
      if (it == acc.covered_read_pos.end()) acc.covered_read_pos.emplace(key, i);
    } else {
      acc.uncovered_reads.push_back({i, s});
    }
  }
  return acc;
}

// True when every runtime collision of A's read step with B's write step is
// forced to collide write-write on some relation A read-modify-writes through
// the read's own parameter, with that covered read preceding this one.
bool shielded(const TemplateAccess& a, size_t read_pos, const Step& read_step,
              const TemplateAccess& b, const std::string& relation, uint32_t write_param) {
  for (const auto& [cov, pos] : a.covered_read_pos) {
    const auto& [cov_rel, cov_param] = cov;
    if (cov_param != read_step.key_param) continue;
    if (pos > read_pos) continue;
    if (cov_rel == relation) continue;
    if (b.writes_by_param.count({cov_rel, write_param})) return true;
  }
  return false;
}

}  // namespace

StaticDependencyGraph build_static_graph(const TemplateRegistry& registry) {
  if (registry.size() == 0) throw EmptyRegistry();

  std::vector<TemplateAccess> access;
  access.reserve(registry.size());
  for (const TransactionTemplate& tpl : registry.all()) access.push_back(analyze_template(tpl));

  StaticDependencyGraph g;
  for (const TransactionTemplate& tpl : registry.all()) g.vertices.push_back(tpl.name);
  std::sort(g.vertices.begin(), g.vertices.end());

  std::set<GraphEdge> edges;
  const auto& templates = registry.all();
  for (size_t i = 0; i < templates.size(); ++i) {
    for (size_t j = 0; j < templates.size(); ++j) {
      const TemplateAccess& a = access[i];
      const TemplateAccess& b = access[j];
      const std::string& from = templates[i].name;
      const std::string& to = templates[j].name;

      for (const std::string& rel : a.written) {
        if (b.written.count(rel)) edges.insert({from, to, DependencyKind::WW, rel});
        if (b.read_any.count(rel)) edges.insert({from, to, DependencyKind::WR, rel});
      }
      for (const auto& [pos, read_step] : a.uncovered_reads) {
        if (!b.written.count(read_step.relation)) continue;
        bool any_unshielded = false;
        for (const auto& [w_rel, w_param] : b.writes_by_param) {
          if (w_rel != read_step.relation) continue;
          if (!shielded(a, pos, read_step, b, read_step.relation, w_param)) {
            any_unshielded = true;
            break;
          }
        }
        if (any_unshielded) edges.insert({from, to, DependencyKind::RW, read_step.relation});
      }
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

namespace {

// RW edges grouped by ordered template pair, sorted.
std::vector<std::pair<std::pair<std::string, std::string>, std::vector<GraphEdge>>> rw_pairs(
    const StaticDependencyGraph& g) {
  std::map<std::pair<std::string, std::string>, std::vector<GraphEdge>> grouped;
  for (const GraphEdge& e : g.edges)
    if (e.kind == DependencyKind::RW) grouped[{e.from, e.to}].push_back(e);
  return {grouped.begin(), grouped.end()};
}

}  // namespace

std::vector<DangerousStructure> find_dangerous_structures(const StaticDependencyGraph& g,
                                                          IsolationLevel level) {
  if (level == IsolationLevel::SER) throw UnsupportedLevel(level);

  auto pairs = rw_pairs(g);
  std::vector<DangerousStructure> out;
  if (level == IsolationLevel::RC) {
    for (const auto& [pair, edges] : pairs) out.push_back({{pair}, edges});
    return out;
  }
  // SI: every ordered pair of consecutive RW dependencies, repeats included.
  for (const auto& [p1, e1] : pairs) {
    for (const auto& [p2, e2] : pairs) {
      if (p1.second != p2.first) continue;
      DangerousStructure s;
      s.pairs = {p1, p2};
      s.edges = e1;
      s.edges.insert(s.edges.end(), e2.begin(), e2.end());
      out.push_back(std::move(s));
    }
  }
  return out;
}

VulnerableDependencySet find_vulnerable_dependencies(const StaticDependencyGraph& g,
                                                     IsolationLevel level) {
  if (level == IsolationLevel::SER) throw UnsupportedLevel(level);

  VulnerableDependencySet out;
  out.level = level;
  std::set<VulnerablePair> pairs;
  auto grouped = rw_pairs(g);

  if (level == IsolationLevel::RC) {
    for (const auto& [pair, edges] : grouped)
      for (const GraphEdge& e : edges) pairs.insert({e.from, e.to, e.relation});
  } else {
    // Boxed second edge of Def. 5: RW (j -> k) with some predecessor RW (i -> j).
    std::set<std::string> has_incoming_rw;
    for (const auto& [pair, edges] : grouped) has_incoming_rw.insert(pair.second);
    for (const auto& [pair, edges] : grouped) {
      if (!has_incoming_rw.count(pair.first)) continue;
      for (const GraphEdge& e : edges) pairs.insert({e.from, e.to, e.relation});
    }
  }
  out.pairs.assign(pairs.begin(), pairs.end());
  return out;
}

bool VulnerableDependencySet::contains_reader(const std::string& tpl,
                                              const std::string& relation) const {
  for (const VulnerablePair& p : pairs)
    if (p.reader_template == tpl && p.relation == relation) return true;
  return false;
}

bool VulnerableDependencySet::contains_writer(const std::string& tpl,
                                              const std::string& relation) const {
  for (const VulnerablePair& p : pairs)
    if (p.writer_template == tpl && p.relation == relation) return true;
  return false;
}

std::string export_dot(const StaticDependencyGraph& g, const VulnerableDependencySet* vulnerable) {
  std::string out = "digraph dependencies {\n";
  for (const std::string& v : g.vertices) {
    out += "  \"" + v + "\";\n";
  }
  for (const GraphEdge& e : g.edges) {
    out += "  \"" + e.from + "\" -> \"" + e.to + "\" [label=\"" + to_string(e.kind) + ":" +
           e.relation + "\"";
    if (vulnerable &&
        std::count(vulnerable->pairs.begin(), vulnerable->pairs.end(),
                   VulnerablePair{e.from, e.to, e.relation}) > 0) {
      out += ", style=dashed";
    }
    out += "];\n";
  }
  out += "}\n";
  return out;
}

TemplateRegistry parse_registry_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad registry json: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("registry json must be an array of templates");

  TemplateRegistry registry;
  for (const auto& t : doc) {
    TransactionTemplate tpl;
    if (!t.is_object() || !t.contains("name") || !t.contains("arity") || !t.contains("steps"))
      throw ConfigError("template entry needs name, arity and steps");
    tpl.name = t.at("name").get<std::string>();
    tpl.arity = t.at("arity").get<uint32_t>();
    for (const auto& s : t.at("steps")) {
      Step step;
      const std::string mode = s.at("mode").get<std::string>();
      if (mode == "Read") {
        step.mode = AccessMode::Read;
      } else if (mode == "Write") {
        step.mode = AccessMode::Write;
      } else {
        throw ConfigError("step mode must be Read or Write, got '" + mode + "'");
      }
      step.relation = s.at("relation").get<std::string>();
      step.key_param = s.at("key_param").get<uint32_t>();
      tpl.steps.push_back(std::move(step));
    }
    registry.register_template(std::move(tpl));
  }
  return registry;
}

std::string registry_to_json(const TemplateRegistry& registry) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const TransactionTemplate& tpl : registry.all()) {
    nlohmann::ordered_json t;
    t["name"] = tpl.name;
    t["arity"] = tpl.arity;
    t["steps"] = nlohmann::ordered_json::array();
    for (const Step& s : tpl.steps) {
      t["steps"].push_back({{"mode", to_string(s.mode)}, {"relation", s.relation}, {"key_param", s.key_param}});
    }
    doc.push_back(std::move(t));
  }
  return doc.dump(2);
}

}  // namespace sertier
