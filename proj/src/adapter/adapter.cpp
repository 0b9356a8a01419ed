#include "adapter/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace sertier {

TxnSummary summarize(const HistoryRecord& rec) {
  TxnSummary s;
  s.txn_id = rec.txn_id;
  for (const HistoryOp& op : rec.ops) {
    if (op.mode == AccessMode::Read) {
      s.reads.insert(op.key);
    } else {
      s.writes.insert(op.key);
    }
  }
  return s;
}

std::vector<TxnSummary> sample_batch(const std::vector<HistoryRecord>& stream, size_t batch_size,
                                     uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<const HistoryRecord*> reservoir;
  reservoir.reserve(batch_size);
  size_t seen = 0;
  for (const HistoryRecord& rec : stream) {
    ++seen;
    if (reservoir.size() < batch_size) {
      reservoir.push_back(&rec);
    } else {
      std::uniform_int_distribution<size_t> dist(0, seen - 1);
      size_t j = dist(rng);
      if (j < batch_size) reservoir[j] = &rec;
    }
  }
  std::vector<TxnSummary> out;
  out.reserve(reservoir.size());
  for (const HistoryRecord* rec : reservoir) out.push_back(summarize(*rec));
  return out;
}

std::vector<std::string> collect_relations(const std::vector<HistoryRecord>& history) {
  std::set<std::string> rels;
  for (const HistoryRecord& rec : history)
    for (const HistoryOp& op : rec.ops) rels.insert(op.key.relation);
  return {rels.begin(), rels.end()};
}

namespace {

size_t relation_index(const std::vector<std::string>& relations, const std::string& rel) {
  auto it = std::find(relations.begin(), relations.end(), rel);
  if (it == relations.end()) throw ConfigError("relation not in one-hot vocabulary: " + rel);
  return static_cast<size_t>(it - relations.begin());
}

void count_intersection(const std::set<Key>& a, const std::set<Key>& b,
                        std::map<std::string, size_t>& per_relation, size_t& total) {
  for (const Key& k : a) {
    if (b.count(k)) {
      ++per_relation[k.relation];
      ++total;
    }
  }
}

}  // namespace

WorkloadGraph build_workload_graph(const std::vector<TxnSummary>& batch,
                                   const std::vector<std::string>& relations) {
  WorkloadGraph g;
  g.relations = relations;
  g.vertex_count = batch.size();
  g.vertex_features.reserve(batch.size());
  for (const TxnSummary& t : batch) {
    g.vertex_features.push_back(
        {static_cast<double>(t.reads.size()), static_cast<double>(t.writes.size())});
  }

  const size_t attr_dim = 3 + relations.size();
  for (size_t i = 0; i < batch.size(); ++i) {
    for (size_t j = i + 1; j < batch.size(); ++j) {
      std::map<std::string, size_t> per_relation;
      size_t total = 0;
      WorkloadEdgeType type;
      count_intersection(batch[i].writes, batch[j].writes, per_relation, total);
      if (total > 0) {
        type = WorkloadEdgeType::WW;
      } else {
        count_intersection(batch[i].reads, batch[j].writes, per_relation, total);
        count_intersection(batch[i].writes, batch[j].reads, per_relation, total);
        if (total > 0) {
          type = WorkloadEdgeType::RWWR;
        } else {
          count_intersection(batch[i].reads, batch[j].reads, per_relation, total);
          if (total == 0) continue;
          type = WorkloadEdgeType::RR;
        }
      }
      // Relation contributing the most intersecting keys; ties go to the
      // smallest relation id in the one-hot order.
      size_t best_idx = 0;
      size_t best_count = 0;
      for (size_t r = 0; r < relations.size(); ++r) {
        auto it = per_relation.find(relations[r]);
        size_t c = it == per_relation.end() ? 0 : it->second;
        if (c > best_count) {
          best_count = c;
          best_idx = r;
        }
      }
      std::vector<double> attr(attr_dim, 0.0);
      attr[static_cast<size_t>(type)] = 1.0;
      attr[3 + best_idx] = 1.0;
      g.edges.push_back({i, j});
      g.edge_attrs.push_back(std::move(attr));
    }
  }
  return g;
}

void PredictorWeights::check_consistent() const {
  auto dims = layer_dims();
  for (int l = 0; l < 3; ++l) {
    uint32_t out = dims[l + 1] * dims[l];
    uint32_t hidden = out;
    const EdgeMlp& m = edge_mlp[l];
    if (m.w1.size() != static_cast<size_t>(hidden) * attr_dim() || m.b1.size() != hidden ||
        m.w2.size() != static_cast<size_t>(out) * hidden || m.b2.size() != out)
      throw DimensionMismatch("edge MLP " + std::to_string(l + 1) + " has inconsistent shapes");
  }
  if (c1_w.size() != static_cast<size_t>(h) * d3 || c1_b.size() != h ||
      c2_w.size() != 3u * h || c2_b.size() != 3u)
    throw DimensionMismatch("classifier has inconsistent shapes");
  for (double v : c2_b)
    if (!std::isfinite(v)) throw DimensionMismatch("non-finite weight");
}

namespace {

// y = relu(W x + b), W is (rows x cols) row-major.
std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b,
                           const std::vector<double>& x, bool relu) {
  size_t rows = b.size();
  size_t cols = x.size();
  std::vector<double> y(rows, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w.data() + r * cols;
    for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = relu && acc < 0.0 ? 0.0 : acc;
  }
  return y;
}

}  // namespace

Prediction forward(const WorkloadGraph& g, const PredictorWeights& w, IsolationLevel current) {
  w.check_consistent();
  if (g.relations.size() != w.n_relations)
    throw DimensionMismatch("graph has " + std::to_string(g.relations.size()) +
                            " relations, weights expect " + std::to_string(w.n_relations));

  auto dims = w.layer_dims();
  std::vector<std::vector<double>> h_prev(g.vertex_count);
  for (size_t v = 0; v < g.vertex_count; ++v)
    h_prev[v] = {g.vertex_features[v][0], g.vertex_features[v][1]};

  for (int l = 0; l < 3; ++l) {
    const uint32_t d_in = dims[l];
    const uint32_t d_out = dims[l + 1];
    // Per-edge kernels from the edge network.
    std::vector<std::vector<double>> kernels(g.edges.size());
    for (size_t e = 0; e < g.edges.size(); ++e) {
      std::vector<double> hidden = affine(w.edge_mlp[l].w1, w.edge_mlp[l].b1, g.edge_attrs[e], true);
      kernels[e] = affine(w.edge_mlp[l].w2, w.edge_mlp[l].b2, hidden, false);
    }
    std::vector<std::vector<double>> h_next(g.vertex_count, std::vector<double>(d_out, 0.0));
    std::vector<bool> has_neighbor(g.vertex_count, false);
    for (size_t e = 0; e < g.edges.size(); ++e) {
      auto [i, j] = g.edges[e];
      const std::vector<double>& kernel = kernels[e];
      auto apply = [&](size_t dst, size_t src) {
        std::vector<double> msg(d_out, 0.0);
        for (uint32_t r = 0; r < d_out; ++r) {
          double acc = 0.0;
          for (uint32_t c = 0; c < d_in; ++c) acc += kernel[r * d_in + c] * h_prev[src][c];
          msg[r] = acc;
        }
        if (!has_neighbor[dst]) {
          h_next[dst] = std::move(msg);
          has_neighbor[dst] = true;
        } else {
          for (uint32_t r = 0; r < d_out; ++r) h_next[dst][r] = std::max(h_next[dst][r], msg[r]);
        }
      };
      apply(i, j);
      apply(j, i);
    }
    for (size_t v = 0; v < g.vertex_count; ++v) {
      if (!has_neighbor[v]) {
        h_next[v].assign(d_out, 0.0);
      } else {
        for (double& x : h_next[v]) x = std::max(x, 0.0);
      }
    }
    h_prev = std::move(h_next);
  }

  // Mean pooling over vertices, then the classification head.
  std::vector<double> pooled(dims[3], 0.0);
  if (g.vertex_count > 0) {
    for (const auto& row : h_prev)
      for (size_t c = 0; c < pooled.size(); ++c) pooled[c] += row[c];
    for (double& x : pooled) x /= static_cast<double>(g.vertex_count);
  }
  std::vector<double> z1 = affine(w.c1_w, w.c1_b, pooled, true);
  std::vector<double> z2 = affine(w.c2_w, w.c2_b, z1, false);

  double m = std::max({z2[0], z2[1], z2[2]});
  std::array<double, 3> ex{std::exp(z2[0] - m), std::exp(z2[1] - m), std::exp(z2[2] - m)};
  double sum = ex[0] + ex[1] + ex[2];

  Prediction p;
  p.probs = {ex[0] / sum, ex[1] / sum, ex[2] / sum};
  double best = *std::max_element(p.probs.begin(), p.probs.end());
  size_t cur = static_cast<size_t>(current);
  if (p.probs[cur] == best) {
    p.chosen = current;
  } else {
    for (size_t i = 0; i < 3; ++i) {
      if (p.probs[i] == best) {
        p.chosen = static_cast<IsolationLevel>(i);
        break;
      }
    }
  }
  return p;
}

WorkloadStats workload_stats(const std::vector<TxnSummary>& batch, const WorkloadGraph& g) {
  WorkloadStats s;
  size_t reads = 0, writes = 0;
  for (const TxnSummary& t : batch) {
    reads += t.reads.size();
    writes += t.writes.size();
  }
  if (reads + writes > 0) s.write_ratio = static_cast<double>(writes) / (reads + writes);
  size_t conflict_edges = 0;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edge_attrs[e][static_cast<size_t>(WorkloadEdgeType::RR)] == 0.0) ++conflict_edges;
  }
  size_t n = g.vertex_count;
  if (n >= 2) s.conflict_edge_density = static_cast<double>(conflict_edges) / (n * (n - 1) / 2.0);
  return s;
}

Prediction heuristic_predict(const WorkloadStats& stats, const HeuristicThresholds& thresholds) {
  Prediction p;
  if (stats.conflict_edge_density < thresholds.density_high) {
    p.chosen = IsolationLevel::SI;
  } else if (stats.write_ratio >= thresholds.write_ratio_high) {
    p.chosen = IsolationLevel::RC;
  } else {
    p.chosen = IsolationLevel::SER;
  }
  p.probs = {0.0, 0.0, 0.0};
  p.probs[static_cast<size_t>(p.chosen)] = 1.0;
  return p;
}

namespace {

constexpr char kMagic[4] = {'T', 'X', 'S', 'W'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kPoolingMean = 0;

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64s(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

std::vector<double> read_f64s(std::ifstream& in, size_t count) {
  std::vector<double> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8));
  return v;
}

}  // namespace

void save_weights(const std::string& path, const PredictorWeights& w) {
  w.check_consistent();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write weights file: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  uint8_t pooling = kPoolingMean;
  out.write(reinterpret_cast<const char*>(&pooling), 1);
  for (uint32_t d : {w.d1, w.d2, w.d3, w.h, w.n_relations}) write_u32(out, d);
  for (const auto& m : w.edge_mlp) {
    write_f64s(out, m.w1);
    write_f64s(out, m.b1);
    write_f64s(out, m.w2);
    write_f64s(out, m.b2);
  }
  write_f64s(out, w.c1_w);
  write_f64s(out, w.c1_b);
  write_f64s(out, w.c2_w);
  write_f64s(out, w.c2_b);
}

PredictorWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open weights file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error("bad weights magic");
  uint32_t version = read_u32(in);
  if (version != kVersion) throw Error("unsupported weights version " + std::to_string(version));
  uint8_t pooling = 0;
  in.read(reinterpret_cast<char*>(&pooling), 1);
  if (pooling != kPoolingMean) throw Error("unsupported pooling tag");

  PredictorWeights w;
  w.d1 = read_u32(in);
  w.d2 = read_u32(in);
  w.d3 = read_u32(in);
  w.h = read_u32(in);
  w.n_relations = read_u32(in);
  auto dims = w.layer_dims();
  for (int l = 0; l < 3; ++l) {
    uint32_t out_dim = dims[l + 1] * dims[l];
    uint32_t hidden = out_dim;
    w.edge_mlp[l].w1 = read_f64s(in, static_cast<size_t>(hidden) * w.attr_dim());
    w.edge_mlp[l].b1 = read_f64s(in, hidden);
    w.edge_mlp[l].w2 = read_f64s(in, static_cast<size_t>(out_dim) * hidden);
    w.edge_mlp[l].b2 = read_f64s(in, out_dim);
  }
  w.c1_w = read_f64s(in, static_cast<size_t>(w.h) * w.d3);
  w.c1_b = read_f64s(in, w.h);
  w.c2_w = read_f64s(in, 3u * w.h);
  w.c2_b = read_f64s(in, 3);
  if (!in) throw Error("weights file truncated");
  w.check_consistent();
  return w;
}

PredictorWeights zero_weights(uint32_t d1, uint32_t d2, uint32_t d3, uint32_t h,
                              uint32_t n_relations) {
  PredictorWeights w;
  w.d1 = d1;
  w.d2 = d2;
  w.d3 = d3;
  w.h = h;
  w.n_relations = n_relations;
  auto dims = w.layer_dims();
  for (int l = 0; l < 3; ++l) {
    uint32_t out = dims[l + 1] * dims[l];
    w.edge_mlp[l].w1.assign(static_cast<size_t>(out) * w.attr_dim(), 0.0);
    w.edge_mlp[l].b1.assign(out, 0.0);
    w.edge_mlp[l].w2.assign(static_cast<size_t>(out) * out, 0.0);
    w.edge_mlp[l].b2.assign(out, 0.0);
  }
  w.c1_w.assign(static_cast<size_t>(h) * d3, 0.0);
  w.c1_b.assign(h, 0.0);
  w.c2_w.assign(3u * h, 0.0);
  w.c2_b.assign(3, 0.0);
  return w;
}

}  // namespace sertier
