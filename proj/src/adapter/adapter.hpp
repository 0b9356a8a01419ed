#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace sertier {

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

struct TxnSummary {
  uint64_t txn_id = 0;
  std::set<Key> reads;
  std::set<Key> writes;
};

// Workload-graph edge labels. RW and WR are direction-merged; RR only exists
// here, never in serialization graphs.
enum class WorkloadEdgeType : uint8_t { RR = 0, RWWR = 1, WW = 2 };

// G = (V, E, A): per-vertex [read-set size, write-set size], undirected edges
// between transactions whose access sets intersect, and one-hot edge
// attributes [dependency type | relation].
struct WorkloadGraph {
  size_t vertex_count = 0;
  std::vector<std::array<double, 2>> vertex_features;
  std::vector<std::pair<size_t, size_t>> edges;  // i < j, stored once
  std::vector<std::vector<double>> edge_attrs;   // 3 + n_relations per row
  std::vector<std::string> relations;            // one-hot order
};

TxnSummary summarize(const HistoryRecord& rec);

// Uniform reservoir sample over the records, committed and aborted alike;
// deterministic for a fixed seed.
std::vector<TxnSummary> sample_batch(const std::vector<HistoryRecord>& stream, size_t batch_size,
                                     uint64_t seed);

std::vector<std::string> collect_relations(const std::vector<HistoryRecord>& history);

WorkloadGraph build_workload_graph(const std::vector<TxnSummary>& batch,
                                   const std::vector<std::string>& relations);

// Edge-conditioned message passing weights: three layers whose per-edge
// kernels come from a two-layer MLP over the edge attributes, then a
// two-layer classification head. Layout documented in weights_io.
struct PredictorWeights {
  uint32_t d1 = 0, d2 = 0, d3 = 0, h = 0, n_relations = 0;
  struct EdgeMlp {
    std::vector<double> w1, b1;  // (hidden x attr_dim), (hidden)
    std::vector<double> w2, b2;  // (out x hidden), (out)
  };
  std::array<EdgeMlp, 3> edge_mlp;
  std::vector<double> c1_w, c1_b;  // (h x d3), (h)
  std::vector<double> c2_w, c2_b;  // (3 x h), (3)

  uint32_t attr_dim() const { return 3 + n_relations; }
  std::array<uint32_t, 4> layer_dims() const { return {2, d1, d2, d3}; }
  void check_consistent() const;  // throws DimensionMismatch
};

struct Prediction {
  std::array<double, 3> probs{};  // (RC, SI, SER), sums to 1
  IsolationLevel chosen = IsolationLevel::SI;
};

// Eq.-style forward pass: per layer, per-edge kernels W_e = MLP(A_e), node
// update H_v = ReLU(max over neighbors of W_e . H_u), isolated vertices get
// zeros; mean pooling; ReLU affine; softmax. Ties break toward `current`,
// then RC < SI < SER.
Prediction forward(const WorkloadGraph& g, const PredictorWeights& w,
                   IsolationLevel current = IsolationLevel::RC);

struct HeuristicThresholds {
  double density_high = 0.02;
  double write_ratio_high = 0.30;
};

struct WorkloadStats {
  double write_ratio = 0.0;           // write ops / all ops in the batch
  double conflict_edge_density = 0.0; // non-RR edges / possible vertex pairs
};

WorkloadStats workload_stats(const std::vector<TxnSummary>& batch, const WorkloadGraph& g);

// Deterministic fallback predictor: low conflict density -> SI; high density
// with write-heavy traffic -> RC; high density, read-heavy -> SER.
Prediction heuristic_predict(const WorkloadStats& stats, const HeuristicThresholds& thresholds = {});

// Little-endian binary weights file, magic "TXSW".
PredictorWeights load_weights(const std::string& path);
void save_weights(const std::string& path, const PredictorWeights& w);

PredictorWeights zero_weights(uint32_t d1, uint32_t d2, uint32_t d3, uint32_t h,
                              uint32_t n_relations);

}  // namespace sertier
