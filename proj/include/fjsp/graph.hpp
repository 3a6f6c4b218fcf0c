#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "fjsp/env.hpp"
#include "fjsp/instance.hpp"

namespace fjsp {

inline constexpr int kOpFeatures = 7;
inline constexpr int kMachFeatures = 2;
inline constexpr int kFeatureSchemaVersion = 1;

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct CompatTriple {
  int op = 0;
  int machine = 0;
  double weight = 1.0;

  bool operator==(const CompatTriple&) const = default;
};

// Row-normalised neighbour aggregation operators, one per relation. Row u of
// each holds w_vu / |N_r(u)| at column v, so `A * H` is the weighted
// neighbour mean (zero rows for nodes without neighbours).
struct Aggregators {
  SparseRows job;      // op <- op, along job precedence
  SparseRows queue;    // op <- op, along current queue order
  SparseRows to_op;    // op <- machine, compat edges
  SparseRows to_mach;  // machine <- op, compat edges
};

// Typed state graph fed to the Q-network.
//   op features:   remaining time, completion, downstream share, one-hot
//                  {queued, processing, completed}, remaining job time
//   mach features: queue length, min remaining runtime of queued ops
// Compat edges cover every edge of unassigned ops and the chosen edge of
// queued / processing ops. `candidates` indexes the compat edges of
// unassigned ops in ascending (op, machine) order, matching valid_actions.
struct HeteroGraph {
  Eigen::MatrixXd op_feats;
  Eigen::MatrixXd mach_feats;
  std::vector<std::pair<int, int>> edges_job;
  std::vector<std::pair<int, int>> edges_queue;
  std::vector<CompatTriple> edges_compat;
  std::vector<int> candidates;
  Aggregators agg;

  int n_ops() const { return static_cast<int>(op_feats.rows()); }
  int n_machines() const { return static_cast<int>(mach_feats.rows()); }
  int n_candidates() const { return static_cast<int>(candidates.size()); }
  Action candidate_action(int i) const {
    const auto& e = edges_compat[candidates[i]];
    return {e.op, e.machine};
  }
  // Index of `a` among candidates, or -1.
  int candidate_index(const Action& a) const;

  // Rebuilds `agg` from the edge lists. Throws StructuralError on bad indices.
  void finalize();
};

HeteroGraph encode_state(const SchedulingState& state, const FjspInstance& instance);

}  // namespace fjsp
