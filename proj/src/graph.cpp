#include "fjsp/graph.hpp"

#include <algorithm>
#include <limits>

#include "fjsp/error.hpp"

namespace fjsp {

int HeteroGraph::candidate_index(const Action& a) const {
  auto it = std::lower_bound(candidates.begin(), candidates.end(), a, [this](int idx, const Action& x) {
    const auto& e = edges_compat[idx];
    return Action{e.op, e.machine} < x;
  });
  if (it == candidates.end()) return -1;
  const auto& e = edges_compat[*it];
  return (e.op == a.op && e.machine == a.machine) ? static_cast<int>(it - candidates.begin()) : -1;
}

namespace {

using Triplet = Eigen::Triplet<double>;

// Builds a rows x cols mean-aggregation operator from (dst, src, weight) entries.
SparseRows mean_operator(int rows, int cols, std::vector<Triplet> entries) {
  std::vector<int> degree(rows, 0);
  for (const auto& t : entries) ++degree[t.row()];
  for (auto& t : entries) t = Triplet(t.row(), t.col(), t.value() / degree[t.row()]);
  SparseRows a(rows, cols);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

}  // namespace

void HeteroGraph::finalize() {
  const int n = n_ops();
  const int m = n_machines();
  auto check_op = [n](int o) {
    if (o < 0 || o >= n) throw StructuralError("graph edge references unknown op " + std::to_string(o));
  };
  std::vector<Triplet> job, queue, to_op, to_mach;
  for (auto [src, dst] : edges_job) {
    check_op(src);
    check_op(dst);
    job.emplace_back(dst, src, 1.0);
  }
  for (auto [src, dst] : edges_queue) {
    check_op(src);
    check_op(dst);
    queue.emplace_back(dst, src, 1.0);
  }
  for (const auto& e : edges_compat) {
    check_op(e.op);
    if (e.machine < 0 || e.machine >= m)
      throw StructuralError("graph edge references unknown machine " + std::to_string(e.machine));
    to_op.emplace_back(e.op, e.machine, e.weight);
    to_mach.emplace_back(e.machine, e.op, e.weight);
  }
  for (int c : candidates)
    if (c < 0 || c >= static_cast<int>(edges_compat.size()))
      throw StructuralError("candidate index out of range");
  agg.job = mean_operator(n, n, std::move(job));
  agg.queue = mean_operator(n, n, std::move(queue));
  agg.to_op = mean_operator(n, m, std::move(to_op));
  agg.to_mach = mean_operator(m, n, std::move(to_mach));
}

HeteroGraph encode_state(const SchedulingState& state, const FjspInstance& instance) {
  const int n = instance.n_ops();
  const int m = instance.n_machines();
  const double time_scale = instance.max_base_duration();
  const double job_scale = time_scale * instance.max_job_length();

  // Remaining ticks of each op: expected (machine mean) while unassigned.
  std::vector<double> remaining(n, 0.0);
  for (int o = 0; o < n; ++o) {
    switch (state.status[o]) {
      case OpStatus::Unassigned:
        remaining[o] = instance.mean_duration(o);
        break;
      case OpStatus::Queued:
      case OpStatus::Processing:
        remaining[o] = instance.duration(o, state.solution.assignment[o]) - state.progress[o];
        break;
      case OpStatus::Completed:
        break;
    }
  }

  HeteroGraph g;
  g.op_feats = Eigen::MatrixXd::Zero(n, kOpFeatures);
  g.mach_feats = Eigen::MatrixXd::Zero(m, kMachFeatures);
  for (const auto& chain : instance.jobs()) {
    const int len = static_cast<int>(chain.size());
    double tail = 0.0;  // machine-mean durations of strict successors
    for (int p = len - 1; p >= 0; --p) {
      const int o = chain[p];
      auto row = g.op_feats.row(o);
      row(0) = remaining[o] / time_scale;
      if (state.status[o] == OpStatus::Completed) {
        row(1) = 1.0;
      } else if (state.status[o] != OpStatus::Unassigned) {
        row(1) = static_cast<double>(state.progress[o]) /
                 instance.duration(o, state.solution.assignment[o]);
      }
      row(2) = static_cast<double>(len - 1 - p) / len;
      if (state.status[o] == OpStatus::Queued) row(3) = 1.0;
      if (state.status[o] == OpStatus::Processing) row(4) = 1.0;
      if (state.status[o] == OpStatus::Completed) row(5) = 1.0;
      row(6) = (remaining[o] + tail) / job_scale;
      tail += instance.mean_duration(o);
      if (p > 0) g.edges_job.emplace_back(chain[p - 1], o);
    }
  }
  std::sort(g.edges_job.begin(), g.edges_job.end());

  for (int k = 0; k < m; ++k) {
    const auto& q = state.queues[k];
    g.mach_feats(k, 0) = static_cast<double>(q.size());
    if (!q.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (int o : q) best = std::min(best, remaining[o]);
      g.mach_feats(k, 1) = best / time_scale;
    }
    for (std::size_t i = 1; i < q.size(); ++i) g.edges_queue.emplace_back(q[i - 1], q[i]);
  }

  for (const auto& e : instance.compat()) {
    const OpStatus st = state.status[e.op];
    if (st == OpStatus::Completed) continue;
    if (st != OpStatus::Unassigned && state.solution.assignment[e.op] != e.machine) continue;
    if (st == OpStatus::Unassigned && !state.done())
      g.candidates.push_back(static_cast<int>(g.edges_compat.size()));
    g.edges_compat.push_back({e.op, e.machine, e.weight});
  }
  g.finalize();
  return g;
}

}  // namespace fjsp
