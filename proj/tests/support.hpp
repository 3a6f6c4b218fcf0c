#pragma once

// Fixtures and independent reference implementations shared by the tests.
// Nothing here calls the code under test except instance construction.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "fjsp/instance.hpp"
#include "fjsp/sched.hpp"

namespace fjsp::testing {

// Two machines; J0 = o0 -> o1, J1 = o2. Bases 2, 3, 2. All weights 1 except
// o0 on M1 (weight 2, duration 4). o1 runs only on M1.
inline FjspInstance make_i1() {
  return FjspInstance(2, {{0, 1}, {2}}, {2, 3, 2},
                      {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 1.0}, {2, 0, 1.0}, {2, 1, 1.0}});
}

inline CandidateSolution solution_from(int n_ops, int n_machines, const std::vector<std::vector<int>>& order) {
  CandidateSolution s;
  s.assignment.assign(n_ops, kUnassigned);
  s.order = order;
  s.order.resize(n_machines);
  for (int m = 0; m < n_machines; ++m)
    for (int o : s.order[m]) s.assignment[o] = m;
  return s;
}

// Semi-active makespan by Bellman-style relaxation; nullopt on a cycle.
inline std::optional<int> reference_makespan(const FjspInstance& inst, const CandidateSolution& s) {
  const int n = inst.n_ops();
  std::vector<int> job_pred(n, -1), queue_pred(n, -1);
  for (const auto& job : inst.jobs())
    for (std::size_t i = 1; i < job.size(); ++i) job_pred[job[i]] = job[i - 1];
  for (const auto& q : s.order)
    for (std::size_t i = 1; i < q.size(); ++i) queue_pred[q[i]] = q[i - 1];
  std::vector<int> dur(n), start(n, 0);
  for (int o = 0; o < n; ++o) dur[o] = inst.duration(o, s.assignment[o]);
  for (int pass = 0; pass <= n; ++pass) {
    bool changed = false;
    for (int o = 0; o < n; ++o) {
      int t = 0;
      if (job_pred[o] >= 0) t = std::max(t, start[job_pred[o]] + dur[job_pred[o]]);
      if (queue_pred[o] >= 0) t = std::max(t, start[queue_pred[o]] + dur[queue_pred[o]]);
      if (t != start[o]) {
        start[o] = t;
        changed = true;
      }
    }
    if (!changed) {
      int ms = 0;
      for (int o = 0; o < n; ++o) ms = std::max(ms, start[o] + dur[o]);
      return ms;
    }
  }
  return std::nullopt;
}

// Calls fn(solution) for every complete (assignment, queue order) pair.
template <typename Fn>
void for_each_solution(const FjspInstance& inst, Fn&& fn) {
  const int n = inst.n_ops();
  std::vector<int> assign(n, 0);
  auto orders = [&](auto&& self, std::vector<std::vector<int>>& order, int m) -> void {
    if (m == inst.n_machines()) {
      fn(solution_from(n, inst.n_machines(), order));
      return;
    }
    std::vector<int>& q = order[m];
    std::sort(q.begin(), q.end());
    do self(self, order, m + 1);
    while (std::next_permutation(q.begin(), q.end()));
  };
  auto assignments = [&](auto&& self, int o) -> void {
    if (o == n) {
      std::vector<std::vector<int>> order(inst.n_machines());
      for (int i = 0; i < n; ++i) order[assign[i]].push_back(i);
      orders(orders, order, 0);
      return;
    }
    for (const auto& e : inst.edges_of(o)) {
      assign[o] = e.machine;
      self(self, o + 1);
    }
  };
  assignments(assignments, 0);
}

inline int brute_force_optimum(const FjspInstance& inst) {
  int best = std::numeric_limits<int>::max();
  for_each_solution(inst, [&](const CandidateSolution& s) {
    if (auto ms = reference_makespan(inst, s)) best = std::min(best, *ms);
  });
  return best;
}

// Random instance with at most `max_ops` operations.
inline FjspInstance random_small_instance(std::uint64_t seed, int max_ops, int max_machines = 3) {
  std::mt19937_64 rng(seed);
  GeneratorSpec g;
  g.n_machines = std::uniform_int_distribution<int>(1, max_machines)(rng);
  const int n_ops = std::uniform_int_distribution<int>(1, max_ops)(rng);
  g.n_jobs = std::uniform_int_distribution<int>(1, std::min(3, n_ops))(rng);
  g.avg_ops_per_job = static_cast<double>(n_ops) / g.n_jobs;
  return generate(g, rng());
}

// Random complete solution that may or may not be feasible.
inline CandidateSolution random_solution(const FjspInstance& inst, std::mt19937_64& rng) {
  std::vector<std::vector<int>> order(inst.n_machines());
  std::vector<int> ops(inst.n_ops());
  for (int i = 0; i < inst.n_ops(); ++i) ops[i] = i;
  std::shuffle(ops.begin(), ops.end(), rng);
  for (int o : ops) {
    const auto edges = inst.edges_of(o);
    const auto& e = edges[std::uniform_int_distribution<std::size_t>(0, edges.size() - 1)(rng)];
    order[e.machine].push_back(o);
  }
  return solution_from(inst.n_ops(), inst.n_machines(), order);
}

// Random feasible solution: ops appended in a topological order of the jobs.
inline CandidateSolution random_feasible_solution(const FjspInstance& inst, std::mt19937_64& rng) {
  std::vector<std::size_t> next(inst.n_jobs(), 0);
  std::vector<std::vector<int>> order(inst.n_machines());
  for (int left = inst.n_ops(); left > 0; --left) {
    std::vector<int> open;
    for (int j = 0; j < inst.n_jobs(); ++j)
      if (next[j] < inst.jobs()[j].size()) open.push_back(j);
    const int j = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    const int o = inst.jobs()[j][next[j]++];
    const auto edges = inst.edges_of(o);
    order[edges[std::uniform_int_distribution<std::size_t>(0, edges.size() - 1)(rng)].machine].push_back(o);
  }
  return solution_from(inst.n_ops(), inst.n_machines(), order);
}

}  // namespace fjsp::testing
