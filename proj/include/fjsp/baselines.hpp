#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fjsp/instance.hpp"
#include "fjsp/sched.hpp"

namespace fjsp {

// Ready-op dispatch: at the earliest moment a machine is free and a
// compatible op is released, start the earliest-released op (lowest id on
// ties) on the lowest-id free compatible machine. Never gridlocks.
CandidateSolution fifo_solve(const FjspInstance& instance);

struct SaConfig {
  double initial_temp = 10.0;
  double cooling_rate = 0.9995;
  long steps = 20000;
  double p_reassign = 0.5;  // remainder: swap two adjacent ops in one queue
  std::uint64_t seed = 0;
};

struct SaTraceRow {
  long step = 0;
  int current = 0;
  int best = 0;
  double temperature = 0.0;
};

struct SaResult {
  CandidateSolution solution;
  int makespan = 0;
  std::vector<SaTraceRow> trace;
};

// Simulated annealing seeded with fifo_solve; returns the best solution seen.
SaResult sa_solve(const FjspInstance& instance, const SaConfig& cfg);

void write_sa_trace_csv(std::ostream& out, const std::vector<SaTraceRow>& trace);

struct BnbConfig {
  long node_limit = 50'000'000;
  double time_limit = 120.0;  // seconds
};

struct BnbResult {
  int makespan = 0;
  CandidateSolution solution;
  bool proof = false;  // search exhausted: makespan is optimal
  long nodes = 0;
};

// Depth-first branch-and-bound over chronological extensions. Each child
// appends a ready op to a machine queue; children are generated in
// non-decreasing (start, op id) order, so every semi-active schedule is
// visited at most once. Seeded with the FIFO incumbent.
BnbResult bnb_solve(const FjspInstance& instance, const BnbConfig& cfg = {});

}  // namespace fjsp
