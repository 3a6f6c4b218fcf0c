#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fjsp/instance.hpp"

namespace fjsp {

inline constexpr int kUnassigned = -1;

// Machine assignment plus per-machine processing order. May be partial:
// unassigned ops carry kUnassigned and appear in no order list.
struct CandidateSolution {
  std::vector<int> assignment;           // op -> machine
  std::vector<std::vector<int>> order;   // machine -> queue

  static CandidateSolution empty(const FjspInstance& instance);
  bool complete() const;
  bool operator==(const CandidateSolution&) const = default;
};

struct Schedule {
  std::vector<int> start;
  std::vector<int> finish;
  int makespan = 0;
};

// Throws StructuralError when assignment and order disagree or an edge is
// not a compatibility edge.
void check_structure(const CandidateSolution& solution, const FjspInstance& instance);

// One cycle of the job-precedence / queue-order digraph over assigned ops, if any.
std::optional<std::vector<int>> find_cycle(const CandidateSolution& solution,
                                           const FjspInstance& instance);

bool is_feasible(const CandidateSolution& solution, const FjspInstance& instance);

// Semi-active schedule of a complete feasible solution. Throws
// InfeasibleError (with a witness cycle) on gridlock.
Schedule decode(const CandidateSolution& solution, const FjspInstance& instance);

inline int makespan(const CandidateSolution& solution, const FjspInstance& instance) {
  return decode(solution, instance).makespan;
}

// max(longest job chain of minimal durations, ceil(total minimal work / machines)).
int makespan_lower_bound(const FjspInstance& instance);

nlohmann::ordered_json to_json(const CandidateSolution& solution);
CandidateSolution solution_from_json(const nlohmann::json& j, const FjspInstance& instance);
void save_solution(const CandidateSolution& solution, const std::filesystem::path& path);
CandidateSolution load_solution(const std::filesystem::path& path, const FjspInstance& instance);

// CSV rows (op, machine, start, finish), one per op in id order.
void write_schedule_csv(std::ostream& out, const CandidateSolution& solution,
                        const Schedule& schedule);

}  // namespace fjsp

namespace fjsp {

// Makespan of a complete, structurally valid solution, or nullopt on a cycle.
// Skips the structural checks of decode(); meant for solver inner loops.
std::optional<int> try_makespan(const CandidateSolution& solution, const FjspInstance& instance);

}  // namespace fjsp
