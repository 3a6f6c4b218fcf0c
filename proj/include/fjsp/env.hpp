#pragma once

#include <compare>
#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fjsp/instance.hpp"
#include "fjsp/sched.hpp"

namespace fjsp {

enum class OpStatus : char { Unassigned, Queued, Processing, Completed };

enum class Termination : char { Completed, Gridlock, Horizon };

// How an environment decides that an episode has gridlocked.
//   Cycle:      as soon as an assignment closes a precedence cycle.
//   NoProgress: once every op is assigned and a tick passes with no machine busy.
enum class GridlockRule : char { Cycle, NoProgress };

struct Action {
  int op = 0;
  int machine = 0;

  auto operator<=>(const Action&) const = default;
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  std::optional<Termination> termination;
  int n_completed = 0;  // ops completed during this tick
};

inline constexpr double kCompletionReward = 1.0;
inline constexpr double kStepPenalty = -0.1;

struct SchedulingState {
  int clock = 0;
  int horizon = 0;
  GridlockRule rule = GridlockRule::Cycle;
  std::vector<std::deque<int>> queues;  // live queues; completed ops removed
  std::vector<OpStatus> status;
  std::vector<int> progress;
  CandidateSolution solution;  // assignment-so-far and chronological orders
  int n_unassigned = 0;
  int n_completed = 0;
  std::optional<Termination> termination;

  bool done() const { return termination.has_value(); }
  bool operator==(const SchedulingState&) const = default;
};

// Horizon used by reset: N_ops + sum of per-op max effective duration + 1.
int episode_horizon(const FjspInstance& instance);

SchedulingState reset(const FjspInstance& instance, GridlockRule rule = GridlockRule::Cycle);

// Every (unassigned op, compatible machine), ascending (op, machine).
std::vector<Action> valid_actions(const SchedulingState& state, const FjspInstance& instance);

// Advances one tick. `action` is required while unassigned ops exist and must be
// absent (auto-wait) afterwards; anything else is a ContractError.
StepOutcome step(SchedulingState& state, const FjspInstance& instance,
                 std::optional<Action> action);

CandidateSolution extract_solution(const SchedulingState& state);

// Loads the whole solution into the queues at clock 0 (no ticks elapse).
void preload(SchedulingState& state, const FjspInstance& instance,
             const CandidateSolution& solution);

struct SimulationResult {
  Termination termination = Termination::Completed;
  int clock = 0;
};

// Tick-by-tick event simulation of a fully assigned solution.
SimulationResult simulate_assigned(const FjspInstance& instance, const CandidateSolution& solution);

struct TrajectoryRow {
  int t = 0;
  int action_op = -1;  // -1 for auto-wait ticks
  int action_machine = -1;
  double reward = 0.0;
  int n_completed = 0;  // cumulative
};

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

const char* to_string(Termination termination);

}  // namespace fjsp
