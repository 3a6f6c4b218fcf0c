#include "fjsp/env.hpp"

#include <ostream>

#include "fjsp/error.hpp"

namespace fjsp {

int episode_horizon(const FjspInstance& instance) {
  int h = instance.n_ops() + 1;
  for (int o = 0; o < instance.n_ops(); ++o) h += instance.max_duration(o);
  return h;
}

SchedulingState reset(const FjspInstance& instance, GridlockRule rule) {
  SchedulingState s;
  s.horizon = episode_horizon(instance);
  s.rule = rule;
  s.queues.resize(instance.n_machines());
  s.status.assign(instance.n_ops(), OpStatus::Unassigned);
  s.progress.assign(instance.n_ops(), 0);
  s.solution = CandidateSolution::empty(instance);
  s.n_unassigned = instance.n_ops();
  return s;
}

std::vector<Action> valid_actions(const SchedulingState& state, const FjspInstance& instance) {
  std::vector<Action> out;
  if (state.done()) return out;
  for (int o = 0; o < instance.n_ops(); ++o) {
    if (state.status[o] != OpStatus::Unassigned) continue;
    for (const auto& e : instance.edges_of(o)) out.push_back({o, e.machine});
  }
  return out;
}

namespace {

void enqueue(SchedulingState& s, const FjspInstance& instance, const Action& a) {
  if (a.op < 0 || a.op >= instance.n_ops() || s.status[a.op] != OpStatus::Unassigned)
    throw ContractError("action op " + std::to_string(a.op) + " is not an unassigned op");
  if (!instance.compatible(a.op, a.machine))
    throw ContractError("op " + std::to_string(a.op) + " is not compatible with machine " +
                        std::to_string(a.machine));
  s.queues[a.machine].push_back(a.op);
  s.solution.order[a.machine].push_back(a.op);
  s.solution.assignment[a.op] = a.machine;
  s.status[a.op] = OpStatus::Queued;
  --s.n_unassigned;
}

bool ready(const SchedulingState& s, const FjspInstance& instance, int op) {
  const int p = instance.job_pred(op);
  return p < 0 || s.status[p] == OpStatus::Completed;
}

}  // namespace

StepOutcome step(SchedulingState& s, const FjspInstance& instance, std::optional<Action> action) {
  if (s.done()) throw ContractError("step called on a terminated episode");
  bool cycle = false;
  if (action) {
    enqueue(s, instance, *action);
    if (s.rule == GridlockRule::Cycle) cycle = !is_feasible(s.solution, instance);
  } else if (s.n_unassigned > 0) {
    throw ContractError("wait is only allowed once every op is assigned");
  }

  // Readiness is evaluated against the state at the start of the tick.
  bool busy = false;
  std::vector<int> finished;
  for (int m = 0; m < instance.n_machines(); ++m) {
    if (s.queues[m].empty()) continue;
    const int head = s.queues[m].front();
    if (!ready(s, instance, head)) continue;
    busy = true;
    s.status[head] = OpStatus::Processing;
    if (++s.progress[head] == instance.duration(head, m)) finished.push_back(head);
  }
  for (int o : finished) {
    s.status[o] = OpStatus::Completed;
    s.queues[s.solution.assignment[o]].pop_front();
  }
  ++s.clock;
  s.n_completed += static_cast<int>(finished.size());

  StepOutcome out;
  out.n_completed = static_cast<int>(finished.size());
  out.reward = kCompletionReward * out.n_completed + kStepPenalty;
  if (s.n_completed == instance.n_ops()) {
    s.termination = Termination::Completed;
  } else if (cycle || (s.rule == GridlockRule::NoProgress && s.n_unassigned == 0 && !busy)) {
    s.termination = Termination::Gridlock;
  } else if (s.clock >= s.horizon) {
    s.termination = Termination::Horizon;
  }
  out.termination = s.termination;
  out.done = s.done();
  return out;
}

CandidateSolution extract_solution(const SchedulingState& state) {
  if (state.n_unassigned != 0)
    throw ContractError("extract_solution requires every op to be assigned");
  return state.solution;
}

void preload(SchedulingState& s, const FjspInstance& instance, const CandidateSolution& solution) {
  check_structure(solution, instance);
  if (!solution.complete()) throw StructuralError("preload requires a complete solution");
  for (int m = 0; m < instance.n_machines(); ++m)
    for (int o : solution.order[m]) enqueue(s, instance, {o, m});
}

SimulationResult simulate_assigned(const FjspInstance& instance, const CandidateSolution& solution) {
  auto s = reset(instance, GridlockRule::NoProgress);
  preload(s, instance, solution);
  while (!s.done()) step(s, instance, std::nullopt);
  return {*s.termination, s.clock};
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "t,action_op,action_machine,reward,n_completed\n";
  for (const auto& r : rows) {
    out << r.t << ',';
    if (r.action_op >= 0) out << r.action_op;
    out << ',';
    if (r.action_machine >= 0) out << r.action_machine;
    out << ',' << r.reward << ',' << r.n_completed << '\n';
  }
}

const char* to_string(Termination termination) {
  switch (termination) {
    case Termination::Completed:
      return "completed";
    case Termination::Gridlock:
      return "gridlock";
    case Termination::Horizon:
      return "horizon";
  }
  return "unknown";
}

}  // namespace fjsp
