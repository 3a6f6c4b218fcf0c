#include "fjsp/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "fjsp/error.hpp"
#include "fjsp/rng.hpp"

namespace fjsp {

CandidateSolution fifo_solve(const FjspInstance& instance) {
  const int n = instance.n_ops();
  const int m = instance.n_machines();
  auto sol = CandidateSolution::empty(instance);
  std::vector<int> release(n, -1);  // -1: job predecessor not yet dispatched
  std::vector<int> free_at(m, 0);
  for (const auto& chain : instance.jobs()) release[chain.front()] = 0;

  for (int dispatched = 0; dispatched < n; ++dispatched) {
    int t = std::numeric_limits<int>::max();
    for (int o = 0; o < n; ++o) {
      if (release[o] < 0 || sol.assignment[o] != kUnassigned) continue;
      for (const auto& e : instance.edges_of(o)) t = std::min(t, std::max(release[o], free_at[e.machine]));
    }
    int best_op = -1, best_machine = -1;
    for (int o = 0; o < n; ++o) {
      if (release[o] < 0 || release[o] > t || sol.assignment[o] != kUnassigned) continue;
      if (best_op >= 0 && release[o] >= release[best_op]) continue;
      for (const auto& e : instance.edges_of(o)) {
        if (free_at[e.machine] <= t) {
          best_op = o;
          best_machine = e.machine;
          break;
        }
      }
    }
    sol.assignment[best_op] = best_machine;
    sol.order[best_machine].push_back(best_op);
    const int finish = t + instance.duration(best_op, best_machine);
    free_at[best_machine] = finish;
    const int succ = instance.job_succ(best_op);
    if (succ >= 0) release[succ] = finish;
  }
  return sol;
}

SaResult sa_solve(const FjspInstance& instance, const SaConfig& cfg) {
  if (cfg.steps < 0) throw ParameterError("sa: steps must be >= 0");
  if (!(cfg.cooling_rate > 0.0 && cfg.cooling_rate < 1.0))
    throw ParameterError("sa: cooling rate must lie in (0, 1)");
  if (!(cfg.p_reassign >= 0.0 && cfg.p_reassign <= 1.0))
    throw ParameterError("sa: move probabilities must lie in [0, 1]");
  if (!(cfg.initial_temp > 0.0)) throw ParameterError("sa: initial temperature must be > 0");

  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_op(0, instance.n_ops() - 1);

  SaResult out;
  CandidateSolution current = fifo_solve(instance);
  int current_span = *try_makespan(current, instance);
  out.solution = current;
  out.makespan = current_span;
  double temp = cfg.initial_temp;
  out.trace.reserve(static_cast<std::size_t>(cfg.steps));

  std::vector<int> swappable, others;
  for (long step = 0; step < cfg.steps; ++step) {
    CandidateSolution cand = current;
    bool proposed = false;
    if (unit(rng) < cfg.p_reassign) {
      const int o = pick_op(rng);
      const auto edges = instance.edges_of(o);
      if (edges.size() > 1) {
        const int from = cand.assignment[o];
        others.clear();
        for (const auto& e : edges)
          if (e.machine != from) others.push_back(e.machine);
        std::uniform_int_distribution<int> pick_edge(0, static_cast<int>(others.size()) - 1);
        const int to = others[pick_edge(rng)];
        auto& src = cand.order[from];
        src.erase(std::find(src.begin(), src.end(), o));
        auto& dst = cand.order[to];
        std::uniform_int_distribution<int> pick_pos(0, static_cast<int>(dst.size()));
        dst.insert(dst.begin() + pick_pos(rng), o);
        cand.assignment[o] = to;
        proposed = true;
      }
    } else {
      swappable.clear();
      for (int m = 0; m < instance.n_machines(); ++m)
        if (cand.order[m].size() >= 2) swappable.push_back(m);
      if (!swappable.empty()) {
        std::uniform_int_distribution<int> pick_m(0, static_cast<int>(swappable.size()) - 1);
        auto& q = cand.order[swappable[pick_m(rng)]];
        std::uniform_int_distribution<int> pick_i(0, static_cast<int>(q.size()) - 2);
        const int i = pick_i(rng);
        std::swap(q[i], q[i + 1]);
        proposed = true;
      }
    }
    if (proposed) {
      if (auto span = try_makespan(cand, instance)) {
        const int delta = *span - current_span;
        if (delta <= 0 || unit(rng) < std::exp(-delta / temp)) {
          current = std::move(cand);
          current_span = *span;
          if (current_span < out.makespan) {
            out.makespan = current_span;
            out.solution = current;
          }
        }
      }
    }
    out.trace.push_back({step, current_span, out.makespan, temp});
    temp *= cfg.cooling_rate;
  }
  return out;
}

void write_sa_trace_csv(std::ostream& out, const std::vector<SaTraceRow>& trace) {
  out << "step,current,best,temperature\n";
  for (const auto& r : trace) out << r.step << ',' << r.current << ',' << r.best << ',' << r.temperature << '\n';
}

namespace {

class BranchAndBound {
 public:
  BranchAndBound(const FjspInstance& instance, const BnbConfig& cfg)
      : inst_(instance),
        cfg_(cfg),
        job_next_(instance.n_jobs(), 0),
        job_ready_(instance.n_jobs(), 0),
        job_rest_(instance.n_jobs(), 0),
        mach_free_(instance.n_machines(), 0),
        avail_(instance.n_machines(), 0) {
    for (int j = 0; j < instance.n_jobs(); ++j)
      for (int o : instance.jobs()[j]) {
        job_rest_[j] += instance.min_duration(o);
        work_left_ += instance.min_duration(o);
      }
  }

  BnbResult run() {
    const auto start = std::chrono::steady_clock::now();
    deadline_ = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(cfg_.time_limit));
    best_ = fifo_solve(inst_);
    best_span_ = *try_makespan(best_, inst_);
    root_bound_ = makespan_lower_bound(inst_);
    if (best_span_ > root_bound_) dfs(0);
    return {best_span_, best_, !aborted_, nodes_};
  }

 private:
  struct Child {
    int job, op, machine, start, finish;
  };

  int bound(int last_start) {
    // Every yet-unscheduled op starts no earlier than last_start.
    int lb = cmax_;
    for (int j = 0; j < inst_.n_jobs(); ++j)
      if (job_rest_[j] > 0) lb = std::max(lb, std::max(job_ready_[j], last_start) + job_rest_[j]);
    if (work_left_ > 0) {
      for (int m = 0; m < inst_.n_machines(); ++m) avail_[m] = std::max(mach_free_[m], last_start);
      std::sort(avail_.begin(), avail_.end());
      // Water-filling: smallest T with sum_m max(0, T - avail_m) >= work_left_.
      long sum = 0;
      const int machines = inst_.n_machines();
      for (int k = 1; k <= machines; ++k) {
        sum += avail_[k - 1];
        const long level = (work_left_ + sum + k - 1) / k;
        if (k == machines || level <= avail_[k]) {
          lb = std::max(lb, static_cast<int>(level));
          break;
        }
      }
    }
    return lb;
  }

  void dfs(int depth) {
    if (aborted_) return;
    if (depth == inst_.n_ops()) {
      if (cmax_ < best_span_) {
        best_span_ = cmax_;
        best_ = CandidateSolution::empty(inst_);
        for (const auto& [o, m] : path_) {
          best_.assignment[o] = m;
          best_.order[m].push_back(o);
        }
      }
      return;
    }
    std::vector<Child> children;
    for (int j = 0; j < inst_.n_jobs(); ++j) {
      const auto& chain = inst_.jobs()[j];
      if (job_next_[j] == static_cast<int>(chain.size())) continue;
      const int o = chain[job_next_[j]];
      for (const auto& e : inst_.edges_of(o)) {
        const int s = std::max(job_ready_[j], mach_free_[e.machine]);
        if (s < last_start_ || (s == last_start_ && o < last_op_)) continue;
        children.push_back({j, o, e.machine, s, s + effective_duration(inst_.op(o).base_duration, e.weight)});
      }
    }
    std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
      return std::tie(a.finish, a.start, a.op, a.machine) < std::tie(b.finish, b.start, b.op, b.machine);
    });

    for (const auto& c : children) {
      if (++nodes_ > cfg_.node_limit || ((nodes_ & 1023) == 0 && std::chrono::steady_clock::now() > deadline_)) {
        aborted_ = true;
        return;
      }
      // Apply.
      const int saved_ready = job_ready_[c.job], saved_free = mach_free_[c.machine];
      const int saved_cmax = cmax_, saved_start = last_start_, saved_op = last_op_;
      const int min_d = inst_.min_duration(c.op);
      job_ready_[c.job] = c.finish;
      mach_free_[c.machine] = c.finish;
      ++job_next_[c.job];
      job_rest_[c.job] -= min_d;
      work_left_ -= min_d;
      cmax_ = std::max(cmax_, c.finish);
      last_start_ = c.start;
      last_op_ = c.op;
      path_.emplace_back(c.op, c.machine);

      if (bound(c.start) < best_span_) dfs(depth + 1);

      // Undo.
      path_.pop_back();
      job_ready_[c.job] = saved_ready;
      mach_free_[c.machine] = saved_free;
      --job_next_[c.job];
      job_rest_[c.job] += min_d;
      work_left_ += min_d;
      cmax_ = saved_cmax;
      last_start_ = saved_start;
      last_op_ = saved_op;
      if (aborted_ || best_span_ == root_bound_) return;
    }
  }

  const FjspInstance& inst_;
  BnbConfig cfg_;
  std::vector<int> job_next_, job_ready_, job_rest_, mach_free_, avail_;
  long work_left_ = 0;
  int cmax_ = 0;
  int last_start_ = 0;
  int last_op_ = -1;
  std::vector<std::pair<int, int>> path_;
  CandidateSolution best_;
  int best_span_ = 0;
  int root_bound_ = 0;
  long nodes_ = 0;
  bool aborted_ = false;
  std::chrono::steady_clock::time_point deadline_;
};

}  // namespace

BnbResult bnb_solve(const FjspInstance& instance, const BnbConfig& cfg) {
  if (cfg.node_limit <= 0 || !(cfg.time_limit > 0.0)) throw ParameterError("bnb: limits must be positive");
  return BranchAndBound(instance, cfg).run();
}

}  // namespace fjsp
