// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <CLI11.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fjsp/baselines.hpp"
#include "fjsp/bench.hpp"
#include "fjsp/env.hpp"
#include "fjsp/graph.hpp"
#include "fjsp/qlearn.hpp"
#include "fjsp/qnetwork.hpp"
#include "support.hpp"

using namespace fjsp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SchedulingState random_state(const FjspInstance& inst, std::mt19937_64& rng) {
  for (;;) {
    auto s = reset(inst);
    const int n = std::uniform_int_distribution<int>(0, inst.n_ops() - 1)(rng);
    for (int i = 0; i < n && !s.done(); ++i) {
      const auto acts = valid_actions(s, inst);
      step(s, inst, acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)]);
    }
    if (!s.done()) return s;
  }
}

// Shared by criteria 3 and 4.
struct EpisodeRecord {
  int n_ops = 0;
  double ret = 0.0;
  int clock = 0;
  Termination termination = Termination::Completed;
};
std::vector<EpisodeRecord> g_episodes;

// Network trained for criterion 7, reused by criterion 9.
std::optional<QNetwork> g_trained;

Verdict oracle_soundness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  int mismatches = 0, unproven = 0;
  for (int t = 0; t < 200; ++t) {
    const auto inst = testing::random_small_instance(rng(), 6);
    const auto r = bnb_solve(inst);
    if (!r.proof) ++unproven;
    if (r.makespan != testing::brute_force_optimum(inst)) ++mismatches;
  }
  const double secs = since(t0);
  return {mismatches == 0 && unproven == 0 && secs < 120.0,
          fmt("200 instances, %d mismatches, %d without proof, %.2fs (limit 120s)", mismatches, unproven, secs)};
}

Verdict decoder_simulator() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto inst = testing::random_small_instance(rng(), 8);
    const auto s = testing::random_feasible_solution(inst, rng);
    const auto sim = simulate_assigned(inst, s);
    if (sim.termination != Termination::Completed || sim.clock != decode(s, inst).makespan) ++mismatches;
  }
  const double secs = since(t0);
  return {mismatches == 0 && secs < 60.0, fmt("1000 solutions, %d mismatches, %.2fs (limit 60s)", mismatches, secs)};
}

Verdict gridlock_equivalence() {
  std::mt19937_64 rng(303);
  int disagree = 0, gridlocks = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto inst = testing::random_small_instance(rng(), 8);
    // A random full action sequence: every op once, random compatible machine.
    std::vector<int> ops(inst.n_ops());
    std::iota(ops.begin(), ops.end(), 0);
    std::shuffle(ops.begin(), ops.end(), rng);
    std::vector<Action> seq;
    for (int o : ops) {
      const auto e = inst.edges_of(o);
      seq.push_back({o, e[std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng)].machine});
    }
    std::optional<Termination> outcome[2];
    const GridlockRule rules[2] = {GridlockRule::Cycle, GridlockRule::NoProgress};
    for (int k = 0; k < 2; ++k) {
      auto s = reset(inst, rules[k]);
      double ret = 0.0;
      std::size_t i = 0;
      while (!s.done()) {
        std::optional<Action> a;
        if (s.n_unassigned > 0) a = seq[i++];
        ret += step(s, inst, a).reward;
      }
      outcome[k] = s.termination;
      g_episodes.push_back({inst.n_ops(), ret, s.clock, *s.termination});
    }
    if (outcome[0] != outcome[1]) ++disagree;
    gridlocks += outcome[0] == Termination::Gridlock;
  }
  return {disagree == 0, fmt("2000 episodes (%d gridlocked), %d disagreements", gridlocks, disagree)};
}

Verdict return_identity() {
  // Episodes of criterion 3 plus epsilon-greedy rollouts of a random network.
  std::mt19937_64 rng(404);
  Rng prng(4);
  const auto params = QParams::random(16, prng);
  for (int t = 0; t < 500; ++t) {
    const auto inst = testing::random_small_instance(rng(), 8);
    Rng r(rng());
    const auto res = rollout(params, 2, inst, 0.3, r);
    g_episodes.push_back({inst.n_ops(), res.stats.ret, res.stats.length, res.stats.termination});
  }
  int completed = 0;
  double worst = 0.0;
  for (const auto& e : g_episodes) {
    if (e.termination != Termination::Completed) continue;
    ++completed;
    worst = std::max(worst, std::abs(e.ret - (e.n_ops - 0.1 * e.clock)));
  }
  return {completed > 0 && worst <= 1e-9, fmt("%d completed episodes, max |error| %.3g (tol 1e-9)", completed, worst)};
}

Verdict gradient_check() {
  std::mt19937_64 rng(505);
  Rng prng(5);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int t = 0; t < 20; ++t) {
    const auto inst = testing::random_small_instance(rng(), 8);
    const auto g = encode_state(random_state(inst, rng), inst);
    QParams p = QParams::random(16, prng);
    Eigen::VectorXd u(g.n_candidates());
    std::normal_distribution<double> nd;
    for (int i = 0; i < u.size(); ++i) u[i] = nd(rng);
    const auto grad = backward(p, forward(p, 2, g), u);
    const double h = 1e-5;
    for (int k = 0; k < QParams::kTensors; ++k)
      for (Eigen::Index i = 0; i < p.tensors[k].size(); ++i) {
        double& x = p.tensors[k].data()[i];
        const double x0 = x;
        x = x0 + h;
        const double up = u.dot(q_values(p, 2, g));
        x = x0 - h;
        const double dn = u.dot(q_values(p, 2, g));
        x = x0;
        const double num = (up - dn) / (2 * h);
        const double ana = grad.tensors[k].data()[i];
        // Relative error, with a 1e-6 floor on the scale for vanishing gradients.
        worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
        ++checked;
      }
  }
  return {worst < 1e-4, fmt("20 graphs, %zu partials, max relative error %.3g (tol 1e-4)", checked, worst)};
}

Verdict permutation_equivariance() {
  std::mt19937_64 rng(606);
  Rng prng(6);
  double worst = 0.0;
  int trials = 0;
  while (trials < 100) {
    const auto inst = testing::random_small_instance(rng(), 8);
    const int n = inst.n_ops(), m = inst.n_machines();
    std::vector<int> po(n), pm(m);
    std::iota(po.begin(), po.end(), 0);
    std::iota(pm.begin(), pm.end(), 0);
    std::shuffle(po.begin(), po.end(), rng);
    std::shuffle(pm.begin(), pm.end(), rng);
    std::vector<std::vector<int>> jobs;
    for (const auto& j : inst.jobs()) {
      jobs.emplace_back();
      for (int o : j) jobs.back().push_back(po[o]);
    }
    std::vector<int> base(n);
    for (int o = 0; o < n; ++o) base[po[o]] = inst.op(o).base_duration;
    std::vector<CompatEdge> compat;
    for (const auto& e : inst.compat()) compat.push_back({po[e.op], pm[e.machine], e.weight});
    const FjspInstance perm(m, jobs, base, compat);

    auto a = reset(inst);
    auto b = reset(perm);
    const int steps = std::uniform_int_distribution<int>(0, n - 1)(rng);
    for (int i = 0; i < steps && !a.done(); ++i) {
      const auto acts = valid_actions(a, inst);
      const auto act = acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)];
      step(a, inst, act);
      step(b, perm, Action{po[act.op], pm[act.machine]});
    }
    if (a.done()) continue;
    ++trials;
    const auto p = QParams::random(16, prng);
    const auto ga = encode_state(a, inst);
    const auto gb = encode_state(b, perm);
    const auto qa = q_values(p, 2, ga);
    const auto qb = q_values(p, 2, gb);
    for (int i = 0; i < ga.n_candidates(); ++i) {
      const auto act = ga.candidate_action(i);
      const int j = gb.candidate_index({po[act.op], pm[act.machine]});
      worst = std::max(worst, j < 0 ? 1e300 : std::abs(qa[i] - qb[j]));
    }
  }
  return {worst <= 1e-9, fmt("100 trials, max |dQ| %.3g (tol 1e-9)", worst)};
}

Verdict desk_learning(const fs::path& workdir) {
  TrainConfig cfg;  // default hyperparameters: 128 / 5000 / 64 x 32 / gamma 1 / eps 0.1 / lr 8e-5
  cfg.epochs = 300;
  cfg.threads = 1;
  cfg.seed = 0;
  cfg.generator.n_jobs = 6;
  cfg.generator.n_machines = 3;
  cfg.generator.avg_ops_per_job = 2.0;

  const auto t0 = Clock::now();
  Trainer trainer(init_training(cfg));
  trainer.run(cfg.epochs);
  const double secs = since(t0);
  const auto& metrics = trainer.state().metrics;
  {
    std::ofstream out(workdir / "desk_metrics.csv");
    write_metrics_csv(out, metrics);
  }
  g_trained = trainer.state().policy;

  // Held-out greedy evaluation against the exact oracle.
  std::vector<FjspInstance> held;
  std::vector<Reference> refs;
  bool exact = true;
  for (int i = 0; i < 64; ++i) {
    held.push_back(generate(cfg.generator, derive_seed(0xACCE97ull, i)));
    const auto r = bnb_solve(held.back());
    exact = exact && r.proof;
    refs.push_back({r.makespan, r.proof});
  }
  const auto eval = evaluate_greedy(g_trained->params(), g_trained->rounds(), held, refs);
  const double gap = eval.mean_gap.value_or(std::numeric_limits<double>::infinity());

  // Fig. 2 signature: relative error missing exactly until the first success.
  std::size_t first = metrics.size();
  for (std::size_t i = 0; i < metrics.size(); ++i)
    if (metrics[i].success_rate > 0.0) {
      first = i;
      break;
    }
  bool signature = true;
  for (std::size_t i = 0; i < metrics.size(); ++i)
    signature = signature && metrics[i].relative_err.has_value() == (metrics[i].success_rate > 0.0);
  for (std::size_t i = 0; i < first; ++i) signature = signature && !metrics[i].relative_err.has_value();

  const bool pass = exact && eval.success_rate >= 0.95 && gap <= 0.15 && secs <= 1800.0 && signature;
  return {pass, fmt("success %.3f (need >= 0.95), mean gap %.4f (need <= 0.15) on 64 held-out 6x3; "
                    "%.0fs (limit 1800s); first success epoch %d; signature %s",
                    eval.success_rate, gap, secs, first < metrics.size() ? metrics[first].epoch : -1,
                    signature ? "ok" : "broken")};
}

Verdict baseline_ordering() {
  GeneratorSpec g;
  g.n_jobs = 6;
  g.n_machines = 3;
  const auto samples = generate_samples({6, 3}, g, 64, 808);
  EvalConfig cfg;
  const auto refs = references_for(samples, cfg);
  const bool exact = std::all_of(refs.begin(), refs.end(), [](const Reference& r) { return r.exact; });
  const char* names[3] = {"fifo", "sa", "bnb"};
  std::vector<double> gaps[3];
  int successes[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto out = solve_instance(SolverSpec::parse(names[k]), samples[i].instance, cfg.solver);
      if (!out.success) continue;
      ++successes[k];
      gaps[k].push_back(optimality_gap(*out.makespan, refs[i].makespan));
    }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::infinity() : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  const double fifo = mean(gaps[0]), sa = mean(gaps[1]), bnb = mean(gaps[2]);
  auto sorted = gaps[1];
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.size() == 64 ? (sorted[31] + sorted[32]) / 2 : 1.0;
  const bool pass = exact && fifo >= sa && sa >= bnb && bnb == 0.0 && successes[0] == 64 && median <= 0.05;
  return {pass, fmt("gap fifo %.4f >= sa %.4f >= bnb %.4f; fifo success %.2f; sa median %.4f (need <= 0.05)", fifo,
                    sa, bnb, successes[0] / 64.0, median)};
}

Verdict protocol_reproduction(const fs::path& workdir) {
  QNetwork net;
  std::string which = "trained";
  if (g_trained) {
    net = *g_trained;
  } else {
    Rng rng(9);
    net = QNetwork(QParams::random(16, rng), 2);
    which = "untrained";
  }
  const auto ckpt = workdir / "bench_net.json";
  save_network(net, ckpt);
  BenchConfig cfg;  // sizes 3x2, 5x3, 8x4
  cfg.samples = 16;
  cfg.seed = 909;
  cfg.solvers.push_back(SolverSpec::parse("dql:" + ckpt.string()));
  const auto rows = run_bench(cfg, &net);
  std::ostringstream csv;
  write_report_csv(csv, rows);
  std::ofstream(workdir / "bench.csv") << csv.str();

  const std::string header = "size,method,mean_gap,success_rate,mean_runtime_s,cstar_source,n_samples";
  const bool schema = csv.str().rfind(header + "\n", 0) == 0;
  std::set<std::string> sizes;
  auto runtime = [&](const std::string& size, const std::string& method) {
    for (const auto& r : rows)
      if (r.size == size && r.method == method) return r.mean_runtime_s;
    return std::numeric_limits<double>::quiet_NaN();
  };
  for (const auto& r : rows) sizes.insert(r.size);
  const double dql = runtime("8x4", "dql") / runtime("3x2", "dql");
  const double bnb = runtime("8x4", "bnb") / runtime("3x2", "bnb");
  const bool pass = schema && sizes == std::set<std::string>{"3x2", "5x3", "8x4"} && rows.size() == 12 && dql < bnb;
  return {pass, fmt("%zu rows, schema %s; runtime ratio 8x4/3x2: dql %.3g < bnb %.3g (%s network)", rows.size(),
                    schema ? "ok" : "wrong", dql, bnb, which.c_str())};
}

Verdict determinism(const fs::path& workdir, const std::string& cli) {
  auto run = [&](const std::string& tag) {
    const std::string cmd = "'" + cli + "' train -q --epochs 5 --seed 11 --threads 1 --metrics '" +
                            (workdir / ("m_" + tag + ".csv")).string() + "' --checkpoint '" +
                            (workdir / ("c_" + tag + ".json")).string() + "' 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  if (!run("a") || !run("b")) return {false, "train command failed"};
  const auto ma = slurp(workdir / "m_a.csv"), mb = slurp(workdir / "m_b.csv");
  const auto ca = slurp(workdir / "c_a.json"), cb = slurp(workdir / "c_b.json");
  const int rows = static_cast<int>(std::count(ma.begin(), ma.end(), '\n')) - 1;
  const bool pass = rows == 5 && ma == mb && ca == cb && !ca.empty();
  return {pass, fmt("metrics %s (%d rows), checkpoints %s (%zu bytes)", ma == mb ? "identical" : "differ", rows,
                    ca == cb ? "identical" : "differ", ca.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string cli = FJSP_CLI_PATH;
  fs::path workdir = fs::temp_directory_path() / "fjsp_acceptance";
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--cli", cli, "Path of the fjsp command-line tool")->capture_default_str();
  app.add_option("--workdir", workdir, "Directory for run artifacts")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"oracle soundness", oracle_soundness},
      {"decoder/simulator equivalence", decoder_simulator},
      {"gridlock equivalence", gridlock_equivalence},
      {"return identity", return_identity},
      {"gradient check", gradient_check},
      {"permutation equivariance", permutation_equivariance},
      {"desk-scale learning", [&] { return desk_learning(workdir); }},
      {"baseline ordering", baseline_ordering},
      {"protocol reproduction", [&] { return protocol_reproduction(workdir); }},
      {"determinism", [&] { return determinism(workdir, cli); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2d %-30s %s  %s\n", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
