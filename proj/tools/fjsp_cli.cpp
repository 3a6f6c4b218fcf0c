#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fjsp/bench.hpp"
#include "fjsp/error.hpp"
#include "fjsp/parallel.hpp"
#include "fjsp/qlearn.hpp"
#include "fjsp/rng.hpp"

namespace fs = std::filesystem;
using namespace fjsp;

namespace {

void add_generator_options(CLI::App* app, GeneratorSpec& g) {
  app->add_option("--jobs", g.n_jobs, "Jobs per instance")->capture_default_str();
  app->add_option("--machines", g.n_machines, "Machines per instance")->capture_default_str();
  app->add_option("--ops-per-job", g.avg_ops_per_job, "Mean operations per job")->capture_default_str();
  app->add_option("--drop", g.drop_fraction, "Probability of dropping a compatibility edge")->capture_default_str();
  app->add_option("--duration-lo", g.duration_lo)->capture_default_str();
  app->add_option("--duration-hi", g.duration_hi)->capture_default_str();
  app->add_option("--weight-lo", g.weight_lo)->capture_default_str();
  app->add_option("--weight-hi", g.weight_hi)->capture_default_str();
}

void add_solver_options(CLI::App* app, SolverOptions& o) {
  app->add_option("--sa-steps", o.sa.steps)->capture_default_str();
  app->add_option("--sa-temp", o.sa.initial_temp)->capture_default_str();
  app->add_option("--sa-cooling", o.sa.cooling_rate)->capture_default_str();
  app->add_option("--sa-reassign", o.sa.p_reassign, "Probability of a reassign move")->capture_default_str();
  app->add_option("--sa-seed", o.sa.seed)->capture_default_str();
  app->add_option("--bnb-nodes", o.bnb.node_limit, "B&B node budget")->capture_default_str();
  app->add_option("--bnb-time", o.bnb.time_limit, "B&B time budget in seconds")->capture_default_str();
}

int resolve_threads(int flag) { return flag > 0 ? flag : default_threads(); }

// Hash over every non-path setting, defaults included.
std::uint64_t config_hash(const CLI::App* app) {
  static const std::vector<std::string> skip = {"output", "metrics", "checkpoint", "checkpoint-every", "resume",
                                                "csv", "solution", "schedule", "trace", "config", "quiet", "threads"};
  std::istringstream in(app->config_to_str(true, false));
  std::string canonical, line;
  while (std::getline(in, line)) {
    const std::string key = line.substr(0, line.find('='));
    if (std::find(skip.begin(), skip.end(), key) == skip.end()) canonical += line + '\n';
  }
  return fnv1a64(canonical);
}

void log_run(std::uint64_t seed, const CLI::App* app) {
  const std::uint64_t hash = config_hash(app);
  std::fprintf(stderr, "seed=%llu config_hash=%016llx\n", static_cast<unsigned long long>(seed),
               static_cast<unsigned long long>(hash));
}

void log_network(const QNetwork& net) {
  std::fprintf(stderr, "parameters=%zu d=%d k=%d\n", net.parameter_count(), net.dim(), net.rounds());
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path.string());
  return out;
}

void write_metrics_file(const fs::path& path, const std::vector<EpochMetrics>& rows) {
  auto out = open_out(path);
  write_metrics_csv(out, rows);
}

std::optional<QNetwork> network_for(const std::vector<SolverSpec>& solvers) {
  for (const auto& s : solvers) {
    if (s.kind != SolverKind::Dql) continue;
    QNetwork net = load_network(s.checkpoint);
    log_network(net);
    return net;
  }
  return std::nullopt;
}

std::vector<SolverSpec> parse_solvers(const std::vector<std::string>& names) {
  std::vector<SolverSpec> out;
  for (const auto& n : names) out.push_back(SolverSpec::parse(n));
  // One network per invocation keeps the parameter-count log unambiguous.
  int dql = 0;
  for (const auto& s : out) dql += s.kind == SolverKind::Dql;
  if (dql > 1) throw ParameterError("at most one dql solver per run");
  return out;
}

void emit_report(const std::vector<GapRow>& rows, const fs::path& csv) {
  auto out = open_out(csv);
  write_report_csv(out, rows);
  write_report_table(std::cout, rows);
}

// gen ------------------------------------------------------------------------

struct GenArgs {
  GeneratorSpec generator;
  std::uint64_t seed = 0;
  int count = 1;
  fs::path output;
};

void run_gen(const GenArgs& a, const CLI::App* app) {
  log_run(a.seed, app);
  if (a.count < 1) throw ParameterError("--count must be >= 1");
  if (a.count == 1) {
    save_instance(generate(a.generator, a.seed), a.output);
    return;
  }
  fs::create_directories(a.output);
  for (int i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "inst_%04d.json", i);
    save_instance(generate(a.generator, derive_seed(a.seed, i)), a.output / name);
  }
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  TrainConfig cfg;
  int threads = 0;
  fs::path metrics = "metrics.csv";
  fs::path checkpoint = "checkpoint.json";
  int checkpoint_every = 0;
  std::optional<fs::path> resume;
  bool quiet = false;
};

void run_train(TrainArgs a, const CLI::App* app, const CLI::Option* epochs_opt) {
  TrainState state;
  if (a.resume) {
    state = load_checkpoint(*a.resume);
    if (epochs_opt->count() > 0) state.config.epochs = a.cfg.epochs;
  } else {
    a.cfg.validate();
    state = init_training(a.cfg);
  }
  state.config.threads = resolve_threads(a.threads);
  log_run(state.config.seed, app);
  log_network(state.policy);

  Trainer trainer(std::move(state));
  if (!trainer.eval_exact()) std::fprintf(stderr, "note: eval references are best-known, not exact\n");
  const int target = trainer.state().config.epochs;
  try {
    trainer.run(target, [&](const EpochMetrics& m) {
      if (!a.quiet)
        std::fprintf(stderr, "epoch %d loss %.6g r_train %.4f r_eval %.4f success %.3f\n", m.epoch, m.loss,
                     m.r_train, m.r_eval, m.success_rate);
      write_metrics_file(a.metrics, trainer.state().metrics);
      if (a.checkpoint_every > 0 && m.epoch % a.checkpoint_every == 0 && m.epoch < target)
        save_checkpoint(trainer.state(), a.checkpoint);
    });
  } catch (const TrainingError&) {
    fs::path diag = a.checkpoint;
    diag += ".diag.json";
    save_checkpoint(trainer.state(), diag);
    std::fprintf(stderr, "diagnostic checkpoint written to %s\n", diag.string().c_str());
    throw;
  }
  write_metrics_file(a.metrics, trainer.state().metrics);
  save_checkpoint(trainer.state(), a.checkpoint);
}

// solve ----------------------------------------------------------------------

struct SolveArgs {
  fs::path instance;
  std::string solver = "bnb";
  SolverOptions options;
  std::optional<fs::path> solution;
  std::optional<fs::path> schedule;
  std::optional<fs::path> trace;
};

void run_solve(const SolveArgs& a, const CLI::App* app) {
  const SolverSpec spec = SolverSpec::parse(a.solver);
  log_run(a.options.sa.seed, app);
  const FjspInstance inst = load_instance(a.instance);
  const auto net = network_for({spec});
  const bool traces = a.trace.has_value();
  const SolveOutcome out = solve_instance(spec, inst, a.options, net ? &*net : nullptr, traces);

  if (out.solution && a.solution) save_solution(*out.solution, *a.solution);
  if (out.success && a.schedule) {
    auto f = open_out(*a.schedule);
    write_schedule_csv(f, *out.solution, decode(*out.solution, inst));
  }
  if (a.trace) {
    auto f = open_out(*a.trace);
    if (spec.kind == SolverKind::Sa) write_sa_trace_csv(f, out.sa_trace);
    else if (spec.kind == SolverKind::Dql) write_trajectory_csv(f, out.trajectory);
  }
  std::cout << "solver=" << spec.method() << " success=" << (out.success ? "true" : "false");
  if (out.makespan) std::cout << " makespan=" << *out.makespan;
  std::cout << " proof=" << (out.proof ? "true" : "false") << " runtime_s=" << out.seconds << '\n';
}

// eval / bench -----------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> solvers = {"fifo"};
  std::vector<std::string> files;
  std::vector<std::string> sizes;
  int samples = 16;
  std::uint64_t seed = 0;
  GeneratorSpec generator;
  SolverOptions options;
  int oracle_max_ops = 16;
  int threads = 0;
  fs::path csv = "eval.csv";
};

void run_eval(const EvalArgs& a, const CLI::App* app) {
  log_run(a.seed, app);
  const auto solvers = parse_solvers(a.solvers);
  const auto net = network_for(solvers);
  EvalConfig ec{a.options, a.oracle_max_ops, resolve_threads(a.threads)};

  // Groups keyed by size label, in first-seen order.
  std::vector<std::pair<std::string, std::vector<EvalSample>>> groups;
  auto group = [&](const std::string& label) -> std::vector<EvalSample>& {
    for (auto& g : groups)
      if (g.first == label) return g.second;
    return groups.emplace_back(label, std::vector<EvalSample>{}).second;
  };
  for (const auto& f : a.files) {
    FjspInstance inst = load_instance(f);
    const std::string label = SizeSpec{inst.n_jobs(), inst.n_machines()}.label();
    group(label).push_back({std::move(inst), fs::path(f)});
  }
  for (const auto& s : a.sizes) {
    const SizeSpec size = SizeSpec::parse(s);
    auto gen = generate_samples(size, a.generator, a.samples, a.seed);
    auto& dst = group(size.label());
    for (auto& g : gen) dst.push_back(std::move(g));
  }
  if (groups.empty()) throw ParameterError("eval needs instance files or --sizes");

  std::vector<GapRow> rows;
  for (auto& [label, samples] : groups) {
    auto refs = references_for(samples, ec);
    for (const auto& s : solvers) rows.push_back(evaluate(s, label, samples, refs, ec, net ? &*net : nullptr));
  }
  emit_report(rows, a.csv);
}

struct BenchArgs {
  std::vector<std::string> solvers = {"fifo", "sa", "bnb"};
  std::optional<std::string> dql;
  std::vector<std::string> sizes = {"3x2", "5x3", "8x4"};
  int samples = 16;
  std::uint64_t seed = 0;
  GeneratorSpec generator;
  SolverOptions options;
  int oracle_max_ops = 16;
  int threads = 0;
  fs::path csv = "bench.csv";
};

void run_bench_cmd(const BenchArgs& a, const CLI::App* app) {
  log_run(a.seed, app);
  BenchConfig bc;
  bc.sizes.clear();
  for (const auto& s : a.sizes) bc.sizes.push_back(SizeSpec::parse(s));
  bc.samples = a.samples;
  bc.seed = a.seed;
  bc.generator = a.generator;
  auto names = a.solvers;
  if (a.dql) names.push_back("dql:" + *a.dql);
  bc.solvers = parse_solvers(names);
  bc.eval = EvalConfig{a.options, a.oracle_max_ops, resolve_threads(a.threads)};
  const auto net = network_for(bc.solvers);
  emit_report(run_bench(bc, net ? &*net : nullptr), a.csv);
}

// Expands `--config FILE` into flags placed right after the subcommand.
// Keys given on the command line are dropped from the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> file;
  std::vector<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) file = args[i + 1];
    else if (a.rfind("--config=", 0) == 0) file = a.substr(9);
    if (a.rfind("--", 0) == 0) given.push_back(a.substr(2, a.find('=') - 2));
  }
  if (!file || args.size() < 2) return args;
  std::ifstream in(*file);
  if (!in) throw ParameterError("cannot read config " + *file);
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : t.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(*file + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config" || std::find(given.begin(), given.end(), key) != given.end()) continue;
    extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible job-shop scheduling: generator, DQN trainer, solvers and benchmarks"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_file;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write generated instance files");
  gen_cmd->add_option("--config", config_file, "Flat key=value file with the same keys as the flags");
  add_generator_options(gen_cmd, gen.generator);
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Instances; more than one makes -o a directory")->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.output)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the Q-network and write checkpoints and metrics");
  train_cmd->add_option("--config", config_file, "Flat key=value file with the same keys as the flags");
  add_generator_options(train_cmd, tr.cfg.generator);
  auto* epochs_opt = train_cmd->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--trajectories", tr.cfg.trajectories_per_epoch, "Rollouts per epoch")->capture_default_str();
  train_cmd->add_option("--iters", tr.cfg.train_iters_per_epoch, "Gradient steps per epoch")->capture_default_str();
  train_cmd->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--gamma", tr.cfg.gamma)->capture_default_str();
  train_cmd->add_option("--epsilon", tr.cfg.epsilon)->capture_default_str();
  train_cmd->add_option("--lr", tr.cfg.lr)->capture_default_str();
  train_cmd->add_option("--sync", tr.cfg.target_sync_period, "Epochs between target syncs")->capture_default_str();
  train_cmd->add_option("--buffer", tr.cfg.buffer_capacity)->capture_default_str();
  train_cmd->add_option("--dim", tr.cfg.dim)->capture_default_str();
  train_cmd->add_option("--rounds", tr.cfg.rounds)->capture_default_str();
  train_cmd->add_option("--eval-episodes", tr.cfg.eval_episodes)->capture_default_str();
  train_cmd->add_option("--oracle-max-ops", tr.cfg.oracle_max_ops)->capture_default_str();
  train_cmd->add_option("--oracle-nodes", tr.cfg.oracle.node_limit)->capture_default_str();
  train_cmd->add_option("--oracle-time", tr.cfg.oracle.time_limit)->capture_default_str();
  train_cmd->add_option("--seed", tr.cfg.seed)->capture_default_str();
  train_cmd->add_option("--threads", tr.threads, "Workers; 0 uses FJSP_THREADS or all cores")->capture_default_str();
  train_cmd->add_option("--metrics", tr.metrics)->capture_default_str();
  train_cmd->add_option("--checkpoint", tr.checkpoint)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Epochs between intermediate checkpoints")
      ->capture_default_str();
  train_cmd->add_option("--resume", tr.resume, "Continue from a training checkpoint");
  train_cmd->add_flag("-q,--quiet", tr.quiet);

  SolveArgs so;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance file");
  solve_cmd->add_option("--config", config_file, "Flat key=value file with the same keys as the flags");
  solve_cmd->add_option("instance", so.instance)->required();
  solve_cmd->add_option("--solver", so.solver, "fifo, sa, bnb or dql:<checkpoint>")->capture_default_str();
  add_solver_options(solve_cmd, so.options);
  solve_cmd->add_option("--solution", so.solution, "Solution JSON output");
  solve_cmd->add_option("--schedule", so.schedule, "Schedule CSV output");
  solve_cmd->add_option("--trace", so.trace, "SA trace or DQL trajectory CSV output");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Gap report for solvers on instance files or generated sizes");
  eval_cmd->add_option("--config", config_file, "Flat key=value file with the same keys as the flags");
  eval_cmd->add_option("files", ev.files, "Instance files");
  eval_cmd->add_option("--solver", ev.solvers, "fifo, sa, bnb or dql:<checkpoint>; repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->capture_default_str();
  eval_cmd->add_option("--sizes", ev.sizes, "Generated sizes such as 5x3")->delimiter(',');
  eval_cmd->add_option("--samples", ev.samples)->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  add_generator_options(eval_cmd, ev.generator);
  add_solver_options(eval_cmd, ev.options);
  eval_cmd->add_option("--oracle-max-ops", ev.oracle_max_ops)->capture_default_str();
  eval_cmd->add_option("--threads", ev.threads)->capture_default_str();
  eval_cmd->add_option("--csv", ev.csv)->capture_default_str();

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Size-ladder report across solvers");
  bench_cmd->add_option("--config", config_file, "Flat key=value file with the same keys as the flags");
  bench_cmd->add_option("--solver", be.solvers, "Baselines to run; repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->capture_default_str();
  bench_cmd->add_option("--dql", be.dql, "Checkpoint of a trained network to include");
  bench_cmd->add_option("--sizes", be.sizes)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--samples", be.samples)->capture_default_str();
  bench_cmd->add_option("--seed", be.seed)->capture_default_str();
  add_generator_options(bench_cmd, be.generator);
  add_solver_options(bench_cmd, be.options);
  bench_cmd->add_option("--oracle-max-ops", be.oracle_max_ops)->capture_default_str();
  bench_cmd->add_option("--threads", be.threads)->capture_default_str();
  bench_cmd->add_option("--csv", be.csv)->capture_default_str();

  try {
    std::vector<std::string> args;
    try {
      args = expand_config({argv, argv + argc});
    } catch (const Error& e) {
      std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
      return 1;
    }
    // CLI11 takes the arguments in reverse order, program name excluded.
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) run_gen(gen, gen_cmd);
    else if (*train_cmd) run_train(tr, train_cmd, epochs_opt);
    else if (*solve_cmd) run_solve(so, solve_cmd);
    else if (*eval_cmd) run_eval(ev, eval_cmd);
    else if (*bench_cmd) run_bench_cmd(be, bench_cmd);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
