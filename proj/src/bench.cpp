#include "fjsp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fjsp/error.hpp"
#include "fjsp/parallel.hpp"

namespace fjsp {

SolverSpec SolverSpec::parse(const std::string& text) {
  if (text == "fifo") return {SolverKind::Fifo, {}};
  if (text == "sa") return {SolverKind::Sa, {}};
  if (text == "bnb") return {SolverKind::Bnb, {}};
  if (text.rfind("dql:", 0) == 0 && text.size() > 4) return {SolverKind::Dql, text.substr(4)};
  throw ParameterError("unknown solver '" + text + "' (expected fifo, sa, bnb or dql:<checkpoint>)");
}

std::string SolverSpec::method() const {
  switch (kind) {
    case SolverKind::Fifo:
      return "fifo";
    case SolverKind::Sa:
      return "sa";
    case SolverKind::Bnb:
      return "bnb";
    case SolverKind::Dql:
      return "dql";
  }
  return "unknown";
}

SolveOutcome solve_instance(const SolverSpec& solver, const FjspInstance& instance, const SolverOptions& opts,
                            const QNetwork* net, bool record_traces) {
  using Clock = std::chrono::steady_clock;
  SolveOutcome out;
  const auto t0 = Clock::now();
  switch (solver.kind) {
    case SolverKind::Fifo:
      out.solution = fifo_solve(instance);
      break;
    case SolverKind::Sa: {
      auto r = sa_solve(instance, opts.sa);
      out.solution = std::move(r.solution);
      if (record_traces) out.sa_trace = std::move(r.trace);
      break;
    }
    case SolverKind::Bnb: {
      auto r = bnb_solve(instance, opts.bnb);
      out.solution = std::move(r.solution);
      out.proof = r.proof;
      break;
    }
    case SolverKind::Dql: {
      if (net == nullptr) throw ParameterError("dql solver requires a loaded network");
      Rng unused(0);
      auto r = rollout(net->params(), net->rounds(), instance, 0.0, unused, record_traces);
      out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      out.solution = std::move(r.solution);
      out.success = r.stats.success;
      out.makespan = r.stats.makespan;
      out.trajectory = std::move(r.rows);
      return out;
    }
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  out.makespan = decode(*out.solution, instance).makespan;
  out.success = true;
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& instance_file) {
  auto p = instance_file;
  p += ".best.json";
  return p;
}

std::optional<Reference> read_sidecar(const std::filesystem::path& instance_file) {
  std::ifstream in(sidecar_path(instance_file));
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return Reference{j.at("makespan").get<int>(), j.at("source").get<std::string>() == "exact"};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar_path(instance_file).string() + ": " + e.what());
  }
}

void write_sidecar(const std::filesystem::path& instance_file, const Reference& ref) {
  std::ofstream out(sidecar_path(instance_file));
  if (!out) throw ParameterError("cannot write " + sidecar_path(instance_file).string());
  nlohmann::ordered_json j;
  j["makespan"] = ref.makespan;
  j["source"] = ref.exact ? "exact" : "best-known";
  out << j.dump(2) << '\n';
}

std::vector<Reference> references_for(const std::vector<EvalSample>& samples, const EvalConfig& cfg) {
  std::vector<Reference> refs(samples.size());
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
    if (samples[i].file) {
      if (auto cached = read_sidecar(*samples[i].file)) {
        refs[i] = *cached;
        return;
      }
    }
    refs[i] = reference_makespan(samples[i].instance, cfg.oracle_max_ops, cfg.solver.bnb, cfg.solver.sa);
    if (samples[i].file) write_sidecar(*samples[i].file, refs[i]);
  });
  return refs;
}

GapRow evaluate(const SolverSpec& solver, const std::string& size_label, const std::vector<EvalSample>& samples,
                std::vector<Reference>& refs, const EvalConfig& cfg, const QNetwork* net) {
  if (samples.empty()) throw ParameterError("evaluate: empty instance set");
  if (refs.size() != samples.size()) throw ParameterError("evaluate: reference count mismatch");
  std::vector<SolveOutcome> outcomes(samples.size());
  parallel_for(samples.size(), cfg.threads,
               [&](std::size_t i) { outcomes[i] = solve_instance(solver, samples[i].instance, cfg.solver, net); });

  GapRow row;
  row.size = size_label;
  row.method = solver.method();
  row.n_samples = static_cast<int>(samples.size());
  double gap_sum = 0.0, runtime = 0.0;
  int successes = 0;
  bool exact = true;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    runtime += outcomes[i].seconds;
    exact = exact && refs[i].exact;
    if (!outcomes[i].success) continue;
    ++successes;
    const int span = *outcomes[i].makespan;
    gap_sum += optimality_gap(span, refs[i].makespan);
    if (!refs[i].exact && span < refs[i].makespan) {
      refs[i].makespan = span;
      if (samples[i].file) write_sidecar(*samples[i].file, refs[i]);
    }
  }
  row.success_rate = static_cast<double>(successes) / row.n_samples;
  if (successes > 0) row.mean_gap = gap_sum / successes;
  row.mean_runtime_s = runtime / row.n_samples;
  row.cstar_source = exact ? "exact" : "best-known";
  return row;
}

std::string SizeSpec::label() const { return std::to_string(jobs) + "x" + std::to_string(machines); }

SizeSpec SizeSpec::parse(const std::string& text) {
  const auto x = text.find('x');
  SizeSpec s;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t a = 0, b = 0;
    s.jobs = std::stoi(text.substr(0, x), &a);
    s.machines = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ParameterError("bad size '" + text + "' (expected <jobs>x<machines>)");
  }
  if (s.jobs < 1 || s.machines < 1) throw ParameterError("bad size '" + text + "'");
  return s;
}

std::vector<EvalSample> generate_samples(const SizeSpec& size, const GeneratorSpec& base, int count,
                                         std::uint64_t seed) {
  GeneratorSpec spec = base;
  spec.n_jobs = size.jobs;
  spec.n_machines = size.machines;
  std::vector<EvalSample> out;
  for (int i = 0; i < count; ++i)
    out.push_back({generate(spec, derive_seed(seed, size.jobs, size.machines, i)), std::nullopt});
  return out;
}

std::vector<GapRow> run_bench(const BenchConfig& cfg, const QNetwork* net) {
  std::vector<GapRow> rows;
  for (const auto& size : cfg.sizes) {
    const auto samples = generate_samples(size, cfg.generator, cfg.samples, cfg.seed);
    auto refs = references_for(samples, cfg.eval);
    for (const auto& solver : cfg.solvers) rows.push_back(evaluate(solver, size.label(), samples, refs, cfg.eval, net));
  }
  return rows;
}

std::string format_gap(double gap) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << gap;
  std::string out = s.str();
  while (out.size() > 1 && out.back() == '0' && out[out.size() - 2] != '.') out.pop_back();
  if (out == "-0.0") out = "0.0";
  return out;
}

void write_report_csv(std::ostream& out, const std::vector<GapRow>& rows) {
  out << "size,method,mean_gap,success_rate,mean_runtime_s,cstar_source,n_samples\n";
  std::ostringstream line;
  for (const auto& r : rows) {
    line.str("");
    line << std::setprecision(6) << r.size << ',' << r.method << ',';
    if (r.mean_gap) line << *r.mean_gap;
    line << ',' << r.success_rate << ',' << r.mean_runtime_s << ',' << r.cstar_source << ',' << r.n_samples << '\n';
    out << line.str();
  }
}

void write_report_table(std::ostream& out, const std::vector<GapRow>& rows) {
  const std::vector<std::string> header = {"size", "method", "gap", "success", "runtime[s]", "C*", "n"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::ostringstream succ, rt;
    succ << std::setprecision(3) << r.success_rate;
    rt << std::setprecision(3) << r.mean_runtime_s;
    cells.push_back({r.size, r.method, r.mean_gap ? format_gap(*r.mean_gap) : "--", succ.str(), rt.str(),
                     r.cstar_source, std::to_string(r.n_samples)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      if (c < 2)
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      else
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << std::left << '\n';
  };
  emit(header);
  for (const auto& row : cells) emit(row);
}

}  // namespace fjsp
