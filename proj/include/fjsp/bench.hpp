#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fjsp/baselines.hpp"
#include "fjsp/gap.hpp"
#include "fjsp/instance.hpp"
#include "fjsp/qlearn.hpp"
#include "fjsp/qnetwork.hpp"

namespace fjsp {

enum class SolverKind { Fifo, Sa, Bnb, Dql };

struct SolverSpec {
  SolverKind kind = SolverKind::Fifo;
  std::filesystem::path checkpoint;  // dql only

  // "fifo", "sa", "bnb" or "dql:<checkpoint>".
  static SolverSpec parse(const std::string& text);
  std::string method() const;  // report label
};

struct SolverOptions {
  SaConfig sa;
  BnbConfig bnb;
};

struct SolveOutcome {
  bool success = false;
  std::optional<CandidateSolution> solution;  // present whenever fully assigned
  std::optional<int> makespan;                // decoded, successful runs only
  bool proof = false;                         // bnb only
  double seconds = 0.0;                       // solve call only
  std::vector<SaTraceRow> sa_trace;
  std::vector<TrajectoryRow> trajectory;
};

// `net` is required for dql. Wall-clock covers the solver call alone.
SolveOutcome solve_instance(const SolverSpec& solver, const FjspInstance& instance,
                            const SolverOptions& opts, const QNetwork* net = nullptr,
                            bool record_traces = false);

struct EvalSample {
  FjspInstance instance;
  std::optional<std::filesystem::path> file;  // enables the best-known sidecar
};

struct EvalConfig {
  SolverOptions solver;
  int oracle_max_ops = 16;
  int threads = 1;
};

// One row of a gap report.
struct GapRow {
  std::string size;  // "<jobs>x<machines>"
  std::string method;
  std::optional<double> mean_gap;  // over successful samples
  double success_rate = 0.0;
  double mean_runtime_s = 0.0;
  std::string cstar_source;  // "exact" or "best-known"
  int n_samples = 0;
};

// Sidecar next to an instance file caching its reference makespan.
std::filesystem::path sidecar_path(const std::filesystem::path& instance_file);
std::optional<Reference> read_sidecar(const std::filesystem::path& instance_file);
void write_sidecar(const std::filesystem::path& instance_file, const Reference& ref);

// Reference for every sample, consulting / filling sidecars for file samples.
std::vector<Reference> references_for(const std::vector<EvalSample>& samples, const EvalConfig& cfg);

// Runs `solver` on every sample and aggregates one report row. A candidate
// that beats a best-known reference updates it (and its sidecar).
GapRow evaluate(const SolverSpec& solver, const std::string& size_label, const std::vector<EvalSample>& samples,
                std::vector<Reference>& refs, const EvalConfig& cfg, const QNetwork* net = nullptr);

struct SizeSpec {
  int jobs = 0;
  int machines = 0;
  std::string label() const;
  static SizeSpec parse(const std::string& text);  // "5x3"
};

std::vector<EvalSample> generate_samples(const SizeSpec& size, const GeneratorSpec& base, int count,
                                         std::uint64_t seed);

struct BenchConfig {
  std::vector<SizeSpec> sizes = {{3, 2}, {5, 3}, {8, 4}};
  int samples = 16;
  std::uint64_t seed = 0;
  GeneratorSpec generator;  // n_jobs / n_machines overridden per size
  std::vector<SolverSpec> solvers = {{SolverKind::Fifo, {}}, {SolverKind::Sa, {}}, {SolverKind::Bnb, {}}};
  EvalConfig eval;
};

// Size ladder: every solver on the same generated samples for every size.
std::vector<GapRow> run_bench(const BenchConfig& cfg, const QNetwork* net = nullptr);

// Gap formatting used in tables: four decimals, trailing zeros trimmed.
std::string format_gap(double gap);

void write_report_csv(std::ostream& out, const std::vector<GapRow>& rows);
void write_report_table(std::ostream& out, const std::vector<GapRow>& rows);

}  // namespace fjsp
