#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace fjsp {

struct Operation {
  int id = 0;
  int job = 0;
  int pos_in_job = 0;
  int base_duration = 1;

  bool operator==(const Operation&) const = default;
};

struct CompatEdge {
  int op = 0;
  int machine = 0;
  double weight = 1.0;

  bool operator==(const CompatEdge&) const = default;
};

// Processing time of an operation with base duration `base` on a machine whose
// compatibility edge carries `weight`. Every component uses this one function.
int effective_duration(int base, double weight);

// Immutable, validated FJSP instance. Compatibility edges are kept sorted by
// (op, machine); per-op lookups are precomputed at construction.
class FjspInstance {
 public:
  FjspInstance() = default;

  // Throws ValidationError when an invariant is violated.
  FjspInstance(int n_machines, std::vector<std::vector<int>> jobs,
               std::vector<int> base_durations, std::vector<CompatEdge> compat);

  int n_machines() const { return n_machines_; }
  int n_jobs() const { return static_cast<int>(jobs_.size()); }
  int n_ops() const { return static_cast<int>(ops_.size()); }

  const std::vector<std::vector<int>>& jobs() const { return jobs_; }
  const std::vector<Operation>& operations() const { return ops_; }
  const Operation& op(int id) const { return ops_[id]; }
  const std::vector<CompatEdge>& compat() const { return compat_; }

  // Compatibility edges of one operation, ascending machine id.
  std::span<const CompatEdge> edges_of(int op) const;
  bool compatible(int op, int machine) const;
  double weight(int op, int machine) const;
  // Throws ParameterError when (op, machine) is not a compatibility edge.
  int duration(int op, int machine) const;

  int min_duration(int op) const { return min_dur_[op]; }
  double mean_duration(int op) const { return mean_dur_[op]; }
  int max_duration(int op) const { return max_dur_[op]; }
  int max_base_duration() const { return max_base_; }
  int max_job_length() const { return max_job_len_; }

  // -1 when the operation is first / last in its job.
  int job_pred(int op) const;
  int job_succ(int op) const;

  bool operator==(const FjspInstance& other) const {
    return n_machines_ == other.n_machines_ && jobs_ == other.jobs_ &&
           ops_ == other.ops_ && compat_ == other.compat_;
  }

 private:
  int n_machines_ = 0;
  std::vector<std::vector<int>> jobs_;
  std::vector<Operation> ops_;
  std::vector<CompatEdge> compat_;
  std::vector<int> edge_begin_;  // n_ops + 1 offsets into compat_
  std::vector<int> min_dur_, max_dur_;
  std::vector<double> mean_dur_;
  int max_base_ = 1;
  int max_job_len_ = 1;
};

struct GeneratorSpec {
  int n_jobs = 6;
  int n_machines = 3;
  double avg_ops_per_job = 2.0;
  double drop_fraction = 0.3;
  int duration_lo = 1;
  int duration_hi = 10;
  double weight_lo = 0.5;
  double weight_hi = 2.0;
};

// Random instance: ops partitioned into nonempty chains, compatibility edges
// dropped independently with probability `drop_fraction`, edgeless ops get one
// random edge back. Pure function of (spec, seed).
FjspInstance generate(const GeneratorSpec& spec, std::uint64_t seed);

nlohmann::ordered_json to_json(const FjspInstance& instance);
FjspInstance instance_from_json(const nlohmann::json& j);

void save_instance(const FjspInstance& instance, const std::filesystem::path& path);
FjspInstance load_instance(const std::filesystem::path& path);

}  // namespace fjsp
