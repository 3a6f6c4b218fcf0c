#include "fjsp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fjsp/error.hpp"
#include "fjsp/rng.hpp"

namespace fjsp {

int effective_duration(int base, double weight) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(base) * weight)));
}

FjspInstance::FjspInstance(int n_machines, std::vector<std::vector<int>> jobs,
                           std::vector<int> base_durations,
                           std::vector<CompatEdge> compat)
    : n_machines_(n_machines), jobs_(std::move(jobs)), compat_(std::move(compat)) {
  if (n_machines_ < 1) throw ValidationError("n_machines must be >= 1");
  const int n = static_cast<int>(base_durations.size());
  if (n < 1) throw ValidationError("instance has no operations");

  ops_.assign(n, Operation{});
  std::vector<int> seen(n, 0);
  for (int j = 0; j < static_cast<int>(jobs_.size()); ++j) {
    if (jobs_[j].empty()) throw ValidationError("job " + std::to_string(j) + " is empty");
    for (int p = 0; p < static_cast<int>(jobs_[j].size()); ++p) {
      const int o = jobs_[j][p];
      if (o < 0 || o >= n)
        throw ValidationError("job " + std::to_string(j) + " references unknown op " +
                              std::to_string(o));
      if (seen[o]++)
        throw ValidationError("op " + std::to_string(o) + " appears in more than one job slot");
      ops_[o] = Operation{o, j, p, base_durations[o]};
    }
  }
  for (int o = 0; o < n; ++o) {
    if (!seen[o]) throw ValidationError("op " + std::to_string(o) + " is missing from every job");
    if (base_durations[o] < 1)
      throw ValidationError("op " + std::to_string(o) + " has base duration < 1");
  }

  for (const auto& e : compat_) {
    if (e.op < 0 || e.op >= n)
      throw ValidationError("compat edge references unknown op " + std::to_string(e.op));
    if (e.machine < 0 || e.machine >= n_machines_)
      throw ValidationError("compat edge references unknown machine " + std::to_string(e.machine));
    if (!std::isfinite(e.weight) || e.weight <= 0.0)
      throw ValidationError("compat edge (" + std::to_string(e.op) + ", " +
                            std::to_string(e.machine) + ") has non-positive weight");
  }
  std::sort(compat_.begin(), compat_.end(), [](const CompatEdge& a, const CompatEdge& b) {
    return std::pair(a.op, a.machine) < std::pair(b.op, b.machine);
  });
  for (std::size_t i = 1; i < compat_.size(); ++i) {
    if (compat_[i].op == compat_[i - 1].op && compat_[i].machine == compat_[i - 1].machine)
      throw ValidationError("duplicate compat edge (" + std::to_string(compat_[i].op) + ", " +
                            std::to_string(compat_[i].machine) + ")");
  }

  edge_begin_.assign(n + 1, 0);
  for (const auto& e : compat_) ++edge_begin_[e.op + 1];
  std::partial_sum(edge_begin_.begin(), edge_begin_.end(), edge_begin_.begin());

  min_dur_.resize(n);
  max_dur_.resize(n);
  mean_dur_.resize(n);
  for (int o = 0; o < n; ++o) {
    const auto edges = edges_of(o);
    if (edges.empty())
      throw ValidationError("op " + std::to_string(o) + " has no compatible machine");
    int lo = std::numeric_limits<int>::max(), hi = 0;
    double sum = 0.0;
    for (const auto& e : edges) {
      const int d = effective_duration(ops_[o].base_duration, e.weight);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    min_dur_[o] = lo;
    max_dur_[o] = hi;
    mean_dur_[o] = sum / static_cast<double>(edges.size());
    max_base_ = std::max(max_base_, ops_[o].base_duration);
  }
  for (const auto& job : jobs_) max_job_len_ = std::max(max_job_len_, static_cast<int>(job.size()));
}

std::span<const CompatEdge> FjspInstance::edges_of(int op) const {
  return {compat_.data() + edge_begin_[op], compat_.data() + edge_begin_[op + 1]};
}

bool FjspInstance::compatible(int op, int machine) const {
  if (op < 0 || op >= n_ops()) return false;
  const auto edges = edges_of(op);
  return std::any_of(edges.begin(), edges.end(),
                     [machine](const CompatEdge& e) { return e.machine == machine; });
}

double FjspInstance::weight(int op, int machine) const {
  for (const auto& e : edges_of(op))
    if (e.machine == machine) return e.weight;
  throw ParameterError("op " + std::to_string(op) + " is not compatible with machine " +
                       std::to_string(machine));
}

int FjspInstance::duration(int op, int machine) const {
  return effective_duration(ops_[op].base_duration, weight(op, machine));
}

int FjspInstance::job_pred(int op) const {
  const auto& o = ops_[op];
  return o.pos_in_job == 0 ? -1 : jobs_[o.job][o.pos_in_job - 1];
}

int FjspInstance::job_succ(int op) const {
  const auto& o = ops_[op];
  const auto& chain = jobs_[o.job];
  return o.pos_in_job + 1 == static_cast<int>(chain.size()) ? -1 : chain[o.pos_in_job + 1];
}

FjspInstance generate(const GeneratorSpec& spec, std::uint64_t seed) {
  if (spec.n_jobs < 1) throw ParameterError("n_jobs must be >= 1");
  if (spec.n_machines < 1) throw ParameterError("n_machines must be >= 1");
  if (!(spec.avg_ops_per_job > 0.0)) throw ParameterError("avg_ops_per_job must be > 0");
  if (!(spec.drop_fraction >= 0.0 && spec.drop_fraction < 1.0))
    throw ParameterError("drop_fraction must lie in [0, 1)");
  if (spec.duration_lo < 1 || spec.duration_lo > spec.duration_hi)
    throw ParameterError("duration range must satisfy 1 <= lo <= hi");
  if (!(spec.weight_lo > 0.0 && spec.weight_lo <= spec.weight_hi))
    throw ParameterError("weight range must satisfy 0 < lo <= hi");

  const int n_ops = static_cast<int>(std::lround(spec.n_jobs * spec.avg_ops_per_job));
  if (n_ops < spec.n_jobs)
    throw ParameterError("n_jobs * avg_ops_per_job rounds below one op per job");

  Rng rng(seed);
  std::vector<int> lengths(spec.n_jobs, 1);
  std::uniform_int_distribution<int> pick_job(0, spec.n_jobs - 1);
  for (int i = spec.n_jobs; i < n_ops; ++i) ++lengths[pick_job(rng)];

  std::vector<int> ids(n_ops);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<int>> jobs(spec.n_jobs);
  for (int j = 0, next = 0; j < spec.n_jobs; ++j)
    for (int k = 0; k < lengths[j]; ++k) jobs[j].push_back(ids[next++]);

  std::uniform_int_distribution<int> pick_dur(spec.duration_lo, spec.duration_hi);
  std::vector<int> base(n_ops);
  for (auto& b : base) b = pick_dur(rng);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> pick_weight(spec.weight_lo, spec.weight_hi);
  std::uniform_int_distribution<int> pick_machine(0, spec.n_machines - 1);
  std::vector<CompatEdge> compat;
  for (int o = 0; o < n_ops; ++o) {
    bool any = false;
    for (int m = 0; m < spec.n_machines; ++m) {
      const bool keep = coin(rng) >= spec.drop_fraction;
      const double w = spec.weight_lo == spec.weight_hi ? spec.weight_lo : pick_weight(rng);
      if (keep) {
        compat.push_back({o, m, w});
        any = true;
      }
    }
    if (!any) {
      const double w = spec.weight_lo == spec.weight_hi ? spec.weight_lo : pick_weight(rng);
      compat.push_back({o, pick_machine(rng), w});
    }
  }
  return FjspInstance(spec.n_machines, std::move(jobs), std::move(base), std::move(compat));
}

nlohmann::ordered_json to_json(const FjspInstance& instance) {
  nlohmann::ordered_json j;
  j["n_machines"] = instance.n_machines();
  j["jobs"] = instance.jobs();
  auto& ops = j["ops"] = nlohmann::ordered_json::array();
  for (const auto& o : instance.operations()) {
    nlohmann::ordered_json e;
    e["id"] = o.id;
    e["base"] = o.base_duration;
    ops.push_back(std::move(e));
  }
  auto& compat = j["compat"] = nlohmann::ordered_json::array();
  for (const auto& c : instance.compat()) {
    nlohmann::ordered_json e;
    e["op"] = c.op;
    e["machine"] = c.machine;
    e["weight"] = c.weight;
    compat.push_back(std::move(e));
  }
  return j;
}

namespace {

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError("'" + where + "' is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field '" + where + (where.empty() ? "" : ".") + key + "'");
  return *it;
}

int as_int(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number_integer()) throw ParseError("field '" + name + "' must be an integer");
  return v.get<int>();
}

double as_real(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number()) throw ParseError("field '" + name + "' must be a number");
  return v.get<double>();
}

}  // namespace

FjspInstance instance_from_json(const nlohmann::json& j) {
  const int n_machines = as_int(field(j, "n_machines", ""), "n_machines");

  const auto& jobs_j = field(j, "jobs", "");
  if (!jobs_j.is_array()) throw ParseError("field 'jobs' must be an array");
  std::vector<std::vector<int>> jobs;
  for (std::size_t a = 0; a < jobs_j.size(); ++a) {
    const std::string name = "jobs[" + std::to_string(a) + "]";
    if (!jobs_j[a].is_array()) throw ParseError("field '" + name + "' must be an array");
    auto& chain = jobs.emplace_back();
    for (std::size_t b = 0; b < jobs_j[a].size(); ++b)
      chain.push_back(as_int(jobs_j[a][b], name + "[" + std::to_string(b) + "]"));
  }

  const auto& ops_j = field(j, "ops", "");
  if (!ops_j.is_array()) throw ParseError("field 'ops' must be an array");
  std::vector<int> base(ops_j.size(), 0);
  std::vector<bool> have(ops_j.size(), false);
  for (std::size_t a = 0; a < ops_j.size(); ++a) {
    const std::string name = "ops[" + std::to_string(a) + "]";
    const int id = as_int(field(ops_j[a], "id", name), name + ".id");
    if (id < 0 || id >= static_cast<int>(ops_j.size()) || have[id])
      throw ValidationError("op ids must be dense and unique; bad id " + std::to_string(id));
    have[id] = true;
    base[id] = as_int(field(ops_j[a], "base", name), name + ".base");
  }

  const auto& compat_j = field(j, "compat", "");
  if (!compat_j.is_array()) throw ParseError("field 'compat' must be an array");
  std::vector<CompatEdge> compat;
  for (std::size_t a = 0; a < compat_j.size(); ++a) {
    const std::string name = "compat[" + std::to_string(a) + "]";
    compat.push_back({as_int(field(compat_j[a], "op", name), name + ".op"),
                      as_int(field(compat_j[a], "machine", name), name + ".machine"),
                      as_real(field(compat_j[a], "weight", name), name + ".weight")});
  }
  return FjspInstance(n_machines, std::move(jobs), std::move(base), std::move(compat));
}

void save_instance(const FjspInstance& instance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path.string());
  out << to_json(instance).dump(2) << '\n';
}

FjspInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace fjsp
