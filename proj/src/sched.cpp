#include "fjsp/sched.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include "fjsp/error.hpp"

namespace fjsp {

CandidateSolution CandidateSolution::empty(const FjspInstance& instance) {
  return {std::vector<int>(instance.n_ops(), kUnassigned),
          std::vector<std::vector<int>>(instance.n_machines())};
}

bool CandidateSolution::complete() const {
  return std::none_of(assignment.begin(), assignment.end(),
                      [](int m) { return m == kUnassigned; });
}

void check_structure(const CandidateSolution& solution, const FjspInstance& instance) {
  const int n = instance.n_ops();
  if (static_cast<int>(solution.assignment.size()) != n)
    throw StructuralError("assignment size does not match op count");
  if (static_cast<int>(solution.order.size()) != instance.n_machines())
    throw StructuralError("order size does not match machine count");
  std::vector<int> placed(n, kUnassigned);
  for (int m = 0; m < instance.n_machines(); ++m) {
    for (int o : solution.order[m]) {
      if (o < 0 || o >= n) throw StructuralError("order references unknown op " + std::to_string(o));
      if (placed[o] != kUnassigned)
        throw StructuralError("op " + std::to_string(o) + " queued more than once");
      placed[o] = m;
    }
  }
  for (int o = 0; o < n; ++o) {
    if (solution.assignment[o] != placed[o])
      throw StructuralError("op " + std::to_string(o) + " assignment disagrees with queue order");
    if (placed[o] != kUnassigned && !instance.compatible(o, placed[o]))
      throw StructuralError("op " + std::to_string(o) + " assigned to incompatible machine " +
                            std::to_string(placed[o]));
  }
}

namespace {

// Predecessors of each assigned op: job predecessor (if assigned) and queue predecessor.
struct PrecedenceGraph {
  std::vector<int> job_pred;
  std::vector<int> queue_pred;
  std::vector<std::vector<int>> succ;
};

PrecedenceGraph build_graph(const CandidateSolution& s, const FjspInstance& instance) {
  const int n = instance.n_ops();
  PrecedenceGraph g{std::vector<int>(n, -1), std::vector<int>(n, -1),
                    std::vector<std::vector<int>>(n)};
  for (int o = 0; o < n; ++o) {
    if (s.assignment[o] == kUnassigned) continue;
    const int p = instance.job_pred(o);
    if (p >= 0 && s.assignment[p] != kUnassigned) {
      g.job_pred[o] = p;
      g.succ[p].push_back(o);
    }
  }
  for (const auto& queue : s.order) {
    for (std::size_t i = 1; i < queue.size(); ++i) {
      g.queue_pred[queue[i]] = queue[i - 1];
      g.succ[queue[i - 1]].push_back(queue[i]);
    }
  }
  return g;
}

std::optional<std::vector<int>> cycle_in(const PrecedenceGraph& g, const CandidateSolution& s) {
  const int n = static_cast<int>(g.succ.size());
  enum : char { kWhite, kGrey, kBlack };
  std::vector<char> color(n, kWhite);
  std::vector<int> parent(n, -1);
  std::vector<std::pair<int, std::size_t>> stack;
  for (int root = 0; root < n; ++root) {
    if (s.assignment[root] == kUnassigned || color[root] != kWhite) continue;
    stack.push_back({root, 0});
    color[root] = kGrey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < g.succ[u].size()) {
        const int v = g.succ[u][next++];
        if (color[v] == kGrey) {
          std::vector<int> cycle{v};
          for (int w = u; w != v; w = parent[w]) cycle.push_back(w);
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (color[v] == kWhite) {
          color[v] = kGrey;
          parent[v] = u;
          stack.push_back({v, 0});
        }
      } else {
        color[u] = kBlack;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::vector<int>> find_cycle(const CandidateSolution& solution,
                                           const FjspInstance& instance) {
  check_structure(solution, instance);
  return cycle_in(build_graph(solution, instance), solution);
}

bool is_feasible(const CandidateSolution& solution, const FjspInstance& instance) {
  return !find_cycle(solution, instance).has_value();
}

Schedule decode(const CandidateSolution& solution, const FjspInstance& instance) {
  check_structure(solution, instance);
  if (!solution.complete()) throw StructuralError("decode requires a complete solution");
  const auto g = build_graph(solution, instance);
  const int n = instance.n_ops();

  std::vector<int> indegree(n, 0);
  for (int o = 0; o < n; ++o) indegree[o] = (g.job_pred[o] >= 0) + (g.queue_pred[o] >= 0);
  std::vector<int> ready;
  for (int o = n - 1; o >= 0; --o)
    if (indegree[o] == 0) ready.push_back(o);

  Schedule out{std::vector<int>(n, 0), std::vector<int>(n, 0), 0};
  int done = 0;
  while (!ready.empty()) {
    const int o = ready.back();
    ready.pop_back();
    int start = 0;
    if (g.job_pred[o] >= 0) start = std::max(start, out.finish[g.job_pred[o]]);
    if (g.queue_pred[o] >= 0) start = std::max(start, out.finish[g.queue_pred[o]]);
    out.start[o] = start;
    out.finish[o] = start + instance.duration(o, solution.assignment[o]);
    out.makespan = std::max(out.makespan, out.finish[o]);
    ++done;
    for (int v : g.succ[o])
      if (--indegree[v] == 0) ready.push_back(v);
  }
  if (done != n) {
    auto cycle = cycle_in(g, solution);
    throw InfeasibleError("solution gridlocks: precedence cycle", cycle.value_or(std::vector<int>{}));
  }
  return out;
}

int makespan_lower_bound(const FjspInstance& instance) {
  int job_bound = 0;
  for (const auto& chain : instance.jobs()) {
    int sum = 0;
    for (int o : chain) sum += instance.min_duration(o);
    job_bound = std::max(job_bound, sum);
  }
  long total = 0;
  for (int o = 0; o < instance.n_ops(); ++o) total += instance.min_duration(o);
  const int m = instance.n_machines();
  const int load_bound = static_cast<int>((total + m - 1) / m);
  return std::max(job_bound, load_bound);
}

nlohmann::ordered_json to_json(const CandidateSolution& solution) {
  nlohmann::ordered_json j;
  auto& a = j["assignment"] = nlohmann::ordered_json::object();
  for (std::size_t o = 0; o < solution.assignment.size(); ++o)
    if (solution.assignment[o] != kUnassigned) a[std::to_string(o)] = solution.assignment[o];
  auto& ord = j["order"] = nlohmann::ordered_json::object();
  for (std::size_t m = 0; m < solution.order.size(); ++m) ord[std::to_string(m)] = solution.order[m];
  return j;
}

namespace {

int parse_index(const std::string& key, const std::string& where) {
  std::size_t pos = 0;
  int v = -1;
  try {
    v = std::stoi(key, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != key.size() || v < 0) throw ParseError("field '" + where + "' has non-index key '" + key + "'");
  return v;
}

}  // namespace

CandidateSolution solution_from_json(const nlohmann::json& j, const FjspInstance& instance) {
  if (!j.is_object() || !j.contains("assignment") || !j.contains("order"))
    throw ParseError("solution must be an object with 'assignment' and 'order'");
  auto s = CandidateSolution::empty(instance);
  for (const auto& [key, value] : j["assignment"].items()) {
    const int o = parse_index(key, "assignment");
    if (o >= instance.n_ops()) throw ParseError("assignment references unknown op " + key);
    if (!value.is_number_integer()) throw ParseError("field 'assignment." + key + "' must be an integer");
    s.assignment[o] = value.get<int>();
  }
  for (const auto& [key, value] : j["order"].items()) {
    const int m = parse_index(key, "order");
    if (m >= instance.n_machines()) throw ParseError("order references unknown machine " + key);
    if (!value.is_array()) throw ParseError("field 'order." + key + "' must be an array");
    for (const auto& o : value) {
      if (!o.is_number_integer()) throw ParseError("field 'order." + key + "' must hold integers");
      s.order[m].push_back(o.get<int>());
    }
  }
  check_structure(s, instance);
  return s;
}

void save_solution(const CandidateSolution& solution, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path.string());
  out << to_json(solution).dump(2) << '\n';
}

CandidateSolution load_solution(const std::filesystem::path& path, const FjspInstance& instance) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return solution_from_json(j, instance);
}

void write_schedule_csv(std::ostream& out, const CandidateSolution& solution,
                        const Schedule& schedule) {
  out << "op,machine,start,finish\n";
  for (std::size_t o = 0; o < solution.assignment.size(); ++o)
    out << o << ',' << solution.assignment[o] << ',' << schedule.start[o] << ','
        << schedule.finish[o] << '\n';
}

}  // namespace fjsp

namespace fjsp {

std::optional<int> try_makespan(const CandidateSolution& solution, const FjspInstance& instance) {
  const int n = instance.n_ops();
  thread_local std::vector<int> queue_pred, indegree, finish, stack, queue_succ;
  queue_pred.assign(n, -1);
  queue_succ.assign(n, -1);
  for (const auto& q : solution.order)
    for (std::size_t i = 1; i < q.size(); ++i) {
      queue_pred[q[i]] = q[i - 1];
      queue_succ[q[i - 1]] = q[i];
    }
  indegree.assign(n, 0);
  stack.clear();
  for (int o = 0; o < n; ++o) {
    indegree[o] = (instance.job_pred(o) >= 0) + (queue_pred[o] >= 0);
    if (indegree[o] == 0) stack.push_back(o);
  }
  finish.assign(n, 0);
  int done = 0, span = 0;
  while (!stack.empty()) {
    const int o = stack.back();
    stack.pop_back();
    const int jp = instance.job_pred(o);
    int start = jp >= 0 ? finish[jp] : 0;
    if (queue_pred[o] >= 0) start = std::max(start, finish[queue_pred[o]]);
    finish[o] = start + instance.duration(o, solution.assignment[o]);
    span = std::max(span, finish[o]);
    ++done;
    const int js = instance.job_succ(o);
    if (js >= 0 && --indegree[js] == 0) stack.push_back(js);
    if (queue_succ[o] >= 0 && --indegree[queue_succ[o]] == 0) stack.push_back(queue_succ[o]);
  }
  if (done != n) return std::nullopt;
  return span;
}

}  // namespace fjsp
