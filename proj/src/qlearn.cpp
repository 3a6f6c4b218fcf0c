#include "fjsp/qlearn.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <unordered_map>

#include "fjsp/error.hpp"
#include "fjsp/gap.hpp"
#include "fjsp/parallel.hpp"

namespace fjsp {

namespace {

// Independent RNG stream tags.
enum Stream : std::uint64_t {
  kInit = 1,
  kTrainInstance = 2,
  kRollout = 3,
  kSample = 4,
  kEvalInstance = 5,
  kOracle = 6,
};

std::span<Eigen::MatrixXd> tensors(QParams& p) { return p.tensors; }
std::span<const Eigen::MatrixXd> tensors(const QParams& p) { return p.tensors; }

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ParameterError("replay buffer capacity must be >= 1");
  items_.reserve(capacity_);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw ParameterError("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw ContractError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(rng);
  return out;
}

ReplayBuffer ReplayBuffer::from_raw(std::size_t capacity, std::vector<Transition> items, std::size_t head) {
  if (items.size() > capacity || (head != 0 && head >= items.size()))
    throw ParseError("replay buffer state is inconsistent");
  ReplayBuffer b(capacity);
  b.items_ = std::move(items);
  b.head_ = head;
  return b;
}

int select_action(const Eigen::VectorXd& q, double epsilon, Rng& rng) {
  if (q.size() == 0) throw ContractError("select_action: no candidate actions");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (epsilon > 0.0 && unit(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
    return pick(rng);
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = i;
  return static_cast<int>(best);
}

RolloutResult rollout(const QParams& params, int rounds, const FjspInstance& instance, double epsilon,
                      Rng& rng, bool record_rows) {
  RolloutResult out;
  auto state = reset(instance);
  auto graph = std::make_shared<const HeteroGraph>(encode_state(state, instance));
  while (!state.done()) {
    const Eigen::VectorXd q = q_values(params, rounds, *graph);
    const int idx = select_action(q, epsilon, rng);
    const Action a = graph->candidate_action(idx);
    auto outcome = step(state, instance, a);
    double reward = outcome.reward;
    out.stats.ret += outcome.reward;
    if (record_rows) out.rows.push_back({state.clock - 1, a.op, a.machine, outcome.reward, state.n_completed});
    while (!state.done() && state.n_unassigned == 0) {
      outcome = step(state, instance, std::nullopt);
      reward += outcome.reward;
      out.stats.ret += outcome.reward;
      if (record_rows) out.rows.push_back({state.clock - 1, -1, -1, outcome.reward, state.n_completed});
    }
    Transition t{graph, a, idx, reward, nullptr};
    if (!state.done()) {
      graph = std::make_shared<const HeteroGraph>(encode_state(state, instance));
      t.next = graph;
    }
    out.transitions.push_back(std::move(t));
  }
  out.stats.termination = *state.termination;
  out.stats.success = state.termination == Termination::Completed;
  out.stats.length = state.clock;
  if (state.n_unassigned == 0) {
    out.solution = extract_solution(state);
    if (out.stats.success) out.stats.makespan = decode(*out.solution, instance).makespan;
  }
  return out;
}

std::vector<double> td_targets(const std::vector<const Transition*>& batch, const QParams& target,
                               int rounds, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition* t : batch) {
    double v = t->reward;
    if (t->next && t->next->n_candidates() > 0) v += gamma * q_values(target, rounds, *t->next).maxCoeff();
    y.push_back(v);
  }
  return y;
}

BatchLoss td_loss(const std::vector<const Transition*>& batch, const std::vector<double>& targets,
                  const QParams& params, int rounds) {
  if (batch.empty() || batch.size() != targets.size()) throw ContractError("td_loss: bad batch");
  BatchLoss out{0.0, QParams::zeros(params.dim)};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    const ForwardTape tape = forward(params, rounds, *t.state);
    const double diff = tape.q(t.action_index) - targets[i];
    out.loss += diff * diff * scale;
    Eigen::VectorXd upstream = Eigen::VectorXd::Zero(tape.q.size());
    upstream(t.action_index) = 2.0 * diff * scale;
    out.grad += backward(params, tape, upstream);
  }
  return out;
}

void TrainConfig::validate() const {
  if (trajectories_per_epoch < 1 || train_iters_per_epoch < 1 || batch_size < 1 || epochs < 0 ||
      target_sync_period < 1 || buffer_capacity < 1 || dim < 1 || rounds < 0 || eval_episodes < 1 ||
      threads < 1)
    throw ParameterError("train: counts must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("train: gamma must lie in (0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("train: epsilon must lie in [0, 1]");
  if (!(lr > 0.0)) throw ParameterError("train: lr must be > 0");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["trajectories_per_epoch"] = c.trajectories_per_epoch;
  j["train_iters_per_epoch"] = c.train_iters_per_epoch;
  j["batch_size"] = c.batch_size;
  j["gamma"] = c.gamma;
  j["epsilon"] = c.epsilon;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["target_sync_period"] = c.target_sync_period;
  j["buffer_capacity"] = c.buffer_capacity;
  j["dim"] = c.dim;
  j["rounds"] = c.rounds;
  j["eval_episodes"] = c.eval_episodes;
  j["oracle_max_ops"] = c.oracle_max_ops;
  j["seed"] = c.seed;
  j["generator"] = {{"n_jobs", c.generator.n_jobs},
                    {"n_machines", c.generator.n_machines},
                    {"avg_ops_per_job", c.generator.avg_ops_per_job},
                    {"drop_fraction", c.generator.drop_fraction},
                    {"duration_lo", c.generator.duration_lo},
                    {"duration_hi", c.generator.duration_hi},
                    {"weight_lo", c.generator.weight_lo},
                    {"weight_hi", c.generator.weight_hi}};
  j["oracle"] = {{"node_limit", c.oracle.node_limit}, {"time_limit", c.oracle.time_limit}};
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.trajectories_per_epoch = j.at("trajectories_per_epoch").get<int>();
  c.train_iters_per_epoch = j.at("train_iters_per_epoch").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.gamma = j.at("gamma").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.target_sync_period = j.at("target_sync_period").get<int>();
  c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
  c.dim = j.at("dim").get<int>();
  c.rounds = j.at("rounds").get<int>();
  c.eval_episodes = j.at("eval_episodes").get<int>();
  c.oracle_max_ops = j.at("oracle_max_ops").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& g = j.at("generator");
  c.generator.n_jobs = g.at("n_jobs").get<int>();
  c.generator.n_machines = g.at("n_machines").get<int>();
  c.generator.avg_ops_per_job = g.at("avg_ops_per_job").get<double>();
  c.generator.drop_fraction = g.at("drop_fraction").get<double>();
  c.generator.duration_lo = g.at("duration_lo").get<int>();
  c.generator.duration_hi = g.at("duration_hi").get<int>();
  c.generator.weight_lo = g.at("weight_lo").get<double>();
  c.generator.weight_hi = g.at("weight_hi").get<double>();
  c.oracle.node_limit = j.at("oracle").at("node_limit").get<long>();
  c.oracle.time_limit = j.at("oracle").at("time_limit").get<double>();
  return c;
}

void write_metrics_header(std::ostream& out) {
  out << "epoch,loss,r_train,r_eval,success_rates,relative_err\n";
}

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(12) << m.epoch << ',' << m.loss << ',' << m.r_train << ',' << m.r_eval << ','
      << m.success_rate << ',';
  if (m.relative_err) out << *m.relative_err;
  out << '\n';
  out.flags(flags);
  out.precision(prec);
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& rows) {
  write_metrics_header(out);
  for (const auto& r : rows) write_metrics_row(out, r);
}

Reference reference_makespan(const FjspInstance& instance, int oracle_max_ops, const BnbConfig& bnb,
                             const SaConfig& sa) {
  if (instance.n_ops() <= oracle_max_ops) {
    const auto r = bnb_solve(instance, bnb);
    if (r.proof) return {r.makespan, true};
    return {std::min(r.makespan, sa_solve(instance, sa).makespan), false};
  }
  const int fifo = makespan(fifo_solve(instance), instance);
  return {std::min(fifo, sa_solve(instance, sa).makespan), false};
}

TrainState init_training(const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, kInit));
  TrainState s{cfg, QNetwork(QParams::random(cfg.dim, rng), cfg.rounds), {}, {}, ReplayBuffer(cfg.buffer_capacity),
               0, {}};
  s.target = s.policy.params();
  s.adam = AdamState<double>::zeros_like(tensors(std::as_const(s.policy.params())));
  return s;
}

GreedyEval evaluate_greedy(const QParams& params, int rounds, const std::vector<FjspInstance>& set,
                           const std::vector<Reference>& refs, int threads) {
  std::vector<EpisodeStats> stats(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) {
    Rng unused(0);
    stats[i] = rollout(params, rounds, set[i], 0.0, unused).stats;
  });
  GreedyEval out;
  double gap_sum = 0.0;
  int successes = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.mean_return += stats[i].ret;
    if (stats[i].success) {
      ++successes;
      if (i < refs.size()) gap_sum += optimality_gap(*stats[i].makespan, refs[i].makespan);
    }
  }
  out.mean_return /= static_cast<double>(set.size());
  out.success_rate = static_cast<double>(successes) / static_cast<double>(set.size());
  if (successes > 0 && !refs.empty()) out.mean_gap = gap_sum / successes;
  return out;
}

Trainer::Trainer(TrainState state, InstanceSource source) : state_(std::move(state)), source_(std::move(source)) {
  state_.config.validate();
  if (!source_) {
    const GeneratorSpec spec = state_.config.generator;
    source_ = [spec](std::uint64_t seed) { return generate(spec, seed); };
  }
  const auto& cfg = state_.config;
  eval_set_.resize(cfg.eval_episodes);
  eval_refs_.resize(cfg.eval_episodes);
  parallel_for(eval_set_.size(), cfg.threads, [&](std::size_t i) {
    eval_set_[i] = source_(derive_seed(cfg.seed, kEvalInstance, i));
    SaConfig sa;
    sa.seed = derive_seed(cfg.seed, kOracle, i);
    eval_refs_[i] = reference_makespan(eval_set_[i], cfg.oracle_max_ops, cfg.oracle, sa);
  });
  for (const auto& r : eval_refs_) eval_exact_ = eval_exact_ && r.exact;
}

EpochMetrics Trainer::run_epoch() {
  auto& cfg = state_.config;
  const int epoch = state_.epoch + 1;

  const QParams snapshot = state_.policy.params();
  std::vector<RolloutResult> results(cfg.trajectories_per_epoch);
  parallel_for(results.size(), cfg.threads, [&](std::size_t i) {
    const FjspInstance inst = source_(derive_seed(cfg.seed, kTrainInstance, epoch, i));
    Rng rng(derive_seed(cfg.seed, kRollout, epoch, i));
    results[i] = rollout(snapshot, cfg.rounds, inst, cfg.epsilon, rng);
  });
  EpochMetrics m;
  m.epoch = epoch;
  for (auto& r : results) {
    m.r_train += r.stats.ret;
    for (auto& t : r.transitions) state_.buffer.push(std::move(t));
  }
  m.r_train /= static_cast<double>(results.size());

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  Rng sample_rng(derive_seed(cfg.seed, kSample, epoch));
  std::vector<const Transition*> batch(cfg.batch_size);
  for (int it = 0; it < cfg.train_iters_per_epoch; ++it) {
    const auto idx = state_.buffer.sample_indices(cfg.batch_size, sample_rng);
    for (int b = 0; b < cfg.batch_size; ++b) batch[b] = &state_.buffer.at(idx[b]);
    const auto targets = td_targets(batch, state_.target, cfg.rounds, cfg.gamma);
    auto loss = td_loss(batch, targets, state_.policy.params(), cfg.rounds);
    if (!std::isfinite(loss.loss) || !loss.grad.all_finite())
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                          std::to_string(it));
    adam_step(tensors(state_.policy.params()), tensors(std::as_const(loss.grad)), state_.adam, adam_cfg);
    m.loss += loss.loss / cfg.train_iters_per_epoch;
  }
  if (epoch % cfg.target_sync_period == 0) state_.target = state_.policy.params();

  const auto eval = evaluate_greedy(state_.policy.params(), cfg.rounds, eval_set_, eval_refs_, cfg.threads);
  m.r_eval = eval.mean_return;
  m.success_rate = eval.success_rate;
  m.relative_err = eval.mean_gap;

  state_.epoch = epoch;
  state_.metrics.push_back(m);
  return m;
}

void Trainer::run(int until_epoch, const std::function<void(const EpochMetrics&)>& on_epoch) {
  while (state_.epoch < until_epoch) {
    const auto m = run_epoch();
    if (on_epoch) on_epoch(m);
  }
}

TrainResult train(const TrainConfig& cfg, InstanceSource source) {
  Trainer trainer(init_training(cfg), std::move(source));
  trainer.run(cfg.epochs);
  return {trainer.state().policy, trainer.state().metrics};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  nlohmann::ordered_json j;
  j["shape"] = {m.rows(), m.cols()};
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("shape").at(0).get<Eigen::Index>();
  const auto cols = j.at("shape").at(1).get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ParseError("matrix element count does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(static_cast<std::size_t>(r * cols + c)).get<double>();
  return m;
}

nlohmann::ordered_json graph_to_json(const HeteroGraph& g) {
  nlohmann::ordered_json j;
  j["op_feats"] = matrix_to_json(g.op_feats);
  j["mach_feats"] = matrix_to_json(g.mach_feats);
  j["job"] = g.edges_job;
  j["queue"] = g.edges_queue;
  auto& compat = j["compat"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges_compat) compat.push_back({e.op, e.machine, e.weight});
  j["candidates"] = g.candidates;
  return j;
}

HeteroGraph graph_from_json(const nlohmann::json& j) {
  HeteroGraph g;
  g.op_feats = matrix_from_json(j.at("op_feats"));
  g.mach_feats = matrix_from_json(j.at("mach_feats"));
  g.edges_job = j.at("job").get<std::vector<std::pair<int, int>>>();
  g.edges_queue = j.at("queue").get<std::vector<std::pair<int, int>>>();
  for (const auto& e : j.at("compat"))
    g.edges_compat.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  g.candidates = j.at("candidates").get<std::vector<int>>();
  g.finalize();
  return g;
}

nlohmann::ordered_json moments_to_json(const std::vector<Eigen::MatrixXd>& ms) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& m : ms) j.push_back(matrix_to_json(m));
  return j;
}

std::vector<Eigen::MatrixXd> moments_from_json(const nlohmann::json& j, const QParams& like) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(QParams::kTensors))
    throw ParseError("optimizer moments have the wrong tensor count");
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(matrix_from_json(j[i]));
    if (out.back().rows() != like.tensors[i].rows() || out.back().cols() != like.tensors[i].cols())
      throw ParseError("optimizer moment has the wrong shape");
  }
  return out;
}

}  // namespace

nlohmann::ordered_json training_to_json(const TrainState& s) {
  nlohmann::ordered_json j;
  j["format"] = "fjsp-train";
  j["version"] = kCheckpointVersion;
  j["epoch"] = s.epoch;
  j["config"] = to_json(s.config);
  j["network"] = network_to_json(s.policy);
  j["target"] = params_to_json(s.target);
  j["adam"] = {{"t", s.adam.t}, {"m", moments_to_json(s.adam.m)}, {"v", moments_to_json(s.adam.v)}};

  // Graphs are shared between consecutive transitions, so store each once.
  std::unordered_map<const HeteroGraph*, int> ids;
  auto graphs = nlohmann::ordered_json::array();
  auto intern = [&](const GraphPtr& g) -> nlohmann::ordered_json {
    if (!g) return nullptr;
    auto [it, inserted] = ids.try_emplace(g.get(), static_cast<int>(ids.size()));
    if (inserted) graphs.push_back(graph_to_json(*g));
    return it->second;
  };
  auto items = nlohmann::ordered_json::array();
  for (const auto& t : s.buffer.raw()) {
    nlohmann::ordered_json e;
    e["state"] = intern(t.state);
    e["action"] = {t.action.op, t.action.machine};
    e["index"] = t.action_index;
    e["reward"] = t.reward;
    e["next"] = intern(t.next);
    items.push_back(std::move(e));
  }
  j["replay"] = {{"capacity", s.buffer.capacity()},
                 {"head", s.buffer.head()},
                 {"graphs", std::move(graphs)},
                 {"items", std::move(items)}};
  auto metrics = nlohmann::ordered_json::array();
  for (const auto& m : s.metrics) {
    nlohmann::ordered_json row = {m.epoch, m.loss, m.r_train, m.r_eval, m.success_rate};
    row.push_back(m.relative_err ? nlohmann::ordered_json(*m.relative_err) : nlohmann::ordered_json(nullptr));
    metrics.push_back(std::move(row));
  }
  j["metrics"] = std::move(metrics);
  return j;
}

TrainState training_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "fjsp-train") throw ParseError("not a training checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("checkpoint version mismatch");
    TrainState s;
    s.config = train_config_from_json(j.at("config"));
    s.policy = network_from_json(j.at("network"));
    if (s.policy.dim() != s.config.dim || s.policy.rounds() != s.config.rounds)
      throw ParseError("network shape disagrees with the stored config");
    s.target = params_from_json(j.at("target"), s.config.dim);
    s.adam.t = j.at("adam").at("t").get<std::int64_t>();
    s.adam.m = moments_from_json(j.at("adam").at("m"), s.policy.params());
    s.adam.v = moments_from_json(j.at("adam").at("v"), s.policy.params());
    s.epoch = j.at("epoch").get<int>();

    const auto& replay = j.at("replay");
    std::vector<GraphPtr> graphs;
    for (const auto& g : replay.at("graphs")) graphs.push_back(std::make_shared<const HeteroGraph>(graph_from_json(g)));
    auto lookup = [&](const nlohmann::json& v) -> GraphPtr {
      if (v.is_null()) return nullptr;
      const auto i = v.get<std::size_t>();
      if (i >= graphs.size()) throw ParseError("transition references unknown graph");
      return graphs[i];
    };
    std::vector<Transition> items;
    for (const auto& e : replay.at("items")) {
      Transition t{lookup(e.at("state")), {e.at("action").at(0).get<int>(), e.at("action").at(1).get<int>()},
                   e.at("index").get<int>(), e.at("reward").get<double>(), lookup(e.at("next"))};
      if (!t.state || t.action_index < 0 || t.action_index >= t.state->n_candidates())
        throw ParseError("transition action index out of range");
      items.push_back(std::move(t));
    }
    s.buffer = ReplayBuffer::from_raw(replay.at("capacity").get<std::size_t>(), std::move(items),
                                      replay.at("head").get<std::size_t>());
    for (const auto& row : j.at("metrics")) {
      EpochMetrics m{row.at(0).get<int>(), row.at(1).get<double>(), row.at(2).get<double>(),
                     row.at(3).get<double>(), row.at(4).get<double>(), std::nullopt};
      if (!row.at(5).is_null()) m.relative_err = row.at(5).get<double>();
      s.metrics.push_back(m);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed training checkpoint: ") + e.what());
  } catch (const StructuralError& e) {
    throw ParseError(std::string("malformed training checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path.string());
  out << training_to_json(state).dump() << '\n';
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return training_from_json(j);
}

}  // namespace fjsp
