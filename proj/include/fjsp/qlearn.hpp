#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fjsp/adam.hpp"
#include "fjsp/baselines.hpp"
#include "fjsp/env.hpp"
#include "fjsp/graph.hpp"
#include "fjsp/instance.hpp"
#include "fjsp/qnetwork.hpp"
#include "fjsp/rng.hpp"

namespace fjsp {

using GraphPtr = std::shared_ptr<const HeteroGraph>;

// One agent decision. Rewards of the auto-wait ticks that follow the last
// assignment are folded into that assignment's transition, which is then
// terminal (next == nullptr). next->candidates are the next valid actions.
struct Transition {
  GraphPtr state;
  Action action;
  int action_index = 0;  // into state->candidates
  double reward = 0.0;
  GraphPtr next;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  // `count` indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

  const std::vector<Transition>& raw() const { return items_; }
  std::size_t head() const { return head_; }
  static ReplayBuffer from_raw(std::size_t capacity, std::vector<Transition> items, std::size_t head);

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // slot overwritten next once full
};

struct EpisodeStats {
  double ret = 0.0;
  bool success = false;
  Termination termination = Termination::Completed;
  std::optional<int> makespan;  // decoded makespan when successful
  int length = 0;               // final clock
};

struct RolloutResult {
  std::vector<Transition> transitions;
  EpisodeStats stats;
  std::optional<CandidateSolution> solution;
  std::vector<TrajectoryRow> rows;
};

// Epsilon-greedy over candidate Q-values; the greedy branch takes the
// lowest index among maxima (candidates are sorted by (op, machine)).
int select_action(const Eigen::VectorXd& q, double epsilon, Rng& rng);

// Runs one episode to termination with a frozen parameter snapshot.
RolloutResult rollout(const QParams& params, int rounds, const FjspInstance& instance, double epsilon,
                      Rng& rng, bool record_rows = false);

// y = r at terminals, else r + gamma * max_a' Q_target(s', a').
std::vector<double> td_targets(const std::vector<const Transition*>& batch, const QParams& target,
                               int rounds, double gamma);

struct BatchLoss {
  double loss = 0.0;
  QParams grad;
};

// Mean squared TD error of `batch` under `params` and its exact gradient.
BatchLoss td_loss(const std::vector<const Transition*>& batch, const std::vector<double>& targets,
                  const QParams& params, int rounds);

struct TrainConfig {
  int trajectories_per_epoch = 128;
  int train_iters_per_epoch = 64;
  int batch_size = 32;
  double gamma = 1.0;
  double epsilon = 0.1;
  double lr = 8e-5;
  int epochs = 300;
  int target_sync_period = 1;
  std::size_t buffer_capacity = 5000;
  int dim = 16;
  int rounds = 2;
  int eval_episodes = 16;
  int oracle_max_ops = 16;
  std::uint64_t seed = 0;
  int threads = 1;
  GeneratorSpec generator;
  BnbConfig oracle;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double r_train = 0.0;
  double r_eval = 0.0;
  double success_rate = 0.0;
  std::optional<double> relative_err;  // missing when no eval episode succeeded

  bool operator==(const EpochMetrics&) const = default;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& m);
void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& rows);

// Reference makespan for the optimality gap: exact when the oracle proved it.
struct Reference {
  int makespan = 0;
  bool exact = false;
};

// Exact B&B optimum when the instance has at most `oracle_max_ops` ops and the
// search completes; otherwise the best of FIFO, SA and the B&B incumbent.
Reference reference_makespan(const FjspInstance& instance, int oracle_max_ops,
                             const BnbConfig& bnb, const SaConfig& sa = {});

struct TrainState {
  TrainConfig config;
  QNetwork policy;
  QParams target;
  AdamState<double> adam;
  ReplayBuffer buffer;
  int epoch = 0;  // completed epochs
  std::vector<EpochMetrics> metrics;
};

TrainState init_training(const TrainConfig& cfg);

using InstanceSource = std::function<FjspInstance(std::uint64_t seed)>;

class Trainer {
 public:
  // Instances come from `source` (default: cfg.generator).
  explicit Trainer(TrainState state, InstanceSource source = {});

  EpochMetrics run_epoch();
  void run(int until_epoch, const std::function<void(const EpochMetrics&)>& on_epoch = {});

  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  bool eval_exact() const { return eval_exact_; }

 private:
  TrainState state_;
  InstanceSource source_;
  std::vector<FjspInstance> eval_set_;
  std::vector<Reference> eval_refs_;
  bool eval_exact_ = true;
};

struct TrainResult {
  QNetwork net;
  std::vector<EpochMetrics> metrics;
};

TrainResult train(const TrainConfig& cfg, InstanceSource source = {});

// Greedy evaluation of `params` on a set of instances with references.
struct GreedyEval {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::optional<double> mean_gap;
};
GreedyEval evaluate_greedy(const QParams& params, int rounds, const std::vector<FjspInstance>& set,
                           const std::vector<Reference>& refs, int threads = 1);

nlohmann::ordered_json training_to_json(const TrainState& state);
TrainState training_from_json(const nlohmann::json& j);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
// Parses and validates the whole file before returning; throws ParseError.
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace fjsp
