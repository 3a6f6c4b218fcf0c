#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fjsp/graph.hpp"
#include "fjsp/rng.hpp"

namespace fjsp {

// Relations of the heterogeneous layer; each has its own self and neighbour map.
enum class Relation : int { Job = 0, Queue = 1, CompatToOp = 2, CompatToMach = 3 };
inline constexpr int kRelations = 4;

// Parameter tensors of the Q-network, addressed by a fixed index.
//   embed_op  (d x 7) + bias, embed_mach (d x 2) + bias,
//   per relation: self (d x d), nbr (d x d).
// Also used as the gradient container.
struct QParams {
  static constexpr int kEmbedOpW = 0, kEmbedOpB = 1, kEmbedMachW = 2, kEmbedMachB = 3;
  static constexpr int kTensors = 4 + 2 * kRelations;
  static constexpr int self_index(Relation r) { return 4 + 2 * static_cast<int>(r); }
  static constexpr int nbr_index(Relation r) { return 5 + 2 * static_cast<int>(r); }
  static std::string_view name(int index);

  int dim = 0;
  std::array<Eigen::MatrixXd, kTensors> tensors;

  static QParams zeros(int dim);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor.
  static QParams random(int dim, Rng& rng);

  const Eigen::MatrixXd& self(Relation r) const { return tensors[self_index(r)]; }
  const Eigen::MatrixXd& nbr(Relation r) const { return tensors[nbr_index(r)]; }
  Eigen::MatrixXd& self(Relation r) { return tensors[self_index(r)]; }
  Eigen::MatrixXd& nbr(Relation r) { return tensors[nbr_index(r)]; }

  std::size_t parameter_count() const;
  bool all_finite() const;
  QParams& operator+=(const QParams& other);
  bool operator==(const QParams& other) const;
};

// (7d + d) + (2d + d) + 8 d^2.
constexpr std::size_t parameter_count(int dim) {
  const std::size_t d = static_cast<std::size_t>(dim);
  return (kOpFeatures * d + d) + (kMachFeatures * d + d) + 2 * kRelations * d * d;
}

// Intermediate activations of one forward pass, enough for backward.
struct ForwardTape {
  struct Round {
    Eigen::MatrixXd op_in, mach_in;
    Eigen::MatrixXd agg_job, agg_queue, agg_to_op, agg_to_mach;
    Eigen::MatrixXd op_pre, mach_pre;
  };
  const HeteroGraph* graph = nullptr;
  Eigen::MatrixXd op_pre0, mach_pre0;
  std::vector<Round> rounds;
  Eigen::MatrixXd op_out, mach_out;
  Eigen::VectorXd q;
};

// Q(o, m) = <h_o, h_m> for every candidate edge of `g`, after `rounds`
// weight-shared message-passing rounds.
Eigen::VectorXd q_values(const QParams& params, int rounds, const HeteroGraph& g);

// Same as q_values but records the tape. `g` must outlive the tape.
ForwardTape forward(const QParams& params, int rounds, const HeteroGraph& g);

// Exact gradients of <upstream, q> with respect to every parameter.
QParams backward(const QParams& params, const ForwardTape& tape, const Eigen::VectorXd& upstream);

// Stateful wrapper: remembers the last forward pass for backward().
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(QParams params, int rounds) : params_(std::move(params)), rounds_(rounds) {}

  const QParams& params() const { return params_; }
  QParams& params() { return params_; }
  int rounds() const { return rounds_; }
  int dim() const { return params_.dim; }
  std::size_t parameter_count() const { return params_.parameter_count(); }

  const Eigen::VectorXd& forward(const HeteroGraph& g);
  // Throws ContractError without a preceding forward().
  QParams backward(const Eigen::VectorXd& upstream) const;

 private:
  QParams params_;
  int rounds_ = 2;
  std::optional<ForwardTape> tape_;
};

nlohmann::ordered_json params_to_json(const QParams& params);
QParams params_from_json(const nlohmann::json& j, int dim);

// Checkpoint of a bare network: {format, feature_schema, d, k, params}.
nlohmann::ordered_json network_to_json(const QNetwork& net);
// Accepts a network checkpoint or a training checkpoint (uses its policy net).
QNetwork network_from_json(const nlohmann::json& j);
void save_network(const QNetwork& net, const std::filesystem::path& path);
QNetwork load_network(const std::filesystem::path& path);

}  // namespace fjsp
