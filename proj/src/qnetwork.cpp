#include "fjsp/qnetwork.hpp"

#include <cmath>
#include <fstream>

#include "fjsp/error.hpp"

namespace fjsp {

namespace {

constexpr std::array<std::string_view, QParams::kTensors> kNames = {
    "embed_op.weight",  "embed_op.bias",   "embed_mach.weight", "embed_mach.bias",
    "conv.job.self",    "conv.job.nbr",    "conv.queue.self",   "conv.queue.nbr",
    "conv.compat_op.self", "conv.compat_op.nbr", "conv.compat_mach.self", "conv.compat_mach.nbr"};

std::pair<int, int> shape_of(int index, int d) {
  switch (index) {
    case QParams::kEmbedOpW:
      return {d, kOpFeatures};
    case QParams::kEmbedMachW:
      return {d, kMachFeatures};
    case QParams::kEmbedOpB:
    case QParams::kEmbedMachB:
      return {d, 1};
    default:
      return {d, d};
  }
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& upstream) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out = x * w.transpose();
  out.rowwise() += b.col(0).transpose();
  return out;
}

void check_dims(const QParams& p, const HeteroGraph& g) {
  if (g.op_feats.cols() != kOpFeatures || g.mach_feats.cols() != kMachFeatures)
    throw StructuralError("graph feature width does not match the network");
  if (g.agg.job.rows() != g.n_ops() || g.agg.to_mach.rows() != g.n_machines())
    throw StructuralError("graph aggregators are stale; call finalize()");
  for (int i = 0; i < QParams::kTensors; ++i) {
    const auto [r, c] = shape_of(i, p.dim);
    if (p.tensors[i].rows() != r || p.tensors[i].cols() != c)
      throw StructuralError("parameter '" + std::string(QParams::name(i)) + "' has the wrong shape");
  }
}

Eigen::VectorXd readout(const HeteroGraph& g, const Eigen::MatrixXd& op_h, const Eigen::MatrixXd& mach_h) {
  Eigen::VectorXd q(g.n_candidates());
  for (int c = 0; c < g.n_candidates(); ++c) {
    const auto& e = g.edges_compat[g.candidates[c]];
    q(c) = op_h.row(e.op).dot(mach_h.row(e.machine));
  }
  return q;
}

template <bool kRecord>
Eigen::VectorXd run(const QParams& p, int rounds, const HeteroGraph& g, ForwardTape* tape) {
  check_dims(p, g);
  Eigen::MatrixXd op_pre = affine(g.op_feats, p.tensors[QParams::kEmbedOpW], p.tensors[QParams::kEmbedOpB]);
  Eigen::MatrixXd mach_pre =
      affine(g.mach_feats, p.tensors[QParams::kEmbedMachW], p.tensors[QParams::kEmbedMachB]);
  Eigen::MatrixXd op_h = relu(op_pre), mach_h = relu(mach_pre);
  if constexpr (kRecord) {
    tape->graph = &g;
    tape->op_pre0 = std::move(op_pre);
    tape->mach_pre0 = std::move(mach_pre);
    tape->rounds.clear();
  }
  const Eigen::MatrixXd op_self =
      p.self(Relation::Job) + p.self(Relation::Queue) + p.self(Relation::CompatToOp);
  for (int r = 0; r < rounds; ++r) {
    Eigen::MatrixXd agg_job = g.agg.job * op_h;
    Eigen::MatrixXd agg_queue = g.agg.queue * op_h;
    Eigen::MatrixXd agg_to_op = g.agg.to_op * mach_h;
    Eigen::MatrixXd agg_to_mach = g.agg.to_mach * op_h;
    Eigen::MatrixXd next_op_pre = op_h * op_self.transpose() +
                                  agg_job * p.nbr(Relation::Job).transpose() +
                                  agg_queue * p.nbr(Relation::Queue).transpose() +
                                  agg_to_op * p.nbr(Relation::CompatToOp).transpose();
    Eigen::MatrixXd next_mach_pre = mach_h * p.self(Relation::CompatToMach).transpose() +
                                    agg_to_mach * p.nbr(Relation::CompatToMach).transpose();
    Eigen::MatrixXd next_op = relu(next_op_pre), next_mach = relu(next_mach_pre);
    if constexpr (kRecord) {
      tape->rounds.push_back({std::move(op_h), std::move(mach_h), std::move(agg_job),
                              std::move(agg_queue), std::move(agg_to_op), std::move(agg_to_mach),
                              std::move(next_op_pre), std::move(next_mach_pre)});
    }
    op_h = std::move(next_op);
    mach_h = std::move(next_mach);
  }
  Eigen::VectorXd q = readout(g, op_h, mach_h);
  if constexpr (kRecord) {
    tape->op_out = std::move(op_h);
    tape->mach_out = std::move(mach_h);
    tape->q = q;
  }
  return q;
}

}  // namespace

std::string_view QParams::name(int index) { return kNames.at(index); }

QParams QParams::zeros(int dim) {
  if (dim < 1) throw ParameterError("embedding dimension must be >= 1");
  QParams p;
  p.dim = dim;
  for (int i = 0; i < kTensors; ++i) {
    const auto [r, c] = shape_of(i, dim);
    p.tensors[i] = Eigen::MatrixXd::Zero(r, c);
  }
  return p;
}

QParams QParams::random(int dim, Rng& rng) {
  QParams p = zeros(dim);
  for (int i = 0; i < kTensors; ++i) {
    // Biases share the fan-in of their weight matrix.
    const int fan_in = i == kEmbedOpB ? kOpFeatures : i == kEmbedMachB ? kMachFeatures
                                                                         : static_cast<int>(p.tensors[i].cols());
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < p.tensors[i].cols(); ++c)
      for (Eigen::Index r = 0; r < p.tensors[i].rows(); ++r) p.tensors[i](r, c) = u(rng);
  }
  return p;
}

std::size_t QParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

bool QParams::all_finite() const {
  for (const auto& t : tensors)
    if (!t.allFinite()) return false;
  return true;
}

QParams& QParams::operator+=(const QParams& other) {
  for (int i = 0; i < kTensors; ++i) tensors[i] += other.tensors[i];
  return *this;
}

bool QParams::operator==(const QParams& other) const {
  if (dim != other.dim) return false;
  for (int i = 0; i < kTensors; ++i)
    if (tensors[i].rows() != other.tensors[i].rows() || tensors[i].cols() != other.tensors[i].cols() ||
        tensors[i] != other.tensors[i])
      return false;
  return true;
}

Eigen::VectorXd q_values(const QParams& params, int rounds, const HeteroGraph& g) {
  return run<false>(params, rounds, g, nullptr);
}

ForwardTape forward(const QParams& params, int rounds, const HeteroGraph& g) {
  ForwardTape tape;
  run<true>(params, rounds, g, &tape);
  return tape;
}

QParams backward(const QParams& p, const ForwardTape& tape, const Eigen::VectorXd& upstream) {
  if (tape.graph == nullptr) throw ContractError("backward called without a recorded forward pass");
  const HeteroGraph& g = *tape.graph;
  if (upstream.size() != g.n_candidates())
    throw StructuralError("upstream gradient size does not match candidate count");

  QParams grad = QParams::zeros(p.dim);
  Eigen::MatrixXd d_op = Eigen::MatrixXd::Zero(tape.op_out.rows(), p.dim);
  Eigen::MatrixXd d_mach = Eigen::MatrixXd::Zero(tape.mach_out.rows(), p.dim);
  for (int c = 0; c < g.n_candidates(); ++c) {
    if (upstream(c) == 0.0) continue;
    const auto& e = g.edges_compat[g.candidates[c]];
    d_op.row(e.op) += upstream(c) * tape.mach_out.row(e.machine);
    d_mach.row(e.machine) += upstream(c) * tape.op_out.row(e.op);
  }

  const Eigen::MatrixXd op_self =
      p.self(Relation::Job) + p.self(Relation::Queue) + p.self(Relation::CompatToOp);
  for (auto it = tape.rounds.rbegin(); it != tape.rounds.rend(); ++it) {
    const Eigen::MatrixXd d_op_pre = relu_mask(it->op_pre, d_op);
    const Eigen::MatrixXd d_mach_pre = relu_mask(it->mach_pre, d_mach);

    const Eigen::MatrixXd op_self_grad = d_op_pre.transpose() * it->op_in;
    grad.self(Relation::Job) += op_self_grad;
    grad.self(Relation::Queue) += op_self_grad;
    grad.self(Relation::CompatToOp) += op_self_grad;
    grad.nbr(Relation::Job) += d_op_pre.transpose() * it->agg_job;
    grad.nbr(Relation::Queue) += d_op_pre.transpose() * it->agg_queue;
    grad.nbr(Relation::CompatToOp) += d_op_pre.transpose() * it->agg_to_op;
    grad.self(Relation::CompatToMach) += d_mach_pre.transpose() * it->mach_in;
    grad.nbr(Relation::CompatToMach) += d_mach_pre.transpose() * it->agg_to_mach;

    d_op = d_op_pre * op_self;
    d_op += g.agg.job.transpose() * (d_op_pre * p.nbr(Relation::Job));
    d_op += g.agg.queue.transpose() * (d_op_pre * p.nbr(Relation::Queue));
    d_op += g.agg.to_mach.transpose() * (d_mach_pre * p.nbr(Relation::CompatToMach));
    d_mach = d_mach_pre * p.self(Relation::CompatToMach);
    d_mach += g.agg.to_op.transpose() * (d_op_pre * p.nbr(Relation::CompatToOp));
  }

  const Eigen::MatrixXd d_op_pre0 = relu_mask(tape.op_pre0, d_op);
  const Eigen::MatrixXd d_mach_pre0 = relu_mask(tape.mach_pre0, d_mach);
  grad.tensors[QParams::kEmbedOpW] = d_op_pre0.transpose() * g.op_feats;
  grad.tensors[QParams::kEmbedOpB] = d_op_pre0.colwise().sum().transpose();
  grad.tensors[QParams::kEmbedMachW] = d_mach_pre0.transpose() * g.mach_feats;
  grad.tensors[QParams::kEmbedMachB] = d_mach_pre0.colwise().sum().transpose();
  return grad;
}

const Eigen::VectorXd& QNetwork::forward(const HeteroGraph& g) {
  tape_ = fjsp::forward(params_, rounds_, g);
  return tape_->q;
}

QParams QNetwork::backward(const Eigen::VectorXd& upstream) const {
  if (!tape_) throw ContractError("backward called without a recorded forward pass");
  return fjsp::backward(params_, *tape_, upstream);
}

nlohmann::ordered_json params_to_json(const QParams& params) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (int i = 0; i < QParams::kTensors; ++i) {
    const auto& t = params.tensors[i];
    nlohmann::ordered_json entry;
    entry["shape"] = {t.rows(), t.cols()};
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    entry["data"] = std::move(data);
    out[std::string(QParams::name(i))] = std::move(entry);
  }
  return out;
}

QParams params_from_json(const nlohmann::json& j, int dim) {
  QParams p = QParams::zeros(dim);
  if (!j.is_object()) throw ParseError("parameter block must be an object");
  for (int i = 0; i < QParams::kTensors; ++i) {
    const std::string name(QParams::name(i));
    auto it = j.find(name);
    if (it == j.end()) throw ParseError("missing parameter '" + name + "'");
    const auto [rows, cols] = shape_of(i, dim);
    const auto& shape = (*it).at("shape");
    if (shape.size() != 2 || shape[0].get<int>() != rows || shape[1].get<int>() != cols)
      throw ParseError("parameter '" + name + "' has the wrong shape");
    const auto& data = (*it).at("data");
    if (!data.is_array() || static_cast<int>(data.size()) != rows * cols)
      throw ParseError("parameter '" + name + "' has the wrong element count");
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const auto& v = data[static_cast<std::size_t>(r * cols + c)];
        if (!v.is_number()) throw ParseError("parameter '" + name + "' holds a non-number");
        p.tensors[i](r, c) = v.get<double>();
      }
  }
  return p;
}

nlohmann::ordered_json network_to_json(const QNetwork& net) {
  nlohmann::ordered_json j;
  j["format"] = "fjsp-qnet";
  j["feature_schema"] = kFeatureSchemaVersion;
  j["d"] = net.dim();
  j["k"] = net.rounds();
  j["params"] = params_to_json(net.params());
  return j;
}

QNetwork network_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") == "fjsp-train") return network_from_json(j.at("network"));
    if (j.value("format", "") != "fjsp-qnet") throw ParseError("not a network checkpoint");
    if (j.at("feature_schema").get<int>() != kFeatureSchemaVersion)
      throw ParseError("feature schema version mismatch");
    const int d = j.at("d").get<int>();
    const int k = j.at("k").get<int>();
    if (k < 0) throw ParseError("negative round count");
    return QNetwork(params_from_json(j.at("params"), d), k);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed network checkpoint: ") + e.what());
  }
}

void save_network(const QNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path.string());
  out << network_to_json(net).dump() << '\n';
}

QNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace fjsp
