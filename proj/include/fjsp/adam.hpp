#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fjsp/error.hpp"

namespace fjsp {

struct AdamConfig {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// First/second moment estimates, one per parameter tensor, plus step count.
template <typename Scalar>
struct AdamState {
  std::vector<DenseMatrix<Scalar>> m;
  std::vector<DenseMatrix<Scalar>> v;
  std::int64_t t = 0;

  static AdamState zeros_like(std::span<const DenseMatrix<Scalar>> params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.push_back(DenseMatrix<Scalar>::Zero(p.rows(), p.cols()));
      s.v.push_back(DenseMatrix<Scalar>::Zero(p.rows(), p.cols()));
    }
    return s;
  }

  bool operator==(const AdamState& o) const {
    if (t != o.t || m.size() != o.m.size()) return false;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] != o.m[i] || v[i] != o.v[i]) return false;
    return true;
  }
};

// Bias-corrected Adam update of every tensor in `params`. Throws
// TrainingError before touching anything if a gradient is non-finite.
template <typename Scalar>
void adam_step(std::span<DenseMatrix<Scalar>> params, std::span<const DenseMatrix<Scalar>> grads,
               AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw StructuralError("adam: parameter, gradient and moment counts differ");
  for (const auto& g : grads)
    if (!g.allFinite()) throw TrainingError("adam: non-finite gradient");

  ++state.t;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.t));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.t));
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + eps);
  }
}

}  // namespace fjsp
