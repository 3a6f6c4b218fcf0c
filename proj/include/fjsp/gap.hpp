#pragma once

#include "fjsp/error.hpp"

namespace fjsp {

// Relative error of a candidate makespan against the optimal (or best-known) one.
inline double optimality_gap(int c_min, int c_star) {
  if (c_star <= 0) throw ParameterError("optimality_gap: reference makespan must be >= 1");
  return static_cast<double>(c_min) / static_cast<double>(c_star) - 1.0;
}

}  // namespace fjsp
