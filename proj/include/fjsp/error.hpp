#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fjsp {

// Base class for every error raised by the library. `kind()` is a short
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

struct StructuralError : Error {
  explicit StructuralError(const std::string& what) : Error("structural", what) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& what) : Error("solver", what) {}
};

// Raised when a solution's combined job/queue precedence graph has a cycle.
// `cycle` lists operation ids along one witness cycle.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<int> cycle)
      : Error("infeasible", what), cycle_(std::move(cycle)) {}
  const std::vector<int>& cycle() const noexcept { return cycle_; }

 private:
  std::vector<int> cycle_;
};

}  // namespace fjsp
