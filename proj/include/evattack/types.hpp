#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace evattack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One row per agent (s x T) or per bus (n x T); rows are contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  NonRadialTopology,
  DisconnectedBus,
  BadNodeIndex,
  IndexOutOfRange,
  DimensionMismatch,
  InfeasibleTarget,
  NumericalDivergence,
  WiretapUnavailable,
  NotArmed,
  BoundViolated,
  OracleNotConverged,
  ProblemTooLarge,
  EmptyWindow,
  ScenarioMismatch,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evattack
