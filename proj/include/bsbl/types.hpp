#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bsbl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  DimensionMismatch,
  SingularSystem,
  NonPSD,
  InvalidCoefficient,
  InvalidBlockSize,
  ZeroSensingBlock,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorCode code);

/// Raised for contract violations and numerical failures. Soft conditions
/// (iteration budget exhausted, degenerate correlation estimates) are
/// reported through flags on the returned values instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bsbl
