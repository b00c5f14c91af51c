#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace svcox {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown for numerical failures (Cholesky breakdown, non-finite
// quadratic forms). Maps to CLI exit code 2; validation problems use
// std::invalid_argument / std::runtime_error and map to exit code 1.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace svcox
