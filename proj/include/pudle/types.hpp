#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace pudle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Iterative solver hit max_iter without reaching tolerance.
class NonConverged : public std::runtime_error {
 public:
  NonConverged(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// The Gram matrix on the active support is numerically singular.
class SingularSupportGram : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured size guard (dense Jacobian, representer model, ...) was hit.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace pudle
