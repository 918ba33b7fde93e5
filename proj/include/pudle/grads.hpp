#pragma once

#include "pudle/encoder.hpp"
#include "pudle/types.hpp"

#include <functional>

namespace pudle {

enum class GradKind { kDec, kAeLasso, kAeLs, kOracleLocal, kOracleGlobal };

const char* grad_kind_name(GradKind kind);

struct GradientEstimate {
  Matrix value;  // m x p, batch average
  GradKind kind = GradKind::kDec;
  int t_used = 0;
  /// True when no pre-threshold value came within eps_margin of the
  /// threshold anywhere on the trajectory, so reverse mode and finite
  /// differences see the same active sets.
  bool margin_ok = true;
};

enum class BackpropLoss { kLasso, kLeastSquares };

/// eps_margin default: 1e-4 * (effective threshold at the schedule's base
/// lambda). Gradient-vs-FD tests skip when the margin is below this.
double margin_epsilon(const EncoderConfig& config);

/// (1/n) sum_j (D z_j - x_j) z_j^T with z treated as constant.
GradientEstimate grad_dec(const Matrix& x, const Matrix& z_t, const Matrix& d);

/// Reverse-mode derivative w.r.t. D of
///   0.5 ||x - D z_T(D)||^2 (+ lambda ||z_T(D)||_1 for the lasso loss)
/// through the full unrolled computation. The prox derivative is the 0/1
/// active-set mask; the l1 subgradient at zero entries is 0. t_used < 0
/// means the trajectory's full depth. Sample reductions run in fixed chunk
/// order, so the result does not depend on the thread count.
GradientEstimate backprop_grad(const Matrix& x, const BatchTrajectory& traj,
                               const Matrix& d, BackpropLoss loss,
                               const EncoderConfig& config, int t_used = -1);

GradientEstimate backprop_grad(const Vector& x, const CodeTrajectory& traj,
                               const Matrix& d, BackpropLoss loss,
                               const EncoderConfig& config, int t_used = -1);

/// Dense Jacobian of a code w.r.t. the dictionary. Column j of `stacked` is
/// the column-major vec of the m x p matrix d z_(j) / d D.
struct JacobianDense {
  Index m = 0;
  Index p = 0;
  Matrix stacked;  // (m*p) x p

  Matrix block(Index j) const;
  /// J^+ v = sum_j v_j * block(j), an m x p matrix.
  Matrix adjoint_apply(const Vector& v) const;
  double frobenius() const { return stacked.norm(); }
};

inline constexpr long kDenseJacobianBudget = 10'000'000;  // m * p^2 entries

/// Forward accumulation of J_{t+1} = grad_1 Phi^T J_t + grad_2 Phi^T with
/// J_0 = 0, using the trajectory's realized thresholds. The optional visitor
/// sees J_t after every layer (t = 1..T).
JacobianDense explicit_jacobian(
    const CodeTrajectory& traj, const Matrix& d, const Vector& x,
    const EncoderConfig& config,
    const std::function<void(int, const JacobianDense&)>& per_layer = nullptr);

/// Closed-form Jacobian of the lasso minimizer: rows on the support via a
/// solve against the support Gram, zero off the support.
JacobianDense fixed_point_jacobian(const Vector& z_hat, const Matrix& d,
                                   const Vector& x);

/// grad_2 L at the lasso solution (best local direction), batch-averaged.
GradientEstimate grad_local_oracle(const Matrix& x, const Matrix& d,
                                   double lambda, double tol = 1e-10,
                                   int max_iter = 20000);

/// grad_2 L at the ground-truth codes, batch-averaged.
GradientEstimate grad_global_oracle(const Matrix& x, const Matrix& z_star,
                                    const Matrix& d);

}  // namespace pudle
