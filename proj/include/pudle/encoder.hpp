#pragma once

#include "pudle/types.hpp"

#include <optional>
#include <vector>

namespace pudle {

enum class Prox { kSoft, kHard };

/// Per-layer threshold rule for the unrolled encoder.
///   fixed:     lambda_t = lambda
///   geometric: lambda_t = lambda * nu^t
///   oracle:    lambda_t = mu_over_sqrt_m * ||z_star - z_t||_1 + a_gamma
/// The oracle kind needs the ground-truth code attached at evaluation time;
/// lambda0 optionally overrides layer 0 so the first step can use the
/// support-recovery threshold instead of the oracle formula.
struct LambdaSchedule {
  enum class Kind { kFixed, kGeometric, kOracle };
  Kind kind = Kind::kFixed;
  double lambda = 0.2;
  double nu = 1.0;
  double a_gamma = 0.0;
  double mu_over_sqrt_m = 0.0;
  std::optional<double> lambda0;

  double value(int t, const Vector& z_t, const Vector* z_star) const;

  static LambdaSchedule fixed(double lambda);
  static LambdaSchedule geometric(double lambda, double nu);
  static LambdaSchedule oracle(double mu_over_sqrt_m, double a_gamma);
};

struct EncoderConfig {
  int unroll = 100;  // T
  double alpha = 0.2;
  Prox prox = Prox::kSoft;
  LambdaSchedule schedule;
  std::optional<Vector> z0;
  /// When set, alpha >= 1/sigma_max^2(D) is an error; otherwise it only
  /// warns on stderr once per encode call.
  bool strict_step_size = false;
};

/// z_0..z_T plus per-layer support sets and the minimum distance of
/// pre-threshold values to the threshold (one margin per layer).
struct CodeTrajectory {
  std::vector<Vector> states;
  std::vector<std::vector<Index>> supports;
  std::vector<double> pre_threshold_margins;
  std::vector<double> lambdas;  // realized lambda_t per layer
};

/// Column-major batch of trajectories. Column j of states[t] is sample j's
/// z_t; lambdas and margins are (T x n).
struct BatchTrajectory {
  std::vector<Matrix> states;
  Matrix lambdas;
  Matrix margins;

  int unroll() const { return static_cast<int>(states.size()) - 1; }
  Vector min_margins() const;  // per-sample minimum over layers
};

/// Precomputed pieces of one unrolled layer: w = I - alpha D^T D and
/// at = alpha D^T. Every code path (forward, backward, Jacobians) builds the
/// pre-threshold point as w * z + at * x through this struct, so recomputed
/// values agree bit-for-bit.
struct LayerOp {
  Matrix w;
  Matrix at;
  double alpha = 0.0;
};

LayerOp make_layer_op(const Matrix& d, double alpha);

double soft_threshold(double v, double b);
double hard_threshold(double v, double b);
Vector soft_threshold(const Vector& v, double b);
Vector hard_threshold(const Vector& v, double b);

/// prox_{alpha lambda_t}(z - alpha D^T (D z - x)). For the hard prox the
/// threshold is the raw lambda_t, not alpha-scaled.
Vector ista_step(const Vector& z, const Matrix& d, const Vector& x,
                 double alpha, double lambda_t, Prox prox);

CodeTrajectory encode(const Vector& x, const Matrix& d,
                      const EncoderConfig& config,
                      const Vector* z_star = nullptr);

/// Samples are processed independently (one column at a time through the
/// same per-sample kernel), so the result matches sequential per-sample
/// encoding exactly and does not depend on the thread count.
BatchTrajectory encode_batch(const Matrix& x, const Matrix& d,
                             const EncoderConfig& config,
                             const Matrix* z_star = nullptr);

struct LassoResult {
  Vector z;
  double kkt = 0.0;
  int iterations = 0;
};

/// ISTA until kkt_residual <= tol, restarting at a smaller step size if the
/// iterates blow up. Throws NonConverged (carrying the best residual) after
/// max_iter total iterations.
LassoResult solve_lasso(const Vector& x, const Matrix& d, double lambda,
                        double tol = 1e-10, int max_iter = 20000);

Matrix solve_lasso_batch(const Matrix& x, const Matrix& d, double lambda,
                         double tol = 1e-10, int max_iter = 20000);

/// max over coordinates of the KKT violation of the lasso at z.
double kkt_residual(const Vector& z, const Vector& x, const Matrix& d,
                    double lambda);

/// 0.5 ||x - D z||^2 + lambda ||z||_1.
double lasso_objective(const Vector& x, const Matrix& d, const Vector& z,
                       double lambda);

std::vector<Index> support_of(const Vector& z);

}  // namespace pudle
