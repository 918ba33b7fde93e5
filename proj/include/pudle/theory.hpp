#pragma once

#include "pudle/datagen.hpp"
#include "pudle/encoder.hpp"
#include "pudle/grads.hpp"
#include "pudle/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace pudle {

/// Geometric-rate fit of an error curve: least squares on log(err) vs t over
/// [t_start, t_end], after the support has settled. rho_hat = exp(slope).
struct RateFit {
  double rho_hat = 1.0;
  double r_squared = 0.0;
  int t_start = 0;
  int t_end = 0;
  int support_selection_step = 0;
};

/// Values at or below this floor are treated as numerically zero and
/// excluded from log-domain fits.
inline constexpr double kErrorFloor = 1e-15;

/// errors[t] is the per-layer error, t = 0..T. Points at the floor are
/// excluded; fewer than 3 usable points is an error.
RateFit rate_fit(const std::vector<double>& errors, int support_selection_step);

/// Smallest B such that supp(z_t) is the same for all t >= B.
int support_selection_step(const CodeTrajectory& traj);

/// Fraction of samples whose signed support is exactly recovered by one
/// thresholded gradient step from zero.
double one_step_support_recovery_rate(const SyntheticProblem& problem,
                                      const Matrix& d, double lambda0,
                                      double alpha);

struct PreservationTrace {
  std::vector<bool> ok;      // layer t = 1..T
  int first_violation = -1;  // -1 when every layer matches
};

PreservationTrace support_preservation_trace(const CodeTrajectory& traj,
                                             const Vector& z_star);

/// 95% Wilson score interval for a Monte-Carlo rate.
struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};
WilsonInterval wilson_interval(long successes, long trials);

struct CurveOptions {
  double lasso_tol = 1e-11;
  int lasso_max_iter = 40000;
  bool with_jacobian = false;  // small instances only
  int jacobian_samples = 1;
};

/// Per-layer error curves for one dictionary: code errors per sample,
/// Jacobian error (optional), and every gradient estimator against both the
/// local direction (lasso) and the global direction (ground truth).
struct ErrorCurves {
  Matrix code_err_lasso;  // (T+1) x n, ||z_t - z_hat||
  Matrix code_err_star;   // (T+1) x n, ||z_t - z_star||
  std::vector<double> jacobian_err;  // t = 1..T, mean over probed samples
  std::map<std::string, std::vector<double>> grad_err_local;   // t = 1..T
  std::map<std::string, std::vector<double>> grad_err_global;  // t = 1..T

  std::vector<double> mean_code_err_lasso() const;
  std::vector<double> mean_code_err_star() const;
};

ErrorCurves gradient_error_curves(const SyntheticProblem& problem,
                                  const Matrix& d,
                                  const EncoderConfig& enc_config,
                                  const CurveOptions& options = {});

/// Mean over samples of ||solve_lasso(x, d_star, lambda) - z_star||.
double amplitude_bias(const SyntheticProblem& problem, double lambda,
                      double tol, int max_iter = 40000);

/// Least-squares slope and r^2 of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace pudle
