#include "pudle/theory.hpp"

#include "pudle/metrics.hpp"

#include <omp.h>

#include <cmath>

namespace pudle {

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, "fit_line: need >= 2 points");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  LineFit fit;
  if (denom == 0.0) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot)
                               : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

RateFit rate_fit(const std::vector<double>& errors,
                 int support_selection_step) {
  require(support_selection_step >= 0, "rate_fit: negative selection step");
  std::vector<double> ts, logs;
  for (std::size_t t = static_cast<std::size_t>(support_selection_step);
       t < errors.size(); ++t) {
    require(errors[t] >= 0.0, "rate_fit: errors must be nonnegative");
    if (errors[t] <= kErrorFloor) continue;  // numerically zero; skip
    ts.push_back(static_cast<double>(t));
    logs.push_back(std::log(errors[t]));
  }
  require(ts.size() >= 3, "rate_fit: window shorter than 3 usable points");
  LineFit fit = fit_line(ts, logs);
  RateFit out;
  out.rho_hat = std::exp(fit.slope);
  out.r_squared = fit.r_squared;
  out.t_start = static_cast<int>(ts.front());
  out.t_end = static_cast<int>(ts.back());
  out.support_selection_step = support_selection_step;
  return out;
}

int support_selection_step(const CodeTrajectory& traj) {
  int b = 0;
  for (std::size_t t = 1; t < traj.supports.size(); ++t)
    if (traj.supports[t] != traj.supports[t - 1]) b = static_cast<int>(t);
  return b;
}

double one_step_support_recovery_rate(const SyntheticProblem& problem,
                                      const Matrix& d, double lambda0,
                                      double alpha) {
  require(problem.z_star.cols() == problem.x.cols(),
          "one_step_support_recovery_rate: problem inconsistent");
  const Index n = problem.n();
  LayerOp op = make_layer_op(d, alpha);
  const double thr = alpha * lambda0;
  long hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (Index j = 0; j < n; ++j) {
    Vector u = op.at * problem.x.col(j);  // z0 = 0, so u = alpha D^T x
    Vector z1(u.size());
    for (Index i = 0; i < u.size(); ++i) z1(i) = soft_threshold(u(i), thr);
    hits += support_stats(z1, problem.z_star.col(j)).exact_signed ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

PreservationTrace support_preservation_trace(const CodeTrajectory& traj,
                                             const Vector& z_star) {
  PreservationTrace out;
  std::vector<Index> target = support_of(z_star);
  for (std::size_t t = 1; t < traj.supports.size(); ++t) {
    bool match = traj.supports[t] == target;
    out.ok.push_back(match);
    if (!match && out.first_violation < 0)
      out.first_violation = static_cast<int>(t);
  }
  return out;
}

WilsonInterval wilson_interval(long successes, long trials) {
  require(trials > 0 && successes >= 0 && successes <= trials,
          "wilson_interval: bad counts");
  const double z = 1.959963984540054;  // 97.5th normal quantile
  double n = static_cast<double>(trials);
  double phat = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (phat + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<double> ErrorCurves::mean_code_err_lasso() const {
  std::vector<double> out(static_cast<std::size_t>(code_err_lasso.rows()));
  for (Index t = 0; t < code_err_lasso.rows(); ++t)
    out[static_cast<std::size_t>(t)] = code_err_lasso.row(t).mean();
  return out;
}

std::vector<double> ErrorCurves::mean_code_err_star() const {
  std::vector<double> out(static_cast<std::size_t>(code_err_star.rows()));
  for (Index t = 0; t < code_err_star.rows(); ++t)
    out[static_cast<std::size_t>(t)] = code_err_star.row(t).mean();
  return out;
}

ErrorCurves gradient_error_curves(const SyntheticProblem& problem,
                                  const Matrix& d, const EncoderConfig& enc,
                                  const CurveOptions& opts) {
  require(enc.schedule.kind == LambdaSchedule::Kind::kFixed,
          "gradient_error_curves: curves are defined for a fixed schedule");
  const Index n = problem.n();
  const int T = enc.unroll;
  const double lambda = enc.schedule.lambda;

  BatchTrajectory traj = encode_batch(problem.x, d, enc);
  Matrix z_hat = solve_lasso_batch(problem.x, d, lambda, opts.lasso_tol,
                                   opts.lasso_max_iter);
  GradientEstimate g_local = grad_local_oracle(problem.x, d, lambda,
                                               opts.lasso_tol,
                                               opts.lasso_max_iter);
  GradientEstimate g_global = grad_global_oracle(problem.x, problem.z_star, d);

  ErrorCurves curves;
  curves.code_err_lasso.resize(T + 1, n);
  curves.code_err_star.resize(T + 1, n);
  for (int t = 0; t <= T; ++t) {
    const Matrix& z_t = traj.states[static_cast<std::size_t>(t)];
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < n; ++j) {
      curves.code_err_lasso(t, j) = (z_t.col(j) - z_hat.col(j)).norm();
      curves.code_err_star(t, j) = (z_t.col(j) - problem.z_star.col(j)).norm();
    }
  }

  auto& dec_local = curves.grad_err_local["dec"];
  auto& lasso_local = curves.grad_err_local["ae-lasso"];
  auto& ls_local = curves.grad_err_local["ae-ls"];
  auto& dec_global = curves.grad_err_global["dec"];
  auto& lasso_global = curves.grad_err_global["ae-lasso"];
  auto& ls_global = curves.grad_err_global["ae-ls"];
  for (int t = 1; t <= T; ++t) {
    GradientEstimate gd =
        grad_dec(problem.x, traj.states[static_cast<std::size_t>(t)], d);
    GradientEstimate gl =
        backprop_grad(problem.x, traj, d, BackpropLoss::kLasso, enc, t);
    GradientEstimate gs =
        backprop_grad(problem.x, traj, d, BackpropLoss::kLeastSquares, enc, t);
    dec_local.push_back((gd.value - g_local.value).norm());
    lasso_local.push_back((gl.value - g_local.value).norm());
    ls_local.push_back((gs.value - g_local.value).norm());
    dec_global.push_back((gd.value - g_global.value).norm());
    lasso_global.push_back((gl.value - g_global.value).norm());
    ls_global.push_back((gs.value - g_global.value).norm());
  }

  if (opts.with_jacobian) {
    const Index m = problem.m();
    const Index p = problem.p();
    require(m * p * p <= kDenseJacobianBudget,
            "gradient_error_curves: instance too large for dense Jacobians");
    const int probes = std::min<Index>(opts.jacobian_samples, n);
    curves.jacobian_err.assign(static_cast<std::size_t>(T), 0.0);
    for (int k = 0; k < probes; ++k) {
      Vector x = problem.x.col(k);
      CodeTrajectory single = encode(x, d, enc);
      JacobianDense fixed = fixed_point_jacobian(z_hat.col(k), d, x);
      explicit_jacobian(single, d, x, enc,
                        [&](int t, const JacobianDense& jac) {
                          curves.jacobian_err[static_cast<std::size_t>(t) - 1] +=
                              (jac.stacked - fixed.stacked).norm();
                        });
    }
    for (double& v : curves.jacobian_err) v /= static_cast<double>(probes);
  }
  return curves;
}

double amplitude_bias(const SyntheticProblem& problem, double lambda,
                      double tol, int max_iter) {
  Matrix z_hat =
      solve_lasso_batch(problem.x, problem.d_star, lambda, tol, max_iter);
  double total = 0.0;
  for (Index j = 0; j < z_hat.cols(); ++j)
    total += (z_hat.col(j) - problem.z_star.col(j)).norm();
  return total / static_cast<double>(z_hat.cols());
}

}  // namespace pudle
