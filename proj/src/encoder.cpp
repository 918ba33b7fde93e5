#include "pudle/encoder.hpp"

#include "pudle/metrics.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <limits>

namespace pudle {

LambdaSchedule LambdaSchedule::fixed(double lambda) {
  LambdaSchedule s;
  s.kind = Kind::kFixed;
  s.lambda = lambda;
  return s;
}

LambdaSchedule LambdaSchedule::geometric(double lambda, double nu) {
  LambdaSchedule s;
  s.kind = Kind::kGeometric;
  s.lambda = lambda;
  s.nu = nu;
  return s;
}

LambdaSchedule LambdaSchedule::oracle(double mu_over_sqrt_m, double a_gamma) {
  LambdaSchedule s;
  s.kind = Kind::kOracle;
  s.mu_over_sqrt_m = mu_over_sqrt_m;
  s.a_gamma = a_gamma;
  return s;
}

double LambdaSchedule::value(int t, const Vector& z_t,
                             const Vector* z_star) const {
  require(lambda >= 0.0, "LambdaSchedule: lambda must be nonnegative");
  if (t == 0 && lambda0) return *lambda0;
  switch (kind) {
    case Kind::kFixed:
      return lambda;
    case Kind::kGeometric:
      require(nu > 0.0 && nu <= 1.0, "LambdaSchedule: need 0 < nu <= 1");
      return lambda * std::pow(nu, t);
    case Kind::kOracle: {
      require(z_star != nullptr,
              "LambdaSchedule: oracle kind needs a ground-truth code");
      return mu_over_sqrt_m * (*z_star - z_t).lpNorm<1>() + a_gamma;
    }
  }
  return lambda;
}

Vector BatchTrajectory::min_margins() const {
  if (margins.rows() == 0) return Vector::Zero(margins.cols());
  return margins.colwise().minCoeff().transpose();
}

LayerOp make_layer_op(const Matrix& d, double alpha) {
  require(alpha > 0.0, "make_layer_op: alpha must be positive");
  LayerOp op;
  op.w = Matrix::Identity(d.cols(), d.cols()) - alpha * (d.transpose() * d);
  op.at = alpha * d.transpose();
  op.alpha = alpha;
  return op;
}

double soft_threshold(double v, double b) {
  double mag = std::abs(v) - b;
  return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
}

double hard_threshold(double v, double b) { return std::abs(v) >= b ? v : 0.0; }

Vector soft_threshold(const Vector& v, double b) {
  require(b >= 0.0, "soft_threshold: threshold must be nonnegative");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = soft_threshold(v(i), b);
  return out;
}

Vector hard_threshold(const Vector& v, double b) {
  require(b >= 0.0, "hard_threshold: threshold must be nonnegative");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = hard_threshold(v(i), b);
  return out;
}

std::vector<Index> support_of(const Vector& z) {
  std::vector<Index> s;
  for (Index i = 0; i < z.size(); ++i)
    if (z(i) != 0.0) s.push_back(i);
  return s;
}

namespace {

inline double prox_threshold(Prox prox, double alpha, double lambda_t) {
  // NOODL-style hard thresholding takes the raw b, not alpha * b.
  return prox == Prox::kSoft ? alpha * lambda_t : lambda_t;
}

inline void apply_prox(Prox prox, const Vector& u, double thr, Vector& z,
                       double* margin) {
  double mn = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < u.size(); ++i) {
    z(i) = prox == Prox::kSoft ? soft_threshold(u(i), thr)
                               : hard_threshold(u(i), thr);
    mn = std::min(mn, std::abs(std::abs(u(i)) - thr));
  }
  if (margin) *margin = mn;
}

/// One sample through all T layers. Writes z_t into state columns, realized
/// lambda and margin per layer. Returns the first layer that produced a
/// non-finite value, or -1.
int unroll_one(const LayerOp& op, const EncoderConfig& cfg, const Vector& x,
               const Vector* z_star, std::vector<Matrix>& states, Index col,
               Matrix& lambdas, Matrix& margins) {
  const Index p = op.w.rows();
  Vector z = cfg.z0 ? *cfg.z0 : Vector::Zero(p);
  Vector c = op.at * x;
  Vector u(p), z_next(p);
  states[0].col(col) = z;
  for (int t = 0; t < cfg.unroll; ++t) {
    double lam = cfg.schedule.value(t, z, z_star);
    u.noalias() = op.w * z;
    u += c;
    double thr = prox_threshold(cfg.prox, op.alpha, lam);
    double margin;
    apply_prox(cfg.prox, u, thr, z_next, &margin);
    if (!z_next.allFinite()) return t;
    lambdas(t, col) = lam;
    margins(t, col) = margin;
    z.swap(z_next);
    states[static_cast<std::size_t>(t) + 1].col(col) = z;
  }
  return -1;
}

void check_step_size(const Matrix& d, const EncoderConfig& cfg) {
  double sigma = spectral_norm(d, 1e-8);
  double bound = sigma > 0.0 ? 1.0 / (sigma * sigma)
                             : std::numeric_limits<double>::infinity();
  if (cfg.alpha < bound) return;
  if (cfg.strict_step_size)
    throw std::invalid_argument(
        "encode: alpha >= 1/sigma_max^2(D) with strict step size enabled");
  std::fprintf(stderr,
               "pudle: warning: alpha=%g exceeds 1/sigma_max^2(D)=%g; the "
               "unrolled iterations may diverge\n",
               cfg.alpha, bound);
}

}  // namespace

Vector ista_step(const Vector& z, const Matrix& d, const Vector& x,
                 double alpha, double lambda_t, Prox prox) {
  require(d.rows() == x.size() && d.cols() == z.size(),
          "ista_step: shape mismatch");
  require(lambda_t >= 0.0, "ista_step: lambda must be nonnegative");
  LayerOp op = make_layer_op(d, alpha);
  Vector u = op.w * z;
  u += op.at * x;
  double thr = prox_threshold(prox, alpha, lambda_t);
  Vector out(z.size());
  apply_prox(prox, u, thr, out, nullptr);
  return out;
}

BatchTrajectory encode_batch(const Matrix& x, const Matrix& d,
                             const EncoderConfig& cfg, const Matrix* z_star) {
  require(cfg.unroll >= 1, "encode: unroll count must be >= 1");
  require(x.rows() == d.rows(), "encode: x rows must match dictionary rows");
  if (cfg.z0)
    require(cfg.z0->size() == d.cols(), "encode: z0 length must be p");
  if (cfg.schedule.kind == LambdaSchedule::Kind::kOracle)
    require(z_star != nullptr && z_star->rows() == d.cols() &&
                z_star->cols() == x.cols(),
            "encode: oracle schedule needs matching ground-truth codes");
  check_step_size(d, cfg);

  const Index n = x.cols();
  const int T = cfg.unroll;
  LayerOp op = make_layer_op(d, cfg.alpha);
  BatchTrajectory traj;
  traj.states.assign(static_cast<std::size_t>(T) + 1, Matrix(d.cols(), n));
  traj.lambdas.resize(T, n);
  traj.margins.resize(T, n);

  std::vector<int> bad_layer(static_cast<std::size_t>(n), -1);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) {
    Vector xj = x.col(j);
    Vector zsj;
    const Vector* zs = nullptr;
    if (z_star) {
      zsj = z_star->col(j);
      zs = &zsj;
    }
    bad_layer[static_cast<std::size_t>(j)] =
        unroll_one(op, cfg, xj, zs, traj.states, j, traj.lambdas, traj.margins);
  }
  for (Index j = 0; j < n; ++j) {
    if (bad_layer[static_cast<std::size_t>(j)] >= 0)
      throw std::runtime_error(
          "encode: non-finite value at layer " +
          std::to_string(bad_layer[static_cast<std::size_t>(j)]) +
          " (sample " + std::to_string(j) + ")");
  }
  return traj;
}

CodeTrajectory encode(const Vector& x, const Matrix& d,
                      const EncoderConfig& cfg, const Vector* z_star) {
  Matrix xm = x;
  Matrix zsm;
  const Matrix* zs = nullptr;
  if (z_star) {
    zsm = *z_star;
    zs = &zsm;
  }
  BatchTrajectory bt = encode_batch(xm, d, cfg, zs);
  CodeTrajectory traj;
  const int T = cfg.unroll;
  traj.states.reserve(static_cast<std::size_t>(T) + 1);
  traj.supports.reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    Vector z = bt.states[static_cast<std::size_t>(t)].col(0);
    traj.supports.push_back(support_of(z));
    traj.states.push_back(std::move(z));
  }
  traj.pre_threshold_margins.assign(bt.margins.col(0).data(),
                                    bt.margins.col(0).data() + T);
  traj.lambdas.assign(bt.lambdas.col(0).data(), bt.lambdas.col(0).data() + T);
  return traj;
}

double kkt_residual(const Vector& z, const Vector& x, const Matrix& d,
                    double lambda) {
  require(lambda > 0.0, "kkt_residual: lambda must be positive");
  Vector corr = d.transpose() * (x - d * z);
  double worst = 0.0;
  for (Index j = 0; j < z.size(); ++j) {
    double v;
    if (z(j) != 0.0)
      v = std::abs(corr(j) - lambda * (z(j) > 0 ? 1.0 : -1.0));
    else
      v = std::max(std::abs(corr(j)) - lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

double lasso_objective(const Vector& x, const Matrix& d, const Vector& z,
                       double lambda) {
  require(d.rows() == x.size() && d.cols() == z.size(),
          "lasso_objective: shape mismatch");
  return 0.5 * (x - d * z).squaredNorm() + lambda * z.lpNorm<1>();
}

namespace {

/// Per-column ISTA with KKT stopping; halves alpha and restarts from zero if
/// the iterate stops being finite. Returns achieved residual.
double lasso_one(const Matrix& d, const Vector& x, double lambda, double tol,
                 int max_iter, double alpha0, Vector& z_out, int* iters_out) {
  const Index p = d.cols();
  double alpha = alpha0;
  int spent = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 3 && spent < max_iter; ++attempt) {
    LayerOp op = make_layer_op(d, alpha);
    Vector c = op.at * x;
    Vector z = Vector::Zero(p);
    Vector u(p), z_next(p);
    while (spent < max_iter) {
      u.noalias() = op.w * z;
      u += c;
      double thr = alpha * lambda;
      for (Index i = 0; i < p; ++i) z_next(i) = soft_threshold(u(i), thr);
      ++spent;
      if (!z_next.allFinite()) break;  // diverged; retry with smaller step
      z.swap(z_next);
      double res = kkt_residual(z, x, d, lambda);
      best = std::min(best, res);
      if (res <= tol) {
        z_out = z;
        if (iters_out) *iters_out = spent;
        return res;
      }
    }
    alpha *= 0.5;
  }
  z_out = Vector::Zero(p);
  if (iters_out) *iters_out = spent;
  return best;
}

}  // namespace

LassoResult solve_lasso(const Vector& x, const Matrix& d, double lambda,
                        double tol, int max_iter) {
  Matrix xm = x;
  Matrix z = solve_lasso_batch(xm, d, lambda, tol, max_iter);
  LassoResult res;
  res.z = z.col(0);
  res.kkt = kkt_residual(res.z, x, d, lambda);
  return res;
}

Matrix solve_lasso_batch(const Matrix& x, const Matrix& d, double lambda,
                         double tol, int max_iter) {
  require(tol > 0.0, "solve_lasso: tol must be positive");
  require(lambda > 0.0, "solve_lasso: lambda must be positive");
  require(x.rows() == d.rows(), "solve_lasso: shape mismatch");
  double sigma = spectral_norm(d, 1e-10);
  require(sigma > 0.0, "solve_lasso: zero dictionary");
  const double alpha0 = 0.99 / (sigma * sigma);
  const Index n = x.cols();
  Matrix z(d.cols(), n);
  std::vector<double> residual(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (Index j = 0; j < n; ++j) {
    Vector xj = x.col(j);
    Vector zj;
    residual[static_cast<std::size_t>(j)] =
        lasso_one(d, xj, lambda, tol, max_iter, alpha0, zj, nullptr);
    z.col(j) = zj;
  }
  for (Index j = 0; j < n; ++j) {
    if (residual[static_cast<std::size_t>(j)] > tol)
      throw NonConverged("solve_lasso: sample " + std::to_string(j) +
                             " did not reach tolerance",
                         residual[static_cast<std::size_t>(j)]);
  }
  return z;
}

}  // namespace pudle
