#include "pudle/grads.hpp"

#include "pudle/parallel.hpp"

#include <omp.h>

#include <cmath>

namespace pudle {

const char* grad_kind_name(GradKind kind) {
  switch (kind) {
    case GradKind::kDec: return "dec";
    case GradKind::kAeLasso: return "ae-lasso";
    case GradKind::kAeLs: return "ae-ls";
    case GradKind::kOracleLocal: return "oracle-local";
    case GradKind::kOracleGlobal: return "oracle-global";
  }
  return "?";
}

double margin_epsilon(const EncoderConfig& config) {
  double thr = config.prox == Prox::kSoft ? config.alpha * config.schedule.lambda
                                          : config.schedule.lambda;
  return 1e-4 * thr;
}

namespace {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// (1/n) * A B^T with fixed-chunk reduction.
Matrix averaged_outer(const Matrix& a, const Matrix& b) {
  Matrix acc = Matrix::Zero(a.rows(), b.rows());
  accumulate_outer(acc, a, b);
  return acc / static_cast<double>(a.cols());
}

Matrix residual_columns(const Matrix& x, const Matrix& d, const Matrix& z) {
  Matrix r(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < x.cols(); ++j)
    r.col(j).noalias() = d * z.col(j) - x.col(j);
  return r;
}

}  // namespace

GradientEstimate grad_dec(const Matrix& x, const Matrix& z_t, const Matrix& d) {
  require(x.rows() == d.rows() && z_t.rows() == d.cols() &&
              x.cols() == z_t.cols(),
          "grad_dec: shape mismatch");
  GradientEstimate g;
  g.kind = GradKind::kDec;
  Matrix r = residual_columns(x, d, z_t);
  g.value = averaged_outer(r, z_t);
  return g;
}

GradientEstimate backprop_grad(const Matrix& x, const BatchTrajectory& traj,
                               const Matrix& d, BackpropLoss loss,
                               const EncoderConfig& cfg, int t_used) {
  const int t_max = traj.unroll();
  const int T = t_used < 0 ? t_max : t_used;
  require(T >= 1 && T <= t_max, "backprop_grad: t_used out of range");
  const Index n = x.cols();
  const Index p = d.cols();
  require(x.rows() == d.rows() && traj.states[0].rows() == p &&
              traj.states[0].cols() == n,
          "backprop_grad: shape mismatch");

  const LayerOp op = make_layer_op(d, cfg.alpha);
  Matrix cmat(p, n);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) cmat.col(j).noalias() = op.at * x.col(j);

  const Matrix& z_final = traj.states[static_cast<std::size_t>(T)];
  Matrix r = residual_columns(x, d, z_final);

  // dL/dz_T; the l1 weight is the schedule value at the last unrolled layer,
  // with subgradient 0 at zero entries.
  Matrix g(p, n);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) {
    g.col(j).noalias() = d.transpose() * r.col(j);
    if (loss == BackpropLoss::kLasso) {
      double lam = traj.lambdas(T - 1, j);
      for (Index i = 0; i < p; ++i) g(i, j) += lam * sign0(z_final(i, j));
    }
  }

  Matrix grad = Matrix::Zero(d.rows(), p);
  accumulate_outer(grad, r, z_final);  // direct decoder term

  Matrix m_acc = Matrix::Zero(p, p);
  Matrix s_acc = Matrix::Zero(p, n);
  Matrix v(p, n), g_next(p, n);
  for (int t = T - 1; t >= 0; --t) {
    const Matrix& z_t = traj.states[static_cast<std::size_t>(t)];
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < n; ++j) {
      Vector u = op.w * z_t.col(j);
      u += cmat.col(j);
      double thr = cfg.prox == Prox::kSoft ? cfg.alpha * traj.lambdas(t, j)
                                           : traj.lambdas(t, j);
      for (Index i = 0; i < p; ++i)
        v(i, j) = std::abs(u(i)) > thr ? g(i, j) : 0.0;
      if (t > 0) g_next.col(j).noalias() = op.w * v.col(j);
    }
    accumulate_outer(m_acc, z_t, v);
    s_acc += v;
    if (t > 0) g.swap(g_next);
  }
  grad.noalias() += -cfg.alpha * (d * (m_acc + m_acc.transpose()));
  Matrix xs = Matrix::Zero(d.rows(), p);
  accumulate_outer(xs, x, s_acc);
  grad.noalias() += cfg.alpha * xs;
  grad /= static_cast<double>(n);

  GradientEstimate out;
  out.value = std::move(grad);
  out.kind = loss == BackpropLoss::kLasso ? GradKind::kAeLasso : GradKind::kAeLs;
  out.t_used = T;
  out.margin_ok =
      traj.margins.topRows(T).minCoeff() > margin_epsilon(cfg);
  if (!out.value.allFinite())
    throw std::runtime_error("backprop_grad: non-finite gradient");
  return out;
}

GradientEstimate backprop_grad(const Vector& x, const CodeTrajectory& traj,
                               const Matrix& d, BackpropLoss loss,
                               const EncoderConfig& cfg, int t_used) {
  const int T = static_cast<int>(traj.states.size()) - 1;
  BatchTrajectory bt;
  bt.states.reserve(traj.states.size());
  for (const Vector& z : traj.states) bt.states.emplace_back(z);
  bt.lambdas.resize(T, 1);
  bt.margins.resize(T, 1);
  for (int t = 0; t < T; ++t) {
    bt.lambdas(t, 0) = traj.lambdas[static_cast<std::size_t>(t)];
    bt.margins(t, 0) = traj.pre_threshold_margins[static_cast<std::size_t>(t)];
  }
  Matrix xm = x;
  return backprop_grad(xm, bt, d, loss, cfg, t_used);
}

Matrix JacobianDense::block(Index j) const {
  return Eigen::Map<const Matrix>(stacked.col(j).data(), m, p);
}

Matrix JacobianDense::adjoint_apply(const Vector& v) const {
  require(v.size() == p, "adjoint_apply: length mismatch");
  Vector flat = stacked * v;
  return Eigen::Map<const Matrix>(flat.data(), m, p);
}

JacobianDense explicit_jacobian(
    const CodeTrajectory& traj, const Matrix& d, const Vector& x,
    const EncoderConfig& cfg,
    const std::function<void(int, const JacobianDense&)>& per_layer) {
  const Index m = d.rows();
  const Index p = d.cols();
  if (m * p * p > kDenseJacobianBudget)
    throw BudgetExceeded(
        "explicit_jacobian: m*p^2 exceeds the dense budget; use backprop_grad "
        "for adjoint applications instead");
  const int T = static_cast<int>(traj.states.size()) - 1;
  const LayerOp op = make_layer_op(d, cfg.alpha);
  const Vector c = op.at * x;

  JacobianDense jac;
  jac.m = m;
  jac.p = p;
  jac.stacked = Matrix::Zero(m * p, p);
  Matrix propagated(m * p, p);
  for (int t = 0; t < T; ++t) {
    const Vector& z_t = traj.states[static_cast<std::size_t>(t)];
    Vector u = op.w * z_t;
    u += c;
    double lam = traj.lambdas[static_cast<std::size_t>(t)];
    double thr = cfg.prox == Prox::kSoft ? cfg.alpha * lam : lam;
    Vector r = d * z_t - x;
    propagated.noalias() = jac.stacked * op.w;
    for (Index j = 0; j < p; ++j) {
      if (std::abs(u(j)) > thr) {
        // direct term: -alpha * vec(D_j z_t^T + r e_j^T)
        auto col = jac.stacked.col(j);
        col = propagated.col(j);
        for (Index b = 0; b < p; ++b)
          col.segment(b * m, m) -= cfg.alpha * z_t(b) * d.col(j);
        col.segment(j * m, m) -= cfg.alpha * r;
      } else {
        jac.stacked.col(j).setZero();
      }
    }
    if (per_layer) per_layer(t + 1, jac);
  }
  return jac;
}

JacobianDense fixed_point_jacobian(const Vector& z_hat, const Matrix& d,
                                   const Vector& x) {
  const Index m = d.rows();
  const Index p = d.cols();
  require(z_hat.size() == p && x.size() == m,
          "fixed_point_jacobian: shape mismatch");
  JacobianDense jac;
  jac.m = m;
  jac.p = p;
  jac.stacked = Matrix::Zero(m * p, p);
  std::vector<Index> support = support_of(z_hat);
  const Index s = static_cast<Index>(support.size());
  if (s == 0) return jac;

  Matrix d_s(m, s);
  for (Index k = 0; k < s; ++k)
    d_s.col(k) = d.col(support[static_cast<std::size_t>(k)]);
  Matrix gram = d_s.transpose() * d_s;
  Eigen::LDLT<Matrix> ldlt(gram);
  Matrix k_inv = ldlt.solve(Matrix::Identity(s, s));
  if ((gram * k_inv - Matrix::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-6)
    throw SingularSupportGram(
        "fixed_point_jacobian: support Gram is numerically singular");
  Matrix coeff = k_inv * d_s.transpose();  // s x m; column a = K D_{a,S}^T
  Vector r = d * z_hat - x;

  // d zhat_(j) / d D_(a,b) = -(K_{j'b'} r_a + coeff_{j'a} zhat_b), b in S.
  for (Index jj = 0; jj < s; ++jj) {
    Index j = support[static_cast<std::size_t>(jj)];
    auto col = jac.stacked.col(j);
    for (Index bb = 0; bb < s; ++bb) {
      Index b = support[static_cast<std::size_t>(bb)];
      col.segment(b * m, m) -= k_inv(jj, bb) * r;
      col.segment(b * m, m) -= z_hat(b) * coeff.row(jj).transpose();
    }
  }
  return jac;
}

GradientEstimate grad_local_oracle(const Matrix& x, const Matrix& d,
                                   double lambda, double tol, int max_iter) {
  Matrix z_hat = solve_lasso_batch(x, d, lambda, tol, max_iter);
  Matrix r = residual_columns(x, d, z_hat);
  GradientEstimate g;
  g.kind = GradKind::kOracleLocal;
  g.value = averaged_outer(r, z_hat);
  return g;
}

GradientEstimate grad_global_oracle(const Matrix& x, const Matrix& z_star,
                                    const Matrix& d) {
  require(x.cols() == z_star.cols(), "grad_global_oracle: batch mismatch");
  Matrix r = residual_columns(x, d, z_star);
  GradientEstimate g;
  g.kind = GradKind::kOracleGlobal;
  g.value = averaged_outer(r, z_star);
  return g;
}

}  // namespace pudle
