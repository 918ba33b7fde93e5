#include "pudle/trainer.hpp"

#include "pudle/metrics.hpp"
#include "pudle/parallel.hpp"
#include "pudle/rng.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace pudle {

const char* train_grad_name(TrainGrad kind) {
  switch (kind) {
    case TrainGrad::kDec: return "dec";
    case TrainGrad::kAeLasso: return "ae-lasso";
    case TrainGrad::kAeLs: return "ae-ls";
    case TrainGrad::kAeLsHt: return "ae-ls-ht";
    case TrainGrad::kAltmin: return "altmin";
  }
  return "?";
}

Matrix project_columns(const Matrix& d, Normalization policy,
                       bool* zero_column_flag) {
  if (zero_column_flag) *zero_column_flag = false;
  if (policy == Normalization::kAtEndOnly) return d;
  Matrix out = d;
  for (Index j = 0; j < out.cols(); ++j) {
    double nrm = out.col(j).norm();
    if (policy == Normalization::kProjectUnitBall) {
      if (nrm > 1.0) out.col(j) /= nrm;
    } else {
      if (nrm > 0.0)
        out.col(j) /= nrm;
      else if (zero_column_flag)
        *zero_column_flag = true;
    }
  }
  return out;
}

Matrix adam_step(AdamState& state, const Matrix& grad, double eta,
                 const AdamParams& p) {
  if (state.step == 0) {
    state.m1 = Matrix::Zero(grad.rows(), grad.cols());
    state.m2 = Matrix::Zero(grad.rows(), grad.cols());
  }
  state.step += 1;
  state.m1 = p.beta1 * state.m1 + (1.0 - p.beta1) * grad;
  state.m2 = p.beta2 * state.m2 + (1.0 - p.beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  Matrix m_hat = state.m1 / c1;
  Matrix denom = (state.m2 / c2).cwiseSqrt();
  denom.array() += p.eps;
  return (-eta) * m_hat.cwiseQuotient(denom);
}

namespace {

struct SupportMeans {
  double precision = 0.0;
  double recall = 0.0;
};

SupportMeans mean_support_stats(const Matrix& z, const Matrix& z_star) {
  SupportMeans m;
  for (Index j = 0; j < z.cols(); ++j) {
    SupportStats st = support_stats(z.col(j), z_star.col(j));
    m.precision += st.precision;
    m.recall += st.recall;
  }
  m.precision /= static_cast<double>(z.cols());
  m.recall /= static_cast<double>(z.cols());
  return m;
}

std::vector<Index> epoch_order(Index n, bool shuffle, Rng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (shuffle) {
    for (Index i = n - 1; i > 0; --i) {
      std::uint64_t r = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(r)]);
    }
  }
  return order;
}

Matrix gather_cols(const Matrix& src, const std::vector<Index>& order,
                   std::size_t lo, std::size_t count) {
  Matrix out(src.rows(), static_cast<Index>(count));
  for (std::size_t k = 0; k < count; ++k)
    out.col(static_cast<Index>(k)) = src.col(order[lo + k]);
  return out;
}

}  // namespace

TrainResult train_pudle(const SyntheticProblem& problem, const Matrix& d_init,
                        EncoderConfig enc, const TrainConfig& cfg) {
  require(cfg.grad_kind != TrainGrad::kAltmin,
          "train_pudle: use train_altmin for the altmin gradient");
  require(cfg.eta > 0.0 && cfg.epochs >= 1,
          "train_pudle: eta must be positive and epochs >= 1");
  require(d_init.rows() == problem.m() && d_init.cols() == problem.p(),
          "train_pudle: d_init shape mismatch");
  if (cfg.grad_kind == TrainGrad::kAeLsHt) enc.prox = Prox::kHard;

  const Index n = problem.n();
  const Index batch = cfg.batch_size > 0 ? std::min<Index>(cfg.batch_size, n) : n;
  const bool oracle_schedule =
      enc.schedule.kind == LambdaSchedule::Kind::kOracle;
  const bool ground_truth = problem.d_star.size() > 0;

  Matrix d = d_init;
  AdamState adam;
  Rng shuffle_rng = make_rng(cfg.shuffle_seed != 0 ? cfg.shuffle_seed
                                                   : problem.seed,
                             RngStream::kTrainerShuffle);
  TrainResult result;
  int update = 0;
  auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<Index> order = epoch_order(n, batch < n, shuffle_rng);
    for (Index lo = 0; lo < n; lo += batch) {
      const std::size_t count =
          static_cast<std::size_t>(std::min(batch, n - lo));
      const bool whole = count == static_cast<std::size_t>(n) && batch == n;
      Matrix xb = whole ? problem.x
                        : gather_cols(problem.x, order,
                                      static_cast<std::size_t>(lo), count);
      Matrix zb;
      const Matrix* zb_ptr = nullptr;
      if (oracle_schedule || ground_truth) {
        zb = whole ? problem.z_star
                   : gather_cols(problem.z_star, order,
                                 static_cast<std::size_t>(lo), count);
        zb_ptr = &zb;
      }
      if (oracle_schedule) {
        Alignment align = align_dictionaries(d, problem.d_star);
        double delta_l = closeness_delta(d, problem.d_star, align);
        enc.schedule.mu_over_sqrt_m =
            coherence(d) / std::sqrt(static_cast<double>(problem.m()));
        enc.schedule.a_gamma =
            cfg.a_gamma_scale * std::sqrt(problem.sparsity * delta_l);
      }

      BatchTrajectory traj =
          encode_batch(xb, d, enc, oracle_schedule ? zb_ptr : nullptr);
      GradientEstimate grad;
      switch (cfg.grad_kind) {
        case TrainGrad::kDec:
          grad = grad_dec(xb, traj.states.back(), d);
          break;
        case TrainGrad::kAeLasso:
          grad = backprop_grad(xb, traj, d, BackpropLoss::kLasso, enc);
          break;
        case TrainGrad::kAeLs:
        case TrainGrad::kAeLsHt:
          grad = backprop_grad(xb, traj, d, BackpropLoss::kLeastSquares, enc);
          break;
        case TrainGrad::kAltmin:
          break;  // unreachable
      }
      if (!grad.value.allFinite())
        throw std::runtime_error("train_pudle: non-finite gradient at update " +
                                 std::to_string(update));

      if (cfg.optimizer == OptimizerKind::kAdam)
        d += adam_step(adam, grad.value, cfg.eta, cfg.adam);
      else
        d -= cfg.eta * grad.value;

      bool zero_flag = false;
      d = project_columns(d, cfg.normalization, &zero_flag);

      ++update;
      TrainRecord rec;
      rec.update = update;
      rec.rel_err = ground_truth ? relative_error(d, problem.d_star) : 0.0;
      rec.grad_norm = grad.value.norm();
      if (zb_ptr) {
        SupportMeans sm = mean_support_stats(traj.states.back(), zb);
        rec.support_precision = sm.precision;
        rec.support_recall = sm.recall;
      }
      rec.lambda_state = enc.schedule.lambda;
      rec.nu_state = enc.schedule.nu;
      rec.zero_column_flagged = zero_flag;
      rec.wall_sec = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
      result.history.records.push_back(rec);

      if (cfg.decay_nu_step &&
          enc.schedule.kind == LambdaSchedule::Kind::kGeometric &&
          update % cfg.decay_nu_step->interval == 0) {
        enc.schedule.nu =
            std::max(0.0, enc.schedule.nu - cfg.decay_nu_step->amount);
      }
    }
  }
  result.d_final = std::move(d);
  return result;
}

TrainResult train_altmin(const SyntheticProblem& problem, const Matrix& d_init,
                         double lambda, double tol, const TrainConfig& cfg) {
  require(cfg.eta > 0.0 && cfg.epochs >= 1,
          "train_altmin: eta must be positive and epochs >= 1");
  require(d_init.rows() == problem.m() && d_init.cols() == problem.p(),
          "train_altmin: d_init shape mismatch");
  const bool ground_truth = problem.d_star.size() > 0;

  Matrix d = d_init;
  AdamState adam;
  TrainResult result;
  auto t_start = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Matrix z_hat =
        solve_lasso_batch(problem.x, d, lambda, tol, cfg.lasso_max_iter);
    GradientEstimate grad = grad_dec(problem.x, z_hat, d);
    grad.kind = GradKind::kOracleLocal;
    if (!grad.value.allFinite())
      throw std::runtime_error("train_altmin: non-finite gradient at epoch " +
                               std::to_string(epoch));
    if (cfg.optimizer == OptimizerKind::kAdam)
      d += adam_step(adam, grad.value, cfg.eta, cfg.adam);
    else
      d -= cfg.eta * grad.value;
    bool zero_flag = false;
    d = project_columns(d, cfg.normalization, &zero_flag);

    TrainRecord rec;
    rec.update = epoch + 1;
    rec.rel_err = ground_truth ? relative_error(d, problem.d_star) : 0.0;
    rec.grad_norm = grad.value.norm();
    SupportMeans sm = mean_support_stats(z_hat, problem.z_star);
    rec.support_precision = sm.precision;
    rec.support_recall = sm.recall;
    rec.lambda_state = lambda;
    rec.nu_state = 1.0;
    rec.zero_column_flagged = zero_flag;
    rec.wall_sec = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
    result.history.records.push_back(rec);
  }
  result.d_final = std::move(d);
  return result;
}

}  // namespace pudle
