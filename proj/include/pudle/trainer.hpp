#pragma once

#include "pudle/datagen.hpp"
#include "pudle/encoder.hpp"
#include "pudle/grads.hpp"
#include "pudle/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pudle {

enum class TrainGrad { kDec, kAeLasso, kAeLs, kAeLsHt, kAltmin };
enum class OptimizerKind { kGd, kAdam };
enum class Normalization { kProjectUnitBall, kRenormalizeUnit, kAtEndOnly };

const char* train_grad_name(TrainGrad kind);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m1;
  Matrix m2;
  long step = 0;
};

/// The geometric schedule's nu drops by `amount` every `interval` updates.
struct NuDecay {
  double amount = 0.005;
  int interval = 100;
};

struct TrainConfig {
  TrainGrad grad_kind = TrainGrad::kAeLs;
  double eta = 1e-3;
  int epochs = 1;
  int batch_size = 0;  // 0 = full batch
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamParams adam;
  Normalization normalization = Normalization::kProjectUnitBall;
  std::optional<NuDecay> decay_nu_step;
  std::uint64_t shuffle_seed = 0;
  /// Scale on sqrt(s * delta_l) for the oracle schedule's a_gamma.
  double a_gamma_scale = 1.0;
  // altmin sparse-coding tolerances
  double lasso_tol = 1e-8;
  int lasso_max_iter = 20000;
};

struct TrainRecord {
  int update = 0;
  double rel_err = 0.0;
  double grad_norm = 0.0;
  double support_precision = 0.0;
  double support_recall = 0.0;
  double lambda_state = 0.0;
  double nu_state = 1.0;
  double wall_sec = 0.0;
  bool zero_column_flagged = false;
};

struct TrainHistory {
  std::vector<TrainRecord> records;
};

struct TrainResult {
  Matrix d_final;
  TrainHistory history;
};

/// Unrolled training: encode -> gradient (per grad_kind) -> optimizer step
/// -> column normalization, once per batch. Deterministic in
/// (problem seed, config) regardless of thread count.
TrainResult train_pudle(const SyntheticProblem& problem, const Matrix& d_init,
                        EncoderConfig enc_config, const TrainConfig& config);

/// Classical alternating minimization: exact sparse coding to tolerance,
/// then a step along the analytic gradient.
TrainResult train_altmin(const SyntheticProblem& problem, const Matrix& d_init,
                         double lambda, double tol, const TrainConfig& config);

/// project-unit-ball: columns with norm > 1 are divided by their norm.
/// renormalize-unit: every nonzero column is rescaled to unit norm (zero
/// columns are left unchanged and flagged). at-end-only: identity.
Matrix project_columns(const Matrix& d, Normalization policy,
                       bool* zero_column_flag = nullptr);

/// Standard bias-corrected Adam. Returns the additive update (already
/// negated, i.e. d_next = d + delta).
Matrix adam_step(AdamState& state, const Matrix& grad, double eta,
                 const AdamParams& params);

}  // namespace pudle
