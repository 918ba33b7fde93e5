#include <doctest.h>

#include "pudle/datagen.hpp"
#include "pudle/encoder.hpp"
#include "pudle/metrics.hpp"
#include "pudle/rng.hpp"

#include <omp.h>

#include <cmath>

using namespace pudle;

namespace {

Matrix random_orthonormal(Index n, std::uint64_t seed) {
  Matrix g = gen_dictionary(n, n, seed);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  return q;
}

}  // namespace

TEST_CASE("soft_threshold: definition") {
  CHECK(soft_threshold(1.2, 0.5) == doctest::Approx(0.7));
  CHECK(soft_threshold(-0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-1.0, 0.5) == doctest::Approx(-0.5));
  CHECK(soft_threshold(0.5, 0.5) == 0.0);  // tie goes to zero
}

TEST_CASE("hard_threshold: keep-at-boundary convention") {
  CHECK(hard_threshold(0.05, 0.05) == 0.05);
  CHECK(hard_threshold(-0.04, 0.05) == 0.0);
  CHECK(hard_threshold(3.0, 0.05) == 3.0);
  CHECK(hard_threshold(-0.05, 0.05) == -0.05);
}

TEST_CASE("soft_threshold: scale covariance") {
  Rng rng(3, 0);
  for (int i = 0; i < 500; ++i) {
    double v = rng.uniform(-3.0, 3.0);
    double b = rng.uniform(0.0, 1.5);
    double c = rng.uniform(0.01, 10.0);
    CHECK(soft_threshold(c * v, c * b) ==
          doctest::Approx(c * soft_threshold(v, b)).epsilon(1e-12));
  }
}

TEST_CASE("ista_step: identity dictionary reduces to one prox") {
  Matrix d = Matrix::Identity(5, 5);
  Vector x(5);
  x << 1.2, -0.3, 0.8, -2.0, 0.1;
  Vector z = ista_step(Vector::Zero(5), d, x, 1.0, 0.5, Prox::kSoft);
  for (Index i = 0; i < 5; ++i)
    CHECK(z(i) == doctest::Approx(soft_threshold(x(i), 0.5)).epsilon(1e-15));
}

TEST_CASE("ista_step: the lasso solution is a fixed point") {
  Matrix d = gen_dictionary(10, 20, 4);
  Matrix z_star = gen_codes(20, 1, 3, CodeLaw{}, 4);
  Vector x = (d * z_star).col(0);
  double lambda = 0.15;
  LassoResult sol = solve_lasso(x, d, lambda, 1e-13, 100000);
  double alpha = 0.9 / std::pow(spectral_norm(d), 2);
  Vector stepped = ista_step(sol.z, d, x, alpha, lambda, Prox::kSoft);
  CHECK((stepped - sol.z).norm() < 1e-10);
}

TEST_CASE("ista_step: lambda above the correlation scale yields zero") {
  Matrix d = gen_dictionary(8, 12, 6);
  Vector x = Vector::Ones(8);
  double lambda = (d.transpose() * x).cwiseAbs().maxCoeff();
  Vector z = ista_step(Vector::Zero(12), d, x, 0.5, lambda, Prox::kSoft);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode: orthonormal square settles after one layer") {
  Matrix q = random_orthonormal(6, 8);
  Vector x(6);
  x << 0.9, -1.4, 0.2, 0.0, 2.2, -0.6;
  EncoderConfig cfg;
  cfg.unroll = 7;
  cfg.alpha = 1.0;
  cfg.schedule = LambdaSchedule::fixed(0.3);
  CodeTrajectory traj = encode(x, q, cfg);
  Vector z1_expected = soft_threshold(Vector(q.transpose() * x), 0.3);
  CHECK((traj.states[1] - z1_expected).cwiseAbs().maxCoeff() < 1e-12);
  for (std::size_t t = 2; t < traj.states.size(); ++t)
    CHECK((traj.states[t] - traj.states[1]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode: T=1 equals one ista_step") {
  Matrix d = gen_dictionary(9, 15, 10);
  Matrix z0 = gen_codes(15, 1, 2, CodeLaw{}, 11);
  Vector x = (d * gen_codes(15, 1, 3, CodeLaw{}, 12)).col(0);
  EncoderConfig cfg;
  cfg.unroll = 1;
  cfg.alpha = 0.1;
  cfg.schedule = LambdaSchedule::fixed(0.2);
  cfg.z0 = Vector(z0.col(0));
  CodeTrajectory traj = encode(x, d, cfg);
  Vector step = ista_step(z0.col(0), d, x, 0.1, 0.2, Prox::kSoft);
  CHECK((traj.states[1] - step).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode: paper protocol decreases toward the lasso solution") {
  SyntheticProblem prob = make_problem(50, 100, 1, 5, CodeLaw{}, std::nullopt, 3);
  EncoderConfig cfg;
  cfg.unroll = 200;
  cfg.alpha = 0.2;
  cfg.schedule = LambdaSchedule::fixed(0.2);
  Vector x = prob.x.col(0);
  CodeTrajectory traj = encode(x, prob.d_star, cfg);
  LassoResult sol = solve_lasso(x, prob.d_star, 0.2, 1e-12, 100000);

  // find the last support change
  int b = 0;
  for (std::size_t t = 1; t < traj.supports.size(); ++t)
    if (traj.supports[t] != traj.supports[t - 1]) b = static_cast<int>(t);
  REQUIRE(b < 150);
  double prev = (traj.states[static_cast<std::size_t>(b)] - sol.z).norm();
  double ratio_max = 0.0;
  for (std::size_t t = static_cast<std::size_t>(b) + 1;
       t < traj.states.size(); ++t) {
    double cur = (traj.states[t] - sol.z).norm();
    CHECK(cur <= prev * (1 + 1e-12));
    if (prev > 1e-13) ratio_max = std::max(ratio_max, cur / prev);
    prev = cur;
  }
  CHECK(ratio_max < 1.0);  // linear contraction after support selection
}

TEST_CASE("encode: batch equals sequential per-sample encoding exactly") {
  SyntheticProblem prob = make_problem(20, 40, 37, 4, CodeLaw{}, std::nullopt, 5);
  EncoderConfig cfg;
  cfg.unroll = 25;
  cfg.alpha = 0.15;
  cfg.schedule = LambdaSchedule::geometric(0.3, 0.95);
  int saved = omp_get_max_threads();
  BatchTrajectory batch = encode_batch(prob.x, prob.d_star, cfg);
  omp_set_num_threads(1);
  BatchTrajectory batch1 = encode_batch(prob.x, prob.d_star, cfg);
  omp_set_num_threads(saved);
  for (int t = 0; t <= cfg.unroll; ++t)
    CHECK((batch.states[static_cast<std::size_t>(t)] -
           batch1.states[static_cast<std::size_t>(t)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  for (Index j = 0; j < prob.n(); ++j) {
    Vector x = prob.x.col(j);
    CodeTrajectory single = encode(x, prob.d_star, cfg);
    for (int t = 0; t <= cfg.unroll; ++t)
      CHECK((batch.states[static_cast<std::size_t>(t)].col(j) -
             single.states[static_cast<std::size_t>(t)])
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("encode: geometric schedule with nu=1 is bit-identical to fixed") {
  SyntheticProblem prob = make_problem(15, 25, 6, 3, CodeLaw{}, std::nullopt, 9);
  EncoderConfig fixed_cfg;
  fixed_cfg.unroll = 30;
  fixed_cfg.alpha = 0.2;
  fixed_cfg.schedule = LambdaSchedule::fixed(0.25);
  EncoderConfig geo_cfg = fixed_cfg;
  geo_cfg.schedule = LambdaSchedule::geometric(0.25, 1.0);
  BatchTrajectory a = encode_batch(prob.x, prob.d_star, fixed_cfg);
  BatchTrajectory b = encode_batch(prob.x, prob.d_star, geo_cfg);
  for (int t = 0; t <= 30; ++t)
    CHECK((a.states[static_cast<std::size_t>(t)] -
           b.states[static_cast<std::size_t>(t)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("encode: majorization descent of the lasso objective") {
  SyntheticProblem prob = make_problem(12, 24, 8, 3, CodeLaw{}, std::nullopt, 13);
  double sigma = spectral_norm(prob.d_star);
  EncoderConfig cfg;
  cfg.unroll = 40;
  cfg.alpha = 0.9 / (sigma * sigma);
  cfg.schedule = LambdaSchedule::fixed(0.2);
  for (Index j = 0; j < prob.n(); ++j) {
    Vector x = prob.x.col(j);
    CodeTrajectory traj = encode(x, prob.d_star, cfg);
    double prev = lasso_objective(x, prob.d_star, traj.states[0], 0.2);
    for (std::size_t t = 1; t < traj.states.size(); ++t) {
      double cur = lasso_objective(x, prob.d_star, traj.states[t], 0.2);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("encode: hard prox uses the raw threshold") {
  Matrix d = Matrix::Identity(4, 4);
  Vector x(4);
  x << 0.6, 0.3, -0.8, 0.05;
  EncoderConfig cfg;
  cfg.unroll = 1;
  cfg.alpha = 0.5;  // alpha-scaling would move the cut to 0.2
  cfg.prox = Prox::kHard;
  cfg.schedule = LambdaSchedule::fixed(0.4);
  CodeTrajectory traj = encode(x, d, cfg);
  // u = alpha * x for z0 = 0; HT keeps |u| >= 0.4
  Vector u = 0.5 * x;
  for (Index i = 0; i < 4; ++i)
    CHECK(traj.states[1](i) == (std::abs(u(i)) >= 0.4 ? u(i) : 0.0));
}

TEST_CASE("encode: strict step size flag") {
  Matrix d = gen_dictionary(6, 9, 2);
  Vector x = Vector::Ones(6);
  EncoderConfig cfg;
  cfg.unroll = 3;
  cfg.alpha = 10.0;  // far above 1/sigma_max^2
  cfg.strict_step_size = true;
  CHECK_THROWS_AS(encode(x, d, cfg), std::invalid_argument);
}

TEST_CASE("solve_lasso: orthonormal closed form") {
  Matrix q = random_orthonormal(7, 15);
  Vector x(7);
  x << 1.5, -0.2, 0.9, -1.1, 0.0, 2.0, -0.4;
  LassoResult sol = solve_lasso(x, q, 0.3, 1e-12);
  Vector expected = soft_threshold(Vector(q.transpose() * x), 0.3);
  CHECK((sol.z - expected).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("solve_lasso: all-zero answer above the correlation scale") {
  Matrix d = gen_dictionary(10, 16, 44);
  Vector x = (d * gen_codes(16, 1, 3, CodeLaw{}, 44)).col(0);
  double lambda = (d.transpose() * x).cwiseAbs().maxCoeff() * 1.01;
  LassoResult sol = solve_lasso(x, d, lambda, 1e-12);
  CHECK(sol.z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_lasso: random-probe minimality oracle") {
  Matrix d = gen_dictionary(10, 20, 52);
  Vector x = (d * gen_codes(20, 1, 4, CodeLaw{}, 52)).col(0);
  const double lambda = 0.18;
  const double tol = 1e-10;
  LassoResult sol = solve_lasso(x, d, lambda, tol);
  double f_hat = lasso_objective(x, d, sol.z, lambda);
  Rng rng(1000, 0);
  for (int probe = 0; probe < 10000; ++probe) {
    Vector z = Vector::Zero(20);
    int nnz = 1 + static_cast<int>(rng.uniform_int(6));
    for (int k = 0; k < nnz; ++k)
      z(static_cast<Index>(rng.uniform_int(20))) = rng.uniform(-2.5, 2.5);
    CHECK(f_hat <= lasso_objective(x, d, z, lambda) + tol);
  }
  // perturbations around the solution are no better either
  for (int probe = 0; probe < 1000; ++probe) {
    Vector z = sol.z;
    for (Index i = 0; i < z.size(); ++i)
      z(i) += 1e-3 * rng.uniform(-1.0, 1.0);
    CHECK(f_hat <= lasso_objective(x, d, z, lambda) + tol);
  }
}

TEST_CASE("solve_lasso: non-convergence carries the residual") {
  Matrix d = gen_dictionary(10, 20, 3);
  Vector x = (d * gen_codes(20, 1, 4, CodeLaw{}, 3)).col(0);
  try {
    solve_lasso(x, d, 0.05, 1e-14, 3);
    FAIL("expected NonConverged");
  } catch (const NonConverged& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("kkt_residual: optimality certificates") {
  Matrix q = random_orthonormal(6, 77);
  Vector x(6);
  x << 0.8, -1.6, 0.1, 0.9, -0.2, 1.4;
  Vector z_hat = soft_threshold(Vector(q.transpose() * x), 0.35);
  CHECK(kkt_residual(z_hat, x, q, 0.35) < 1e-12);

  double lambda_big = (q.transpose() * x).cwiseAbs().maxCoeff() * 1.05;
  CHECK(kkt_residual(Vector::Zero(6), x, q, lambda_big) == 0.0);

  Vector nudged = z_hat;
  for (Index i = 0; i < 6; ++i)
    if (nudged(i) != 0.0) nudged(i) += 1e-3;
  CHECK(kkt_residual(nudged, x, q, 0.35) > 1e-5);
}

TEST_CASE("lasso_objective: closed forms") {
  Matrix d = gen_dictionary(5, 9, 1);
  Vector x(5);
  x << 1, 2, 3, 4, 5;
  CHECK(lasso_objective(x, d, Vector::Zero(9), 0.3) ==
        doctest::Approx(0.5 * x.squaredNorm()));
  Matrix z = gen_codes(9, 1, 2, CodeLaw{}, 1);
  Vector xz = (d * z).col(0);
  CHECK(lasso_objective(xz, d, z.col(0), 0.0) == doctest::Approx(0.0));
}

TEST_CASE("encode: oracle schedule tracks the code error") {
  SyntheticProblem prob = make_problem(40, 60, 4, 3, CodeLaw{}, std::nullopt, 23);
  double mu = coherence(prob.d_star);
  EncoderConfig cfg;
  cfg.unroll = 12;
  cfg.alpha = 0.2;
  cfg.schedule = LambdaSchedule::oracle(mu / std::sqrt(40.0), 0.05);
  cfg.schedule.lambda0 = 0.25;
  Matrix zs = prob.z_star;
  BatchTrajectory traj = encode_batch(prob.x, prob.d_star, cfg, &zs);
  CHECK(traj.lambdas(0, 0) == 0.25);
  // the oracle threshold shrinks as z_t approaches z_star
  for (Index j = 0; j < prob.n(); ++j)
    CHECK(traj.lambdas(cfg.unroll - 1, j) <= traj.lambdas(1, j) + 1e-12);
  // without ground truth the oracle schedule is rejected
  CHECK_THROWS_AS(encode_batch(prob.x, prob.d_star, cfg),
                  std::invalid_argument);
}
