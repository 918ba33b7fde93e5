#include <doctest.h>

#include "pudle/datagen.hpp"
#include "pudle/metrics.hpp"
#include "pudle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pudle;

namespace {

/// Brute-force assignment oracle: enumerate every permutation.
double brute_force_assignment(const Matrix& cost) {
  std::vector<Index> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < cost.rows(); ++i)
      total += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double assignment_cost(const Matrix& cost, const std::vector<Index>& perm) {
  double total = 0.0;
  for (Index i = 0; i < cost.rows(); ++i)
    total += cost(i, perm[static_cast<std::size_t>(i)]);
  return total;
}

/// One-sided Jacobi SVD oracle: rotate column pairs until orthogonal, then
/// singular values are the column norms.
double jacobi_sigma_max(Matrix a) {
  const Index n = a.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (Index i = 0; i < n - 1; ++i)
      for (Index j = i + 1; j < n; ++j) {
        double aii = a.col(i).squaredNorm();
        double ajj = a.col(j).squaredNorm();
        double aij = a.col(i).dot(a.col(j));
        off = std::max(off, std::abs(aij));
        if (aij == 0.0) continue;
        double tau = (ajj - aii) / (2.0 * aij);
        double t = (tau >= 0 ? 1.0 : -1.0) /
                   (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        Vector ci = a.col(i), cj = a.col(j);
        a.col(i) = c * ci - s * cj;
        a.col(j) = s * ci + c * cj;
      }
    if (off < 1e-14) break;
  }
  double best = 0.0;
  for (Index j = 0; j < n; ++j) best = std::max(best, a.col(j).norm());
  return best;
}

}  // namespace

TEST_CASE("hungarian: diagonal structures") {
  Matrix cost = Matrix::Ones(4, 4);
  cost.diagonal().setZero();
  std::vector<Index> perm = hungarian_assign(cost);
  for (Index i = 0; i < 4; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);

  // permuted zero diagonal
  Matrix shifted = Matrix::Ones(5, 5);
  for (Index i = 0; i < 5; ++i) shifted(i, (i + 2) % 5) = 0.0;
  perm = hungarian_assign(shifted);
  for (Index i = 0; i < 5; ++i)
    CHECK(perm[static_cast<std::size_t>(i)] == (i + 2) % 5);

  CHECK_THROWS_AS(hungarian_assign(Matrix::Ones(3, 4)), std::invalid_argument);
}

TEST_CASE("hungarian: matches brute force on random instances") {
  Rng rng(101, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    Index p = 2 + static_cast<Index>(rng.uniform_int(6));  // up to 7
    Matrix cost(p, p);
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) cost(i, j) = rng.uniform(-2.0, 5.0);
    std::vector<Index> perm = hungarian_assign(cost);
    CHECK(assignment_cost(cost, perm) ==
          doctest::Approx(brute_force_assignment(cost)).epsilon(1e-12));
  }
}

TEST_CASE("align_dictionaries: identity, reversal with sign flip") {
  Matrix d = gen_dictionary(8, 6, 3);
  Alignment id = align_dictionaries(d, d);
  for (Index i = 0; i < 6; ++i) {
    CHECK(id.perm[static_cast<std::size_t>(i)] == i);
    CHECK(id.signs[static_cast<std::size_t>(i)] == 1.0);
    CHECK(id.per_column_dist(i) == 0.0);
  }

  Matrix shuffled(8, 6);
  for (Index i = 0; i < 6; ++i) shuffled.col(5 - i) = d.col(i);
  shuffled.col(0) = -shuffled.col(0);
  Alignment rec = align_dictionaries(shuffled, d);
  CHECK(closeness_delta(shuffled, d, rec) < 1e-15);
  CHECK(rec.signs[5] == -1.0);  // column 5 of d lives negated in column 0
}

TEST_CASE("align_dictionaries: distances match direct recomputation") {
  Matrix d = gen_dictionary(12, 9, 5);
  Matrix noisy = perturb_dictionary(d, InitSpec{0.05, 2});
  Alignment align = align_dictionaries(noisy, d);
  for (Index i = 0; i < 9; ++i) {
    CHECK(align.perm[static_cast<std::size_t>(i)] == i);
    double direct = (noisy.col(i) - d.col(i)).norm();
    CHECK(align.per_column_dist(i) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("spectral_norm: identity, rank one, Jacobi oracle") {
  CHECK(spectral_norm(Matrix::Identity(5, 5)) == doctest::Approx(1.0));

  Vector u(4), v(3);
  u << 1, -2, 0.5, 3;
  v << 2, 0, -1;
  Matrix rank1 = u * v.transpose();
  CHECK(spectral_norm(rank1) ==
        doctest::Approx(u.norm() * v.norm()).epsilon(1e-10));

  CHECK(spectral_norm(Matrix::Zero(3, 3)) == 0.0);

  Rng rng(77, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(8, 8);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) a(i, j) = rng.gaussian();
    CHECK(spectral_norm(a) ==
          doctest::Approx(jacobi_sigma_max(a)).epsilon(1e-8));
  }
}

TEST_CASE("spectral_norm: dominates random Rayleigh probes") {
  Matrix a = gen_dictionary(20, 35, 9);
  double sigma = spectral_norm(a);
  Rng rng(13, 0);
  for (int probe = 0; probe < 100; ++probe) {
    Vector v(35);
    for (Index i = 0; i < 35; ++i) v(i) = rng.gaussian();
    CHECK((a * v).norm() / v.norm() <= sigma * (1 + 1e-9));
  }
}

TEST_CASE("relative_error: invariances") {
  Matrix d = gen_dictionary(10, 14, 21);
  CHECK(relative_error(d, d) == 0.0);

  Matrix permuted(10, 14);
  for (Index i = 0; i < 14; ++i) permuted.col((i * 5) % 14) = d.col(i);
  CHECK(relative_error(permuted, d) < 1e-12);

  Matrix noisy = perturb_dictionary(d, InitSpec{0.2, 7});
  Alignment align = align_dictionaries(noisy, d);
  double direct = spectral_norm(apply_alignment(noisy, align) - d) /
                  spectral_norm(d);
  CHECK(relative_error(noisy, d) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("relative_error: invariant under permutation plus sign flips") {
  Matrix d_star = gen_dictionary(9, 12, 33);
  Matrix d = perturb_dictionary(d_star, InitSpec{0.3, 1});
  double base = relative_error(d, d_star);
  Rng rng(5, 0);
  Matrix scrambled(9, 12);
  for (Index i = 0; i < 12; ++i)
    scrambled.col((i * 7) % 12) = (rng.sign()) * d.col(i);
  CHECK(relative_error(scrambled, d_star) ==
        doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("support_stats: conventions") {
  Vector z(4), zs(4);
  z << 1, -2, 0, 0;
  zs << 1, -2, 0, 0;
  SupportStats st = support_stats(z, zs);
  CHECK(st.exact_signed);
  CHECK(st.precision == 1.0);
  CHECK(st.recall == 1.0);

  st = support_stats(Vector::Zero(4), zs);
  CHECK(!st.exact_signed);
  CHECK(st.precision == 1.0);  // empty prediction: no false positives
  CHECK(st.recall == 0.0);

  Vector flipped = zs;
  flipped(0) = -zs(0);
  st = support_stats(flipped, zs);
  CHECK(!st.exact_signed);
  CHECK(st.precision == 1.0);
  CHECK(st.recall == 1.0);

  CHECK_THROWS_AS(support_stats(Vector::Zero(3), zs), std::invalid_argument);
}
