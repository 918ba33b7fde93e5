#include <doctest.h>

#include "pudle/datagen.hpp"
#include "pudle/metrics.hpp"
#include "pudle/rng.hpp"

#include <cmath>

using namespace pudle;

TEST_CASE("gen_dictionary: unit columns, shape, determinism") {
  Matrix d = gen_dictionary(4, 4, 7);
  for (Index j = 0; j < 4; ++j)
    CHECK(std::abs(d.col(j).norm() - 1.0) < 1e-12);

  Matrix paper = gen_dictionary(50, 100, 123);
  CHECK(paper.rows() == 50);
  CHECK(paper.cols() == 100);

  Matrix again = gen_dictionary(50, 100, 123);
  CHECK((paper - again).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(gen_dictionary(0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_dictionary(4, 0, 1), std::invalid_argument);
}

TEST_CASE("gen_codes: exact sparsity and amplitude law") {
  CodeLaw law;
  Matrix full = gen_codes(3, 1, 3, law, 9);
  for (Index i = 0; i < 3; ++i) {
    CHECK(full(i, 0) != 0.0);
    CHECK(std::abs(full(i, 0)) >= 1.0);
    CHECK(std::abs(full(i, 0)) <= 2.0);
  }

  Matrix z = gen_codes(100, 10000, 5, law, 11);
  for (Index j = 0; j < z.cols(); ++j) {
    int nnz = 0;
    for (Index i = 0; i < z.rows(); ++i) nnz += z(i, j) != 0.0;
    REQUIRE(nnz == 5);
  }

  CHECK_THROWS_AS(gen_codes(4, 1, 5, law, 1), std::invalid_argument);
}

TEST_CASE("gen_codes: per-index inclusion frequency matches s/p") {
  // Monte-Carlo oracle: each index is included with probability s/p, so the
  // observed count over n columns stays within 3 binomial sigmas.
  const Index p = 20;
  const int s = 3;
  const Index n = 100000;
  CodeLaw law;
  Matrix z = gen_codes(p, n, s, law, 5);
  const double q = static_cast<double>(s) / static_cast<double>(p);
  const double sigma = std::sqrt(q * (1 - q) / static_cast<double>(n));
  for (Index i = 0; i < p; ++i) {
    double freq = 0;
    for (Index j = 0; j < n; ++j) freq += z(i, j) != 0.0;
    freq /= static_cast<double>(n);
    CHECK(std::abs(freq - q) < 3 * sigma);
  }
}

TEST_CASE("gen_codes: signs balanced under the uniform law") {
  CodeLaw law;
  Matrix z = gen_codes(50, 20000, 5, law, 17);
  long pos = 0, neg = 0;
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i) {
      if (z(i, j) > 0) ++pos;
      if (z(i, j) < 0) ++neg;
    }
  double frac = static_cast<double>(pos) / static_cast<double>(pos + neg);
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gen_codes: standard gaussian law moments") {
  CodeLaw law;
  law.law = AmplitudeLaw::kStandardGaussian;
  Matrix z = gen_codes(50, 20000, 5, law, 19);
  double sum = 0, sum2 = 0;
  long cnt = 0;
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i)
      if (z(i, j) != 0.0) {
        sum += z(i, j);
        sum2 += z(i, j) * z(i, j);
        ++cnt;
      }
  CHECK(std::abs(sum / cnt) < 0.02);
  CHECK(sum2 / cnt == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("synthesize: noiseless is the exact product") {
  Matrix d = Matrix::Identity(3, 3);
  Matrix z = Matrix::Zero(3, 1);
  z(0, 0) = 1.0;
  Matrix x = synthesize(d, z, std::nullopt, 0);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(1, 0) == 0.0);
  CHECK(x(2, 0) == 0.0);

  Matrix d2 = gen_dictionary(10, 20, 3);
  Matrix z2 = gen_codes(20, 40, 3, CodeLaw{}, 3);
  Matrix x2 = synthesize(d2, z2, std::nullopt, 3);
  CHECK((x2 - d2 * z2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(synthesize(d2, Matrix::Zero(5, 4), std::nullopt, 0),
                  std::invalid_argument);
}

TEST_CASE("synthesize: realized SNR matches the request") {
  Matrix d = gen_dictionary(50, 100, 21);
  Matrix z = gen_codes(100, 500, 5, CodeLaw{}, 21);
  Matrix clean = d * z;
  Matrix x = synthesize(d, z, 12.0, 21);
  Matrix noise = x - clean;
  double snr =
      10.0 * std::log10(clean.squaredNorm() / noise.squaredNorm());
  CHECK(snr > 11.5);
  CHECK(snr < 12.5);
}

TEST_CASE("perturb_dictionary: zero scale, determinism, concentration") {
  Matrix d = gen_dictionary(50, 100, 31);
  InitSpec none{0.0, 1};
  CHECK((perturb_dictionary(d, none) - d).cwiseAbs().maxCoeff() == 0.0);

  InitSpec a{0.3, 1}, b{0.3, 2};
  CHECK((perturb_dictionary(d, a) - perturb_dictionary(d, b))
            .cwiseAbs()
            .maxCoeff() > 0.0);

  // chi-distribution oracle: E||column perturbation|| ~= tau_b, so the mean
  // over 100 seeds lands within 20%.
  const double tau = 0.55 / std::log(50.0);
  double mean = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Matrix pert = perturb_dictionary(d, InitSpec{tau, seed});
    for (Index j = 0; j < d.cols(); ++j) {
      mean += (pert.col(j) - d.col(j)).norm();
      ++count;
    }
  }
  mean /= count;
  CHECK(std::abs(mean - tau) / tau < 0.2);
}

TEST_CASE("coherence: orthogonal, duplicate, brute force") {
  CHECK(coherence(Matrix::Identity(4, 4)) == 0.0);

  Matrix dup(4, 2);
  dup.col(0) << 1, 0, 0, 0;
  dup.col(1) << 1, 0, 0, 0;
  CHECK(coherence(dup) == doctest::Approx(2.0));  // sqrt(m) with m=4

  Matrix d = gen_dictionary(50, 100, 41);
  double mu = coherence(d);
  double brute = 0.0;
  for (Index i = 0; i < d.cols(); ++i)
    for (Index j = i + 1; j < d.cols(); ++j)
      brute = std::max(brute, std::abs(d.col(i).dot(d.col(j))));
  CHECK(mu == doctest::Approx(std::sqrt(50.0) * brute).epsilon(1e-12));

  CHECK_THROWS_AS(coherence(Matrix::Ones(3, 1)), std::invalid_argument);
}

TEST_CASE("closeness_delta: zero cases and direct recomputation") {
  Matrix d = gen_dictionary(20, 30, 43);
  Alignment id = align_dictionaries(d, d);
  CHECK(closeness_delta(d, d, id) == 0.0);

  Matrix flipped = -d;
  Alignment sign_fix = align_dictionaries(flipped, d);
  CHECK(closeness_delta(flipped, d, sign_fix) < 1e-15);

  Matrix pert = perturb_dictionary(d, InitSpec{0.1, 5});
  Alignment align = align_dictionaries(pert, d);
  double delta = closeness_delta(pert, d, align);
  double direct = 0.0;
  for (Index j = 0; j < d.cols(); ++j)
    direct = std::max(direct, (pert.col(j) - d.col(j)).norm());
  CHECK(delta == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("datagen: purity across repeated calls") {
  CodeLaw law;
  Matrix z1 = gen_codes(30, 50, 4, law, 99);
  Matrix z2 = gen_codes(30, 50, 4, law, 99);
  CHECK((z1 - z2).cwiseAbs().maxCoeff() == 0.0);
  Matrix x1 = synthesize(gen_dictionary(10, 30, 7), z1, 20.0, 55);
  Matrix x2 = synthesize(gen_dictionary(10, 30, 7), z2, 20.0, 55);
  CHECK((x1 - x2).cwiseAbs().maxCoeff() == 0.0);
}
