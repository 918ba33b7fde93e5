#include "pudle/datagen.hpp"

#include "pudle/rng.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace pudle {

double SyntheticProblem::c_min() const {
  double cmin = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < z_star.cols(); ++j)
    for (Index i = 0; i < z_star.rows(); ++i) {
      double v = std::abs(z_star(i, j));
      if (v > 0.0 && v < cmin) cmin = v;
    }
  return std::isfinite(cmin) ? cmin : 0.0;
}

Matrix gen_dictionary(Index m, Index p, std::uint64_t seed) {
  require(m >= 1 && p >= 1, "gen_dictionary: dimensions must be positive");
  Rng rng = make_rng(seed, RngStream::kDictionary);
  Matrix d(m, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < m; ++i) d(i, j) = rng.gaussian();
  for (Index j = 0; j < p; ++j) d.col(j) /= d.col(j).norm();
  return d;
}

Matrix gen_codes(Index p, Index n, int s, const CodeLaw& law,
                 std::uint64_t seed) {
  require(s >= 1 && s <= p, "gen_codes: need 1 <= s <= p");
  require(n >= 1, "gen_codes: n must be positive");
  Rng rng = make_rng(seed, RngStream::kCodes);
  Matrix z = Matrix::Zero(p, n);
  std::vector<Index> pool(static_cast<std::size_t>(p));
  for (Index j = 0; j < n; ++j) {
    // Partial Fisher-Yates: first s entries of pool become the support.
    std::iota(pool.begin(), pool.end(), Index{0});
    for (int k = 0; k < s; ++k) {
      std::uint64_t r = rng.uniform_int(static_cast<std::uint64_t>(p - k));
      std::swap(pool[static_cast<std::size_t>(k)],
                pool[static_cast<std::size_t>(k) + r]);
      Index idx = pool[static_cast<std::size_t>(k)];
      double amp;
      if (law.law == AmplitudeLaw::kUniformSigned)
        amp = rng.sign() * rng.uniform(law.lo, law.hi);
      else
        amp = rng.gaussian();
      z(idx, j) = amp;
    }
  }
  return z;
}

Matrix synthesize(const Matrix& d_star, const Matrix& z_star,
                  std::optional<double> snr_db, std::uint64_t seed) {
  require(d_star.cols() == z_star.rows(),
          "synthesize: inner dimensions disagree");
  Matrix x = d_star * z_star;
  if (!snr_db) return x;
  Rng rng = make_rng(seed, RngStream::kNoise);
  Matrix noise(x.rows(), x.cols());
  for (Index j = 0; j < noise.cols(); ++j)
    for (Index i = 0; i < noise.rows(); ++i) noise(i, j) = rng.gaussian();
  // Scale so the realized batch SNR matches exactly:
  // 10 log10(|S|^2 / |cN|^2) = snr  =>  c = |S| / (|N| 10^{snr/20}).
  double c = x.norm() / (noise.norm() * std::pow(10.0, *snr_db / 20.0));
  x += c * noise;
  return x;
}

Matrix perturb_dictionary(const Matrix& d_star, const InitSpec& init) {
  require(init.tau_b >= 0.0, "perturb_dictionary: tau_b must be nonnegative");
  if (init.tau_b == 0.0) return d_star;
  Rng rng = make_rng(init.seed, RngStream::kInitPerturbation);
  const double scale = init.tau_b / std::sqrt(static_cast<double>(d_star.rows()));
  Matrix d = d_star;
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < d.rows(); ++i) d(i, j) += scale * rng.gaussian();
  return d;
}

SyntheticProblem make_problem(Index m, Index p, Index n, int s,
                              const CodeLaw& law, std::optional<double> snr_db,
                              std::uint64_t seed) {
  SyntheticProblem prob;
  prob.d_star = gen_dictionary(m, p, seed);
  prob.z_star = gen_codes(p, n, s, law, seed);
  prob.x = synthesize(prob.d_star, prob.z_star, snr_db, seed);
  prob.sparsity = s;
  prob.law = law;
  prob.snr_db = snr_db;
  prob.seed = seed;
  return prob;
}

double coherence(const Matrix& d) {
  require(d.cols() >= 2, "coherence: need at least two columns");
  Matrix normalized = d;
  for (Index j = 0; j < normalized.cols(); ++j) {
    double nrm = normalized.col(j).norm();
    require(nrm > 0.0, "coherence: zero column");
    normalized.col(j) /= nrm;
  }
  Matrix gram = normalized.transpose() * normalized;
  double worst = 0.0;
  for (Index j = 0; j < gram.cols(); ++j)
    for (Index i = 0; i < gram.rows(); ++i)
      if (i != j) worst = std::max(worst, std::abs(gram(i, j)));
  return std::sqrt(static_cast<double>(d.rows())) * worst;
}

double closeness_delta(const Matrix& d, const Matrix& d_star,
                       const Alignment& alignment) {
  require(d.rows() == d_star.rows() && d.cols() == d_star.cols(),
          "closeness_delta: shape mismatch");
  require(static_cast<Index>(alignment.perm.size()) == d.cols(),
          "closeness_delta: alignment size mismatch");
  double worst = 0.0;
  for (Index i = 0; i < d_star.cols(); ++i) {
    double dist =
        (alignment.signs[static_cast<std::size_t>(i)] *
             d.col(alignment.perm[static_cast<std::size_t>(i)]) -
         d_star.col(i))
            .norm();
    worst = std::max(worst, dist);
  }
  return worst;
}

}  // namespace pudle
