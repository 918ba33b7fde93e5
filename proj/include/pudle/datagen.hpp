#pragma once

#include "pudle/metrics.hpp"
#include "pudle/types.hpp"

#include <cstdint>
#include <optional>

namespace pudle {

enum class AmplitudeLaw { kUniformSigned, kStandardGaussian };

/// Nonzero-amplitude distribution. Under the uniform law the magnitude is
/// Uniform(lo, hi) and the sign is a fair coin, so amplitudes stay zero-mean
/// and symmetric.
struct CodeLaw {
  AmplitudeLaw law = AmplitudeLaw::kUniformSigned;
  double lo = 1.0;
  double hi = 2.0;
};

struct SyntheticProblem {
  Matrix d_star;  // m x p, unit-norm columns
  Matrix z_star;  // p x n, exactly s nonzeros per column
  Matrix x;       // m x n
  int sparsity = 0;
  CodeLaw law;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;

  Index m() const { return d_star.rows(); }
  Index p() const { return d_star.cols(); }
  Index n() const { return x.cols(); }

  /// Smallest nonzero code magnitude in the instance (the validators'
  /// stand-in for the distribution's lower bound).
  double c_min() const;
};

struct InitSpec {
  double tau_b = 0.0;
  std::uint64_t seed = 0;
};

/// Columns i.i.d. Gaussian, rescaled to unit norm.
Matrix gen_dictionary(Index m, Index p, std::uint64_t seed);

/// Each column has exactly s nonzeros; supports uniform without replacement.
Matrix gen_codes(Index p, Index n, int s, const CodeLaw& law,
                 std::uint64_t seed);

/// x = d_star * z_star, plus Gaussian noise scaled so the realized batch SNR
/// equals snr_db when given.
Matrix synthesize(const Matrix& d_star, const Matrix& z_star,
                  std::optional<double> snr_db, std::uint64_t seed);

/// d_star + tau_b * B with B entries i.i.d. N(0, 1/m). No renormalization.
Matrix perturb_dictionary(const Matrix& d_star, const InitSpec& init);

SyntheticProblem make_problem(Index m, Index p, Index n, int s,
                              const CodeLaw& law, std::optional<double> snr_db,
                              std::uint64_t seed);

/// mu such that max_{i != j} |<D_i/|D_i|, D_j/|D_j|>| = mu / sqrt(m).
double coherence(const Matrix& d);

/// max_j ||u(j) D_{pi(j)} - D*_j|| under the supplied alignment.
double closeness_delta(const Matrix& d, const Matrix& d_star,
                       const Alignment& alignment);

}  // namespace pudle
