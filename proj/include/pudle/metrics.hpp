#pragma once

#include "pudle/types.hpp"

#include <vector>

namespace pudle {

/// Column correspondence between two dictionaries: column perm[i] of the
/// first, scaled by signs[i], matches column i of the reference. Distances
/// are Euclidean per matched pair.
struct Alignment {
  std::vector<Index> perm;
  std::vector<double> signs;
  Vector per_column_dist;
  double total_cost = 0.0;
};

/// Minimum-total-cost perfect assignment of a square cost matrix.
/// Returns row_to_col: row i is assigned column row_to_col[i].
std::vector<Index> hungarian_assign(const Matrix& cost);

/// Match columns of d to columns of d_star with per-pair optimal sign.
Alignment align_dictionaries(const Matrix& d, const Matrix& d_star);

/// Permute and sign-flip columns of d so column i matches d_star column i.
Matrix apply_alignment(const Matrix& d, const Alignment& alignment);

/// Largest singular value by power iteration on A^T A, with random restarts.
double spectral_norm(const Matrix& a, double tol = 1e-12);

/// ||aligned(d) - d_star||_2 / ||d_star||_2.
double relative_error(const Matrix& d, const Matrix& d_star);

struct SupportStats {
  bool exact_signed = false;
  double precision = 1.0;  // 1 when the predicted support is empty
  double recall = 1.0;     // 1 when the true support is empty
};

SupportStats support_stats(const Vector& z, const Vector& z_star);

}  // namespace pudle
