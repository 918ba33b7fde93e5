#include "pudle/metrics.hpp"

#include "pudle/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pudle {

std::vector<Index> hungarian_assign(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "hungarian_assign: cost must be square");
  require(cost.allFinite(), "hungarian_assign: costs must be finite");
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();

  // Potentials algorithm, O(n^3). Internals are 1-indexed; column 0 is the
  // virtual root of the augmenting path.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> way(static_cast<std::size_t>(n) + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      Index i0 = p[static_cast<std::size_t>(j0)];
      Index j1 = 0;
      double delta = inf;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                     v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0)
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] =
          j - 1;
  return row_to_col;
}

Alignment align_dictionaries(const Matrix& d, const Matrix& d_star) {
  require(d.rows() == d_star.rows() && d.cols() == d_star.cols(),
          "align_dictionaries: shape mismatch");
  const Index p = d.cols();
  for (Index j = 0; j < p; ++j) {
    require(d.col(j).norm() > 0.0 && d_star.col(j).norm() > 0.0,
            "align_dictionaries: zero column");
  }
  // cost(i, j) = min over sign of ||sign * d_j - d_star_i||.
  Matrix dots = d_star.transpose() * d;  // p x p
  Matrix cost(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) {
      double sq = d.col(j).squaredNorm() + d_star.col(i).squaredNorm() -
                  2.0 * std::abs(dots(i, j));
      cost(i, j) = std::sqrt(std::max(sq, 0.0));
    }
  Alignment out;
  out.perm = hungarian_assign(cost);
  out.signs.resize(static_cast<std::size_t>(p));
  out.per_column_dist.resize(p);
  out.total_cost = 0.0;
  for (Index i = 0; i < p; ++i) {
    Index j = out.perm[static_cast<std::size_t>(i)];
    double sgn = dots(i, j) >= 0.0 ? 1.0 : -1.0;
    out.signs[static_cast<std::size_t>(i)] = sgn;
    out.per_column_dist(i) = (sgn * d.col(j) - d_star.col(i)).norm();
    out.total_cost += out.per_column_dist(i);
  }
  return out;
}

Matrix apply_alignment(const Matrix& d, const Alignment& alignment) {
  require(static_cast<Index>(alignment.perm.size()) == d.cols(),
          "apply_alignment: alignment size mismatch");
  Matrix out(d.rows(), d.cols());
  for (Index i = 0; i < d.cols(); ++i)
    out.col(i) = alignment.signs[static_cast<std::size_t>(i)] *
                 d.col(alignment.perm[static_cast<std::size_t>(i)]);
  return out;
}

double spectral_norm(const Matrix& a, double tol) {
  require(tol > 0.0, "spectral_norm: tol must be positive");
  if (a.size() == 0 || a.norm() == 0.0) return 0.0;
  const int kRestarts = 3;
  const int kMaxIter = 10000;
  Rng rng = make_rng(0x5eed, RngStream::kSpectralProbe);
  double best = 0.0;
  for (int restart = 0; restart < kRestarts; ++restart) {
    Vector v(a.cols());
    for (Index i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
    double nrm = v.norm();
    if (nrm == 0.0) continue;
    v /= nrm;
    double sigma = 0.0;
    for (int it = 0; it < kMaxIter; ++it) {
      Vector w = a * v;
      double s = w.norm();
      if (s == 0.0) break;
      v = a.transpose() * w;
      double vn = v.norm();
      if (vn == 0.0) break;
      v /= vn;
      if (std::abs(s - sigma) <= tol * std::max(1.0, s)) {
        sigma = s;
        break;
      }
      sigma = s;
    }
    best = std::max(best, sigma);
  }
  return best;
}

double relative_error(const Matrix& d, const Matrix& d_star) {
  Alignment alignment = align_dictionaries(d, d_star);
  Matrix aligned = apply_alignment(d, alignment);
  double denom = spectral_norm(d_star);
  require(denom > 0.0, "relative_error: zero reference dictionary");
  return spectral_norm(aligned - d_star) / denom;
}

SupportStats support_stats(const Vector& z, const Vector& z_star) {
  require(z.size() == z_star.size(), "support_stats: length mismatch");
  SupportStats st;
  Index true_nnz = 0, pred_nnz = 0, hits = 0;
  bool signs_match = true;
  for (Index i = 0; i < z.size(); ++i) {
    bool a = z(i) != 0.0, b = z_star(i) != 0.0;
    pred_nnz += a;
    true_nnz += b;
    hits += (a && b);
    double sa = a ? (z(i) > 0 ? 1.0 : -1.0) : 0.0;
    double sb = b ? (z_star(i) > 0 ? 1.0 : -1.0) : 0.0;
    if (sa != sb) signs_match = false;
  }
  st.exact_signed = signs_match;
  st.precision = pred_nnz == 0
                     ? 1.0
                     : static_cast<double>(hits) / static_cast<double>(pred_nnz);
  st.recall = true_nnz == 0
                  ? 1.0
                  : static_cast<double>(hits) / static_cast<double>(true_nnz);
  return st;
}

}  // namespace pudle
