#pragma once

#include "pudle/types.hpp"

#include <vector>

namespace pudle {

/// Training data plus a factorization of G = Z~^T Z~ + omega I (n x n).
/// G is factorized once and only ever solved against, never inverted.
class RepresenterModel {
 public:
  RepresenterModel(Matrix x_train, Matrix z_train, double omega,
                   Index budget = kDefaultBudget);

  static constexpr Index kDefaultBudget = 10'000;

  const Matrix& x_train() const { return x_train_; }
  const Matrix& z_train() const { return z_train_; }
  double omega() const { return omega_; }
  Index n() const { return x_train_.cols(); }

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

 private:
  Matrix x_train_;  // m x n
  Matrix z_train_;  // p x n
  double omega_;
  Eigen::LDLT<Matrix> gram_;
};

RepresenterModel build_model(const Matrix& x_train, const Matrix& z_train,
                             double omega,
                             Index budget = RepresenterModel::kDefaultBudget);

/// D~ = X G^{-1} Z~^T.
Matrix reconstruct_dictionary(const RepresenterModel& model);

/// || (X - D Z~) Z~^T - omega D ||_F normalized by
/// ||D Z~ Z~^T||_F + omega ||D||_F.
double stationarity_residual(const Matrix& d, const Matrix& x_train,
                             const Matrix& z_train, double omega);

/// G^{-1} w_j where w_j is atom j's training code activity (row j of Z~).
/// X * atom_weights(j) reproduces column j of the reconstructed dictionary.
Vector atom_weights(const RepresenterModel& model, Index j);

/// beta = G^{-1} Z~^T z_hat; X beta equals D~ z_hat.
Vector representer_beta(const RepresenterModel& model,
                        const Vector& z_hat_test);

/// Per training sample: code similarity <z~^k, z_hat> and the transformed
/// contribution (X G^{-1})_k * similarity_k. Columns of `contributions`
/// sum to D~ z_hat.
struct CodeSimilarity {
  Vector similarity;     // n-vector
  Matrix contributions;  // m x n
};

CodeSimilarity code_similarity_contributions(const RepresenterModel& model,
                                             const Vector& z_hat_test);

/// Indices of the k largest weights, descending, ties broken by ascending
/// index.
std::vector<Index> top_contributors(const Vector& weights, Index k);

}  // namespace pudle
