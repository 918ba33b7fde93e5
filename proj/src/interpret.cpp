#include "pudle/interpret.hpp"

#include <algorithm>
#include <numeric>

namespace pudle {

RepresenterModel::RepresenterModel(Matrix x_train, Matrix z_train,
                                   double omega, Index budget)
    : x_train_(std::move(x_train)),
      z_train_(std::move(z_train)),
      omega_(omega) {
  require(omega_ > 0.0, "RepresenterModel: omega must be positive");
  require(x_train_.cols() == z_train_.cols(),
          "RepresenterModel: train sizes disagree");
  if (x_train_.cols() > budget)
    throw BudgetExceeded(
        "RepresenterModel: n exceeds the configured budget; subsample the "
        "training set");
  Matrix gram = z_train_.transpose() * z_train_;
  gram.diagonal().array() += omega_;
  gram_.compute(gram);
  // omega > 0 makes G positive definite, so the factorization cannot fail.
  require(gram_.info() == Eigen::Success,
          "RepresenterModel: factorization failed");
}

Vector RepresenterModel::solve(const Vector& rhs) const {
  return gram_.solve(rhs);
}

Matrix RepresenterModel::solve(const Matrix& rhs) const {
  return gram_.solve(rhs);
}

RepresenterModel build_model(const Matrix& x_train, const Matrix& z_train,
                             double omega, Index budget) {
  return RepresenterModel(x_train, z_train, omega, budget);
}

Matrix reconstruct_dictionary(const RepresenterModel& model) {
  return model.x_train() * model.solve(Matrix(model.z_train().transpose()));
}

double stationarity_residual(const Matrix& d, const Matrix& x_train,
                             const Matrix& z_train, double omega) {
  require(d.rows() == x_train.rows() && d.cols() == z_train.rows(),
          "stationarity_residual: shape mismatch");
  Matrix zzt = z_train * z_train.transpose();
  Matrix grad = (x_train - d * z_train) * z_train.transpose() - omega * d;
  double denom = (d * zzt).norm() + omega * d.norm();
  if (denom == 0.0) return grad.norm() == 0.0 ? 0.0 : 1.0;
  return grad.norm() / denom;
}

Vector atom_weights(const RepresenterModel& model, Index j) {
  require(j >= 0 && j < model.z_train().rows(),
          "atom_weights: atom index out of range");
  Vector w_j = model.z_train().row(j).transpose();
  return model.solve(w_j);
}

Vector representer_beta(const RepresenterModel& model,
                        const Vector& z_hat_test) {
  require(z_hat_test.size() == model.z_train().rows(),
          "representer_beta: code length mismatch");
  Vector rhs = model.z_train().transpose() * z_hat_test;
  return model.solve(rhs);
}

CodeSimilarity code_similarity_contributions(const RepresenterModel& model,
                                             const Vector& z_hat_test) {
  require(z_hat_test.size() == model.z_train().rows(),
          "code_similarity_contributions: code length mismatch");
  CodeSimilarity out;
  out.similarity = model.z_train().transpose() * z_hat_test;
  // (X G^{-1})^T = G^{-1} X^T since G is symmetric.
  Matrix transformed =
      model.solve(Matrix(model.x_train().transpose())).transpose();  // m x n
  out.contributions.resize(model.x_train().rows(), model.n());
  for (Index k = 0; k < model.n(); ++k)
    out.contributions.col(k) = transformed.col(k) * out.similarity(k);
  return out;
}

std::vector<Index> top_contributors(const Vector& weights, Index k) {
  require(k >= 0 && k <= weights.size(),
          "top_contributors: k exceeds the number of candidates");
  std::vector<Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (weights(a) != weights(b)) return weights(a) > weights(b);
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

}  // namespace pudle
