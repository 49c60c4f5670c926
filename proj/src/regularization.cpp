#include "eki/regularization.hpp"

#include <Eigen/Cholesky>

namespace eki {

namespace {

AugmentedProblem build(const Matrix& A, const Vector& y, double alpha, double alpha_eff, const Matrix& C0) {
  if (!(alpha > 0.0)) throw Error("regularisation weight must be positive");
  if (A.rows() != y.size()) throw DimensionError("A and y differ in row count");
  if (C0.rows() != A.cols() || C0.cols() != A.cols()) {
    throw DimensionError("prior covariance does not match parameter dimension");
  }
  const Matrix c0_sqrt = spd_sqrt(C0);  // throws on non-SPD
  const Eigen::Index d = A.cols();
  AugmentedProblem p;
  p.alpha = alpha;
  p.alpha_eff = alpha_eff;
  p.c0_sqrt = c0_sqrt;
  p.A_tilde.resize(A.rows() + d, d);
  p.A_tilde.topRows(A.rows()) = A;
  p.A_tilde.bottomRows(d) = std::sqrt(alpha_eff) * c0_sqrt;
  p.y_tilde = Vector::Zero(A.rows() + d);
  p.y_tilde.head(y.size()) = y;
  return p;
}

void check_theta(const AugmentedProblem& p, const Vector& theta) {
  if (theta.size() != p.dim()) throw DimensionError("parameter has wrong dimension");
}

}  // namespace

AugmentedProblem augment_full(const Matrix& A, const Vector& y, double alpha, const Matrix& C0) {
  return build(A, y, alpha, alpha, C0);
}

AugmentedProblem augment_subset(const Matrix& A_i, const Vector& y_i, double alpha, Eigen::Index n_sub,
                                const Matrix& C0) {
  if (n_sub < 2) throw PartitionError("subset regularisation needs n_sub >= 2");
  return build(A_i, y_i, alpha, alpha / static_cast<double>(n_sub), C0);
}

double potential(const AugmentedProblem& p, const Vector& theta) {
  check_theta(p, theta);
  return 0.5 * (p.y_tilde - p.A_tilde * theta).squaredNorm();
}

Vector potential_gradient(const AugmentedProblem& p, const Vector& theta) {
  check_theta(p, theta);
  return p.A_tilde.transpose() * (p.A_tilde * theta - p.y_tilde);
}

Vector tikhonov_minimiser(const AugmentedProblem& p) {
  return p.A_tilde.householderQr().solve(p.y_tilde);
}

NormalForm normal_form(const AugmentedProblem& p) {
  NormalForm n;
  n.H = p.A_tilde.transpose() * p.A_tilde;
  n.H = 0.5 * (n.H + n.H.transpose()).eval();
  n.b = p.A_tilde.transpose() * p.y_tilde;
  return n;
}

SubsampledProblem make_subsampled_problem(const LinearProblem& whitened, const DataPartition& part,
                                          double alpha, const Matrix& C0) {
  SubsampledProblem sp;
  sp.blocks = partition(whitened, part);
  sp.data = {whitened.A, whitened.y};
  sp.full = augment_full(whitened.A, whitened.y, alpha, C0);
  sp.full_normal = normal_form(sp.full);
  for (const auto& block : sp.blocks) {
    sp.subsets.push_back(augment_subset(block.A, block.y, alpha, part.count(), C0));
    sp.subset_normal.push_back(normal_form(sp.subsets.back()));
  }
  return sp;
}

}  // namespace eki
