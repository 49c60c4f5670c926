#pragma once

#include "eki/problem.hpp"

#include <vector>

namespace eki {

/// Tikhonov-augmented least-squares problem
///
///   A_tilde = [ A ; (alpha_eff C0)^{1/2} ],   y_tilde = [ y ; 0 ],
///
/// so that 1/2 |y_tilde - A_tilde theta|^2 = 1/2 |y - A theta|^2 + alpha_eff/2 theta^T C0 theta.
/// alpha_eff is alpha for the full problem and alpha / n_sub for a data subset.
struct AugmentedProblem {
  Matrix A_tilde;
  Vector y_tilde;
  double alpha = 0.0;
  double alpha_eff = 0.0;
  Matrix c0_sqrt;  // C0^{1/2}

  Eigen::Index dim() const { return A_tilde.cols(); }
  Eigen::Index data_rows() const { return A_tilde.rows() - A_tilde.cols(); }
};

AugmentedProblem augment_full(const Matrix& A, const Vector& y, double alpha, const Matrix& C0);
AugmentedProblem augment_subset(const Matrix& A_i, const Vector& y_i, double alpha, Eigen::Index n_sub,
                                const Matrix& C0);

/// 1/2 |y_tilde - A_tilde theta|^2
double potential(const AugmentedProblem& p, const Vector& theta);

/// A_tilde^T (A_tilde theta - y_tilde)
Vector potential_gradient(const AugmentedProblem& p, const Vector& theta);

/// Unconstrained Tikhonov minimiser (A_tilde^T A_tilde)^{-1} A_tilde^T y_tilde.
Vector tikhonov_minimiser(const AugmentedProblem& p);

/// Normal-equation form of a potential: gradient(theta) = H theta - b.
/// The ensemble right-hand side evaluates gradients in this form.
struct NormalForm {
  Matrix H;
  Vector b;
};

NormalForm normal_form(const AugmentedProblem& p);

/// Whitened problem split into subsets, with the regularised full problem
/// and one regularised problem per subset. The unregularised blocks are kept
/// for the plain EKI variant.
struct SubsampledProblem {
  DataBlock data;
  std::vector<DataBlock> blocks;
  AugmentedProblem full;
  std::vector<AugmentedProblem> subsets;
  NormalForm full_normal;
  std::vector<NormalForm> subset_normal;

  Eigen::Index dim() const { return full.dim(); }
  Eigen::Index n_sub() const { return static_cast<Eigen::Index>(subsets.size()); }
};

/// problem must already be whitened (gamma = identity).
SubsampledProblem make_subsampled_problem(const LinearProblem& whitened, const DataPartition& part,
                                          double alpha, const Matrix& C0);

}  // namespace eki
