#pragma once

#include "eki/types.hpp"

#include <optional>
#include <vector>

namespace eki {

/// Linear inverse problem y = A theta + noise, noise ~ N(0, gamma).
struct LinearProblem {
  Matrix A;
  Vector y;
  Matrix gamma;
  std::optional<Vector> theta_true;  // ground truth, when synthetic

  /// Checks shapes, symmetry (1e-12 relative) and positive definiteness of gamma.
  void validate() const;
};

/// Contiguous row blocks of the data vector.
class DataPartition {
 public:
  explicit DataPartition(std::vector<Eigen::Index> block_sizes);

  const std::vector<Eigen::Index>& sizes() const { return sizes_; }
  Eigen::Index count() const { return static_cast<Eigen::Index>(sizes_.size()); }
  Eigen::Index total() const;
  Eigen::Index offset(Eigen::Index block) const;

 private:
  std::vector<Eigen::Index> sizes_;
};

struct DataBlock {
  Matrix A;
  Vector y;
};

/// Particle collection, one column per particle (d x N_ens).
struct Ensemble {
  Matrix particles;

  Eigen::Index dim() const { return particles.rows(); }
  Eigen::Index size() const { return particles.cols(); }
  Matrix centered() const;
};

/// Returns the problem premultiplied by gamma^{-1/2}; blocks of the given
/// partition are whitened independently (symmetric eigendecomposition root).
LinearProblem whiten(const LinearProblem& problem);
LinearProblem whiten(const LinearProblem& problem, const DataPartition& part);

/// Row blocks of (A, y). Throws PartitionError when gamma couples blocks.
std::vector<DataBlock> partition(const LinearProblem& problem, const DataPartition& part);

/// Vertical concatenation of blocks.
DataBlock stack(const std::vector<DataBlock>& blocks);

Vector empirical_mean(const Ensemble& ens);

/// 1/(N_ens - 1) sum (theta_j - mean)(theta_j - mean)^T.
Matrix empirical_covariance(const Ensemble& ens);

/// 1/(N_ens - 1) sum (theta_j - mean)(A theta_j - A mean)^T.
Matrix cross_covariance(const Ensemble& ens, const Matrix& A);

/// Numerical rank of the centered particle matrix (singular values above
/// rel_tol times the largest).
Eigen::Index centered_rank(const Ensemble& ens, double rel_tol = 1e-10);

/// Throws unless N_ens >= 2 and the centered particles are linearly independent.
void require_nondegenerate(const Ensemble& ens);

/// Symmetric positive definite square root (and inverse root) via eigendecomposition.
Matrix spd_sqrt(const Matrix& S);
Matrix spd_inv_sqrt(const Matrix& S);

}  // namespace eki
