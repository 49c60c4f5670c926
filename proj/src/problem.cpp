#include "eki/problem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <numeric>
#include <sstream>

namespace eki {

namespace {

void check_spd(const Matrix& S, const char* what) {
  if (S.rows() != S.cols()) {
    throw DimensionError(std::string(what) + " must be square");
  }
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NoiseModelError(std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NoiseModelError(std::string(what) + " is not positive definite");
  }
}

// Contiguous block sizes of the finest block-diagonal structure of S.
std::vector<Eigen::Index> diagonal_blocks(const Matrix& S) {
  std::vector<Eigen::Index> sizes;
  const Eigen::Index n = S.rows();
  Eigen::Index start = 0;
  Eigen::Index reach = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = n - 1; j > reach; --j) {
      if (S(i, j) != 0.0 || S(j, i) != 0.0) {
        reach = j;
        break;
      }
    }
    reach = std::max(reach, i);
    if (reach == i) {
      sizes.push_back(i + 1 - start);
      start = i + 1;
      reach = i + 1;
    }
  }
  return sizes;
}

bool couples_blocks(const Matrix& S, const std::vector<Eigen::Index>& sizes) {
  Eigen::Index off = 0;
  for (Eigen::Index s : sizes) {
    const Eigen::Index end = off + s;
    for (Eigen::Index i = off; i < end; ++i) {
      for (Eigen::Index j = 0; j < S.cols(); ++j) {
        if ((j < off || j >= end) && S(i, j) != 0.0) return true;
      }
    }
    off = end;
  }
  return false;
}

LinearProblem whiten_blocks(const LinearProblem& problem, const std::vector<Eigen::Index>& sizes) {
  LinearProblem out;
  out.A.resize(problem.A.rows(), problem.A.cols());
  out.y.resize(problem.y.size());
  out.gamma = Matrix::Identity(problem.gamma.rows(), problem.gamma.cols());
  out.theta_true = problem.theta_true;
  Eigen::Index off = 0;
  for (Eigen::Index s : sizes) {
    const Matrix block = problem.gamma.block(off, off, s, s);
    if (s == 1) {
      const double w = 1.0 / std::sqrt(block(0, 0));
      out.A.row(off) = w == 1.0 ? problem.A.row(off) : (w * problem.A.row(off)).eval();
      out.y(off) = w == 1.0 ? problem.y(off) : w * problem.y(off);
    } else {
      const Matrix w = spd_inv_sqrt(block);
      out.A.middleRows(off, s) = w * problem.A.middleRows(off, s);
      out.y.segment(off, s) = w * problem.y.segment(off, s);
    }
    off += s;
  }
  return out;
}

}  // namespace

void LinearProblem::validate() const {
  if (A.rows() != y.size() || gamma.rows() != y.size() || gamma.cols() != y.size()) {
    std::ostringstream msg;
    msg << "problem shape mismatch: A is " << A.rows() << "x" << A.cols() << ", y has "
        << y.size() << " entries, gamma is " << gamma.rows() << "x" << gamma.cols();
    throw DimensionError(msg.str());
  }
  if (theta_true && theta_true->size() != A.cols()) {
    throw DimensionError("ground-truth parameter has wrong dimension");
  }
  check_spd(gamma, "noise covariance");
}

DataPartition::DataPartition(std::vector<Eigen::Index> block_sizes) : sizes_(std::move(block_sizes)) {
  if (sizes_.size() < 2) {
    throw PartitionError("a data partition needs at least two subsets");
  }
  for (Eigen::Index s : sizes_) {
    if (s < 1) throw PartitionError("data subsets must be non-empty");
  }
}

Eigen::Index DataPartition::total() const {
  return std::accumulate(sizes_.begin(), sizes_.end(), Eigen::Index{0});
}

Eigen::Index DataPartition::offset(Eigen::Index block) const {
  return std::accumulate(sizes_.begin(), sizes_.begin() + block, Eigen::Index{0});
}

Matrix Ensemble::centered() const {
  return particles.colwise() - empirical_mean(*this);
}

Matrix spd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NoiseModelError("matrix is not positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Matrix spd_inv_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NoiseModelError("matrix is not positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

LinearProblem whiten(const LinearProblem& problem) {
  problem.validate();
  return whiten_blocks(problem, diagonal_blocks(problem.gamma));
}

LinearProblem whiten(const LinearProblem& problem, const DataPartition& part) {
  problem.validate();
  if (part.total() != problem.y.size()) {
    throw PartitionError("partition sizes do not sum to the number of observations");
  }
  if (couples_blocks(problem.gamma, part.sizes())) {
    throw PartitionError("noise covariance is not block diagonal with respect to the partition");
  }
  return whiten_blocks(problem, part.sizes());
}

std::vector<DataBlock> partition(const LinearProblem& problem, const DataPartition& part) {
  if (part.total() != problem.A.rows() || problem.y.size() != problem.A.rows()) {
    throw PartitionError("partition sizes do not sum to the number of observations");
  }
  if (problem.gamma.rows() == problem.A.rows() && couples_blocks(problem.gamma, part.sizes())) {
    throw PartitionError("noise covariance is not block diagonal with respect to the partition");
  }
  std::vector<DataBlock> blocks;
  blocks.reserve(part.sizes().size());
  Eigen::Index off = 0;
  for (Eigen::Index s : part.sizes()) {
    blocks.push_back({problem.A.middleRows(off, s), problem.y.segment(off, s)});
    off += s;
  }
  return blocks;
}

DataBlock stack(const std::vector<DataBlock>& blocks) {
  if (blocks.empty()) return {};
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.A.rows();
  DataBlock out{Matrix(rows, blocks.front().A.cols()), Vector(rows)};
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    if (b.A.cols() != out.A.cols()) throw DimensionError("blocks differ in column count");
    out.A.middleRows(off, b.A.rows()) = b.A;
    out.y.segment(off, b.y.size()) = b.y;
    off += b.A.rows();
  }
  return out;
}

Vector empirical_mean(const Ensemble& ens) {
  return ens.particles.rowwise().mean();
}

Matrix empirical_covariance(const Ensemble& ens) {
  if (ens.size() < 2) throw DimensionError("covariance needs at least two particles");
  const Matrix e = ens.centered();
  Matrix c = (e * e.transpose()) / static_cast<double>(ens.size() - 1);
  return 0.5 * (c + c.transpose());
}

Matrix cross_covariance(const Ensemble& ens, const Matrix& A) {
  if (ens.size() < 2) throw DimensionError("covariance needs at least two particles");
  if (A.cols() != ens.dim()) throw DimensionError("forward operator does not match parameter dimension");
  const Matrix images = A * ens.particles;
  const Vector image_mean = images.rowwise().mean();
  const Matrix e = ens.centered();
  const Matrix f = images.colwise() - image_mean;
  return (e * f.transpose()) / static_cast<double>(ens.size() - 1);
}

Eigen::Index centered_rank(const Ensemble& ens, double rel_tol) {
  const Matrix e = ens.centered();
  Eigen::JacobiSVD<Matrix> svd(e);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

void require_nondegenerate(const Ensemble& ens) {
  if (ens.size() < 2) throw DimensionError("an ensemble needs at least two particles");
  if (centered_rank(ens) != ens.size() - 1) {
    throw Error("centered initial ensemble is not linearly independent");
  }
}

}  // namespace eki
