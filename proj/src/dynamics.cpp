#include "eki/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace eki {

const char* to_string(FlowVariant v) {
  switch (v) {
    case FlowVariant::eki:
      return "eki";
    case FlowVariant::teki:
      return "teki";
    case FlowVariant::teki_vi:
      return "teki_vi";
    case FlowVariant::teki_dim_vi:
      return "teki_dim_vi";
  }
  return "?";
}

const char* to_string(Subsampling s) {
  switch (s) {
    case Subsampling::none:
      return "none";
    case Subsampling::single:
      return "single";
    case Subsampling::batch:
      return "batch";
  }
  return "?";
}

FlowVariant flow_variant_from_string(const std::string& name) {
  for (auto v : {FlowVariant::eki, FlowVariant::teki, FlowVariant::teki_vi, FlowVariant::teki_dim_vi}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown flow variant '" + name + "'");
}

Subsampling subsampling_from_string(const std::string& name) {
  for (auto s : {Subsampling::none, Subsampling::single, Subsampling::batch}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown subsampling mode '" + name + "'");
}

void FlowSpec::validate() const {
  if (!problem) throw Error("flow has no problem attached");
  const Eigen::Index d = problem->dim();
  if (subsampling != Subsampling::none && problem->n_sub() < 2) {
    throw PartitionError("subsampled flow needs at least two subsets");
  }
  if (variant == FlowVariant::teki_vi || variant == FlowVariant::teki_dim_vi) {
    if (!(alpha_vi > 0.0)) throw ConfigError("variance inflation weight must be positive");
    if (C_vi.rows() != d || C_vi.cols() != d) throw DimensionError("inflation covariance has wrong shape");
    const double scale = std::max(1.0, C_vi.cwiseAbs().maxCoeff());
    if ((C_vi - C_vi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ConfigError("inflation covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(C_vi, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale || es.eigenvalues().maxCoeff() <= 0.0) {
      throw ConfigError("inflation covariance is not positive semidefinite");
    }
  }
}

double FlowSpec::inflation(double t) const {
  switch (variant) {
    case FlowVariant::teki_vi:
      return alpha_vi;
    case FlowVariant::teki_dim_vi:
      return alpha_vi / (1.0 + t);
    default:
      return 0.0;
  }
}

DriftEvaluator::DriftEvaluator(const FlowSpec& spec) : spec_(spec) {
  spec_.validate();
  if (spec_.inflation(0.0) == 0.0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(spec_.C_vi);
  const Vector& lam = es.eigenvalues();
  const double cut = 1e-12 * lam.maxCoeff();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) rank += lam(i) > cut ? 1 : 0;
  if (2 * rank >= lam.size()) return;
  // eigenvalues ascend, so the retained pairs are the trailing ones
  vi_factor_ = es.eigenvectors().rightCols(rank) * lam.tail(rank).cwiseSqrt().asDiagonal();
  vi_low_rank_ = true;
}

void DriftEvaluator::operator()(const Matrix& particles, double t, std::span<const int> idx, Matrix& drift) {
  const SubsampledProblem& sp = *spec_.problem;
  const Eigen::Index d = particles.rows();
  const Eigen::Index n = particles.cols();
  if (d != sp.dim()) throw DimensionError("ensemble dimension does not match the problem");
  if (n < 2) throw DimensionError("ensemble needs at least two particles");
  const std::size_t want = spec_.subsampling == Subsampling::none     ? 0
                           : spec_.subsampling == Subsampling::single ? 1
                                                                      : static_cast<std::size_t>(n);
  if (idx.size() != want) throw DimensionError("subset index count does not match the subsampling mode");
  for (int i : idx) {
    if (i < 0 || i >= sp.n_sub()) throw PartitionError("subset index out of range");
  }

  const double scale = 1.0 / static_cast<double>(n - 1);
  mean_ = particles.rowwise().mean();
  centered_ = particles.colwise() - mean_;
  drift.resize(d, n);

  if (spec_.variant == FlowVariant::eki) {
    // -C^{theta y} (A theta_j - y): coefficients <A e_k, A theta_j - y>
    auto block_for = [&](Eigen::Index j) -> const DataBlock& {
      switch (spec_.subsampling) {
        case Subsampling::none:
          return sp.data;
        case Subsampling::single:
          return sp.blocks[static_cast<std::size_t>(idx[0])];
        case Subsampling::batch:
          break;
      }
      return sp.blocks[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
    };
    coeffs_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const DataBlock& blk = block_for(j);
      images_.noalias() = blk.A * centered_;
      const Vector residual = blk.A * particles.col(j) - blk.y;
      coeffs_.col(j).noalias() = images_.transpose() * residual;
    }
    drift.noalias() = -scale * centered_ * coeffs_;
    return;
  }

  switch (spec_.subsampling) {
    case Subsampling::none:
      grads_.noalias() = sp.full_normal.H * particles;
      grads_.colwise() -= sp.full_normal.b;
      break;
    case Subsampling::single: {
      const NormalForm& nf = sp.subset_normal[static_cast<std::size_t>(idx[0])];
      grads_.noalias() = nf.H * particles;
      grads_.colwise() -= nf.b;
      break;
    }
    case Subsampling::batch:
      grads_.resize(d, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const NormalForm& nf = sp.subset_normal[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        grads_.col(j).noalias() = nf.H * particles.col(j);
        grads_.col(j) -= nf.b;
      }
      break;
  }

  // C_hat g = 1/(N-1) sum_k e_k <e_k, g>
  // inner dimensions are N or rank(C_vi): lazy products skip GEMM packing
  coeffs_.noalias() = centered_.transpose().lazyProduct(grads_);
  drift.noalias() = -scale * centered_.lazyProduct(coeffs_);
  const double s = spec_.inflation(t);
  if (s == 0.0) return;
  if (vi_low_rank_) {
    vi_coeffs_.noalias() = vi_factor_.transpose().lazyProduct(grads_);
    drift.noalias() -= s * vi_factor_.lazyProduct(vi_coeffs_);
  } else {
    drift.noalias() -= s * spec_.C_vi * grads_;
  }
}

Matrix rhs(const FlowSpec& spec, const Ensemble& ens, double t, std::span<const int> idx) {
  DriftEvaluator eval(spec);
  Matrix drift;
  eval(ens.particles, t, idx, drift);
  return drift;
}

double subspace_projection_residual(const Ensemble& ens, const Matrix& basis, const Vector& offset) {
  if (basis.rows() != ens.dim() || offset.size() != ens.dim()) {
    throw DimensionError("basis or offset does not match parameter dimension");
  }
  const Matrix shifted = ens.particles.colwise() - offset;
  const Matrix outside = shifted - basis * (basis.transpose() * shifted);
  return outside.colwise().norm().maxCoeff();
}

double gradient_lyapunov(const Ensemble& ens, const AugmentedProblem& sub, Eigen::Index j) {
  if (j < 0 || j >= ens.size()) throw DimensionError("particle index out of range");
  const Vector g = potential_gradient(sub, ens.particles.col(j));
  const Matrix H = sub.A_tilde.transpose() * sub.A_tilde;
  return g.dot(H.ldlt().solve(g));
}

}  // namespace eki
