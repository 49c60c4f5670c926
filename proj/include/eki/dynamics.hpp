#pragma once

#include "eki/problem.hpp"
#include "eki/regularization.hpp"

#include <memory>
#include <span>
#include <string>

namespace eki {

enum class FlowVariant { eki, teki, teki_vi, teki_dim_vi };
enum class Subsampling { none, single, batch };

const char* to_string(FlowVariant v);
const char* to_string(Subsampling s);
FlowVariant flow_variant_from_string(const std::string& name);
Subsampling subsampling_from_string(const std::string& name);

/// Which ensemble flow to evaluate.
///
/// Each particle moves along -P(t) grad Phi_sel(theta_j) with preconditioner
///   teki         P = C_hat
///   teki_vi      P = C_hat + alpha_vi C_vi
///   teki_dim_vi  P = C_hat + alpha_vi / (1 + t) C_vi
/// and Phi_sel the regularised potential of the full data, of the shared
/// active subset (single) or of the particle's own subset (batch). The plain
/// eki variant uses the unregularised misfit through the cross covariance.
struct FlowSpec {
  FlowVariant variant = FlowVariant::teki;
  Subsampling subsampling = Subsampling::none;
  double alpha_vi = 0.0;
  Matrix C_vi;
  std::shared_ptr<const SubsampledProblem> problem;

  void validate() const;
  /// Inflation weight at time t (0 without inflation).
  double inflation(double t) const;
};

/// Drift of every particle (d x N_ens). `idx` is empty without subsampling,
/// holds one index for single and N_ens indices for batch subsampling.
Matrix rhs(const FlowSpec& spec, const Ensemble& ens, double t, std::span<const int> idx);

/// Allocation-free variant used by the integrator.
class DriftEvaluator {
 public:
  explicit DriftEvaluator(const FlowSpec& spec);

  void operator()(const Matrix& particles, double t, std::span<const int> idx, Matrix& drift);

 private:
  const FlowSpec& spec_;
  Matrix vi_factor_;  // F with C_vi = F F^T, used when C_vi is low rank
  bool vi_low_rank_ = false;
  Matrix vi_coeffs_;
  Matrix centered_;
  Matrix grads_;
  Matrix coeffs_;
  Matrix images_;
  Vector mean_;
};

/// max_j |(I - P_E)(theta_j - offset)| for an orthonormal basis of E.
double subspace_projection_residual(const Ensemble& ens, const Matrix& basis, const Vector& offset);

/// g^T (A_tilde^T A_tilde)^{-1} g with g = A_tilde^T (A_tilde theta_j - y_tilde).
/// This is |A_tilde theta_j - A_tilde theta_i|^2 for the subset minimiser
/// theta_i, which decays monotonically along a fixed-subset flow.
double gradient_lyapunov(const Ensemble& ens, const AugmentedProblem& sub, Eigen::Index j);

}  // namespace eki
