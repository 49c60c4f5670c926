#pragma once

#include "eki/problem.hpp"
#include "eki/regularization.hpp"

namespace eki {

/// Affine subspace theta0_perp + span(E) that the particles never leave.
struct SubspaceFrame {
  Matrix E;                // d x (N_ens - 1), orthonormal columns
  Vector theta0_perp;      // mean(0) minus its projection onto span(E)

  Eigen::Index dim() const { return E.cols(); }
  /// Coordinates c with theta = E c + theta0_perp (least squares for off-frame theta).
  Vector coordinates(const Vector& theta) const { return E.transpose() * (theta - theta0_perp); }
  Vector embed(const Vector& c) const { return E * c + theta0_perp; }
};

/// Throws unless the centered ensemble has rank N_ens - 1.
SubspaceFrame build_frame(const Ensemble& ens0);

struct ConstrainedSolution {
  Vector c_dagger;
  Vector theta_star;
};

/// argmin over c of 1/2 |A_tilde E c - (y_tilde - A_tilde theta0_perp)|^2,
/// solved by Householder QR of A_tilde E.
ConstrainedSolution constrained_tikhonov(const SubspaceFrame& frame, const AugmentedProblem& aug);

}  // namespace eki
