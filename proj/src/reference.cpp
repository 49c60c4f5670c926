#include "eki/reference.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace eki {

SubspaceFrame build_frame(const Ensemble& ens0) {
  if (ens0.size() < 2) throw DimensionError("an ensemble needs at least two particles");
  const Matrix centered = ens0.centered();
  const Eigen::Index k = ens0.size() - 1;
  if (ens0.dim() < k) throw Error("parameter dimension is smaller than N_ens - 1");

  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s(0) == 0.0 || s(k - 1) <= 1e-10 * s(0)) {
    throw Error("centered initial ensemble does not span an (N_ens - 1)-dimensional subspace");
  }
  SubspaceFrame frame;
  frame.E = svd.matrixU().leftCols(k);
  const Vector mean = empirical_mean(ens0);
  frame.theta0_perp = mean - frame.E * (frame.E.transpose() * mean);
  return frame;
}

ConstrainedSolution constrained_tikhonov(const SubspaceFrame& frame, const AugmentedProblem& aug) {
  if (frame.E.rows() != aug.dim()) throw DimensionError("frame and problem differ in dimension");
  const Matrix AE = aug.A_tilde * frame.E;
  const Vector rhs = aug.y_tilde - aug.A_tilde * frame.theta0_perp;
  Eigen::HouseholderQR<Matrix> qr(AE);
  const Matrix R = qr.matrixQR().topRows(AE.cols()).triangularView<Eigen::Upper>();
  const double rmax = R.diagonal().cwiseAbs().maxCoeff();
  const double rmin = R.diagonal().cwiseAbs().minCoeff();
  if (!(rmin > 1e-13 * rmax)) throw Error("constrained normal matrix is numerically singular");
  ConstrainedSolution sol;
  sol.c_dagger = qr.solve(rhs);
  sol.theta_star = frame.embed(sol.c_dagger);
  return sol;
}

}  // namespace eki
