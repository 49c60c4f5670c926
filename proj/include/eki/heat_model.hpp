#pragma once

#include "eki/index_process.hpp"
#include "eki/problem.hpp"

namespace eki {

/// u_t - u_xx = f(x) on (0,1), zero initial and boundary values, discretised
/// with Crank-Nicolson on the interior nodes x_p = p h and observed after each
/// of the T/dt time steps.
struct HeatConfig {
  double h = 0.01;
  double dt = 0.05;
  double T = 0.3;
  int obs_per_step = 0;  // 0 means every interior node

  void validate() const;
  int n_interior() const;
  int n_steps() const;
  int n_obs_points() const;
  /// Interior-node indices that are observed.
  std::vector<int> observed_nodes() const;
  Vector grid() const;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Linear map from nodal forcing to stacked observations, rows ordered by time
/// step then observation point (n_steps * K x n_interior).
Matrix assemble_forward(const HeatConfig& cfg);

/// One subset per observed time step.
DataPartition partition_by_timestep(const Matrix& A, const HeatConfig& cfg);

/// Squared-exponential field C(s,t) = sigma2 exp(-|s-t|^2 / L_sc) truncated to
/// n_terms Karhunen-Loeve modes on the grid.
struct KLFieldSpec {
  double sigma2 = 10.0;
  double L_sc = 0.1;
  int n_terms = 8;
  Vector grid;
  double weight = 0.0;  // quadrature weight; 0 picks the grid spacing

  void validate() const;
};

/// Leading eigenpairs of the quadrature-weighted covariance w C(x_p, x_q).
/// modes are L2-normalised: column i holds e_i on the grid.
struct KLBasis {
  Vector eigenvalues;  // descending, length n_terms
  Matrix modes;        // grid x n_terms
  double trace = 0.0;  // trace of the weighted covariance matrix

  /// Sum_i lambda_i e_i(x)^2 at every grid point.
  Vector pointwise_variance() const;
  double captured_fraction() const;
};

Matrix covariance_matrix(const KLFieldSpec& spec);
KLBasis kl_basis(const KLFieldSpec& spec);

/// sum_i sqrt(lambda_i) e_i xi_i with xi_i ~ N(0,1).
Vector sample_kl_field(const KLBasis& basis, Rng& rng);
Vector sample_kl_field(const KLFieldSpec& spec, Rng& rng);

/// n_ens independent field draws; resampled (at most 10 retries) until the
/// centered family has rank min(n_ens - 1, n_terms).
Ensemble draw_initial_ensemble(const KLBasis& basis, int n_ens, Rng& rng);
Ensemble draw_initial_ensemble(const KLFieldSpec& spec, int n_ens, Rng& rng);

}  // namespace eki
