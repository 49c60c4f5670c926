#include "eki/heat_model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace eki {

namespace {

bool is_integral(double v) {
  return std::abs(v - std::round(v)) < 1e-9 * std::max(1.0, std::abs(v));
}

}  // namespace

void HeatConfig::validate() const {
  if (!(h > 0.0) || !(dt > 0.0) || !(T > 0.0)) throw ConfigError("heat model needs h, dt, T > 0");
  if (!is_integral(1.0 / h) || std::lround(1.0 / h) < 2) {
    throw ConfigError("1/h must be an integer >= 2");
  }
  if (!is_integral(T / dt)) throw ConfigError("T/dt must be an integer");
  if (obs_per_step < 0 || obs_per_step > n_interior()) {
    throw ConfigError("obs_per_step must lie in [0, number of interior nodes]");
  }
}

int HeatConfig::n_interior() const { return static_cast<int>(std::lround(1.0 / h)) - 1; }
int HeatConfig::n_steps() const { return static_cast<int>(std::lround(T / dt)); }
int HeatConfig::n_obs_points() const { return obs_per_step == 0 ? n_interior() : obs_per_step; }

std::vector<int> HeatConfig::observed_nodes() const {
  const int n = n_interior();
  const int k = n_obs_points();
  std::vector<int> nodes(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    nodes[static_cast<std::size_t>(i)] = static_cast<int>((static_cast<long>(i) + 1) * (n + 1) / (k + 1)) - 1;
  }
  return nodes;
}

Vector HeatConfig::grid() const {
  const int n = n_interior();
  Vector x(n);
  for (int p = 0; p < n; ++p) x(p) = (p + 1) * h;
  return x;
}

Matrix assemble_forward(const HeatConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_interior();
  const int steps = cfg.n_steps();
  const auto nodes = cfg.observed_nodes();
  const int k = static_cast<int>(nodes.size());
  const double r = 1.0 / (cfg.h * cfg.h);

  // (I/dt + L/2) u_new = (I/dt - L/2) u_old + f,  L = tridiag(-1, 2, -1) / h^2
  const double diag_lhs = 1.0 / cfg.dt + r;
  const double off_lhs = -0.5 * r;
  const double diag_rhs = 1.0 / cfg.dt - r;
  const double off_rhs = 0.5 * r;

  // Thomas factorisation of the constant tridiagonal matrix
  Vector c_prime(n);
  Vector denom(n);
  denom(0) = diag_lhs;
  for (int p = 1; p < n; ++p) {
    c_prime(p - 1) = off_lhs / denom(p - 1);
    denom(p) = diag_lhs - off_lhs * c_prime(p - 1);
    if (denom(p) == 0.0 || !std::isfinite(denom(p))) throw AssemblyError("singular Crank-Nicolson factor");
  }
  if (denom(0) == 0.0) throw AssemblyError("singular Crank-Nicolson factor");

  // One column of U per nodal basis forcing.
  Matrix U = Matrix::Zero(n, n);
  Matrix rhs(n, n);
  Matrix A(steps * k, n);
  for (int s = 0; s < steps; ++s) {
    for (int p = 0; p < n; ++p) {
      rhs.row(p) = diag_rhs * U.row(p);
      if (p > 0) rhs.row(p) += off_rhs * U.row(p - 1);
      if (p < n - 1) rhs.row(p) += off_rhs * U.row(p + 1);
      rhs(p, p) += 1.0;
    }
    // forward sweep then back substitution
    U.row(0) = rhs.row(0) / denom(0);
    for (int p = 1; p < n; ++p) U.row(p) = (rhs.row(p) - off_lhs * U.row(p - 1)) / denom(p);
    for (int p = n - 2; p >= 0; --p) U.row(p) -= c_prime(p) * U.row(p + 1);
    for (int i = 0; i < k; ++i) A.row(s * k + i) = U.row(nodes[static_cast<std::size_t>(i)]);
  }
  return A;
}

DataPartition partition_by_timestep(const Matrix& A, const HeatConfig& cfg) {
  cfg.validate();
  const int k = cfg.n_obs_points();
  const int steps = cfg.n_steps();
  if (A.rows() != static_cast<Eigen::Index>(steps) * k) {
    throw PartitionError("operator rows do not match time steps x observation points");
  }
  return DataPartition(std::vector<Eigen::Index>(static_cast<std::size_t>(steps), k));
}

void KLFieldSpec::validate() const {
  if (!(sigma2 >= 0.0)) throw ConfigError("field variance must be >= 0");
  if (!(L_sc > 0.0)) throw ConfigError("length scale must be positive");
  if (n_terms < 1 || n_terms > grid.size()) throw ConfigError("n_terms must lie in [1, grid size]");
  if (weight < 0.0) throw ConfigError("quadrature weight must be >= 0");
}

Matrix covariance_matrix(const KLFieldSpec& spec) {
  const Eigen::Index n = spec.grid.size();
  Matrix C(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) {
      const double dx = spec.grid(p) - spec.grid(q);
      C(p, q) = spec.sigma2 * std::exp(-dx * dx / spec.L_sc);
    }
  }
  return C;
}

KLBasis kl_basis(const KLFieldSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.grid.size();
  double w = spec.weight;
  if (w == 0.0) w = n > 1 ? (spec.grid(n - 1) - spec.grid(0)) / static_cast<double>(n - 1) : 1.0;
  const Matrix K = w * covariance_matrix(spec);
  Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  KLBasis basis;
  basis.trace = K.trace();
  basis.eigenvalues.resize(spec.n_terms);
  basis.modes.resize(n, spec.n_terms);
  for (int i = 0; i < spec.n_terms; ++i) {
    const Eigen::Index col = n - 1 - i;  // eigenvalues come ascending
    basis.eigenvalues(i) = std::max(0.0, es.eigenvalues()(col));
    Vector v = es.eigenvectors().col(col);
    // fix the sign so the largest-magnitude entry is positive
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0.0) v = -v;
    basis.modes.col(i) = v / std::sqrt(w);
  }
  return basis;
}

Vector KLBasis::pointwise_variance() const {
  return modes.array().square().matrix() * eigenvalues;
}

double KLBasis::captured_fraction() const {
  return trace > 0.0 ? eigenvalues.sum() / trace : 1.0;
}

Vector sample_kl_field(const KLBasis& basis, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector xi(basis.eigenvalues.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return basis.modes * (basis.eigenvalues.cwiseSqrt().cwiseProduct(xi));
}

Vector sample_kl_field(const KLFieldSpec& spec, Rng& rng) {
  return sample_kl_field(kl_basis(spec), rng);
}

Ensemble draw_initial_ensemble(const KLBasis& basis, int n_ens, Rng& rng) {
  if (n_ens < 2) throw DimensionError("an ensemble needs at least two particles");
  const Eigen::Index want = std::min<Eigen::Index>(n_ens - 1, basis.eigenvalues.size());
  for (int attempt = 0; attempt <= 10; ++attempt) {
    Ensemble ens{Matrix(basis.modes.rows(), n_ens)};
    for (int j = 0; j < n_ens; ++j) ens.particles.col(j) = sample_kl_field(basis, rng);
    if (centered_rank(ens) == want) return ens;
  }
  throw Error("initial ensemble stayed rank deficient after 10 retries");
}

Ensemble draw_initial_ensemble(const KLFieldSpec& spec, int n_ens, Rng& rng) {
  return draw_initial_ensemble(kl_basis(spec), n_ens, rng);
}

}  // namespace eki
