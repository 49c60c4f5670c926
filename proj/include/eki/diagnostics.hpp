#pragma once

#include "eki/problem.hpp"
#include "eki/reference.hpp"
#include "eki/regularization.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eki {

/// Time-stamped diagnostics of one run. Per-particle series are stored
/// row-per-sample-time (n_times x N_ens).
struct TrajectoryRecord {
  std::vector<double> times;
  Matrix param_error;   // |theta_j - theta_star|
  Matrix obs_misfit;    // |A_tilde (theta_j - theta_star)|
  Matrix collapse;      // |theta_j - mean|
  std::vector<double> lambda_min;  // smallest eigenvalue of C_hat in frame coordinates
  std::vector<std::size_t> jumps;  // index switches so far
  std::vector<double> projection_residual;  // distance to the initial affine frame (not persisted)

  std::size_t n_times() const { return times.size(); }
  Eigen::Index n_particles() const { return param_error.cols(); }
  void validate() const;
};

/// |theta_j - mean| for every particle.
Vector collapse_norms(const Ensemble& ens);

/// Smallest eigenvalue of E^T C_hat E (C_hat with the 1/(N_ens-1) divisor).
double lambda_min_in_frame(const Ensemble& ens, const Matrix& E);

/// |A_tilde theta - y_tilde|
double residual_misfit(const AugmentedProblem& p, const Vector& theta);

/// Largest eigenvalue of M^T M by power iteration.
double spectral_norm_squared(const Matrix& M, int max_iter = 1000, double tol = 1e-13);

/// Builds a TrajectoryRecord from ensemble snapshots.
class TrajectoryRecorder {
 public:
  TrajectoryRecorder(const SubspaceFrame& frame, Vector theta_star, const AugmentedProblem& full);

  void record(double t, const Ensemble& ens, std::size_t jumps);
  std::size_t size() const { return times_.size(); }
  TrajectoryRecord snapshot() const;

 private:
  const SubspaceFrame& frame_;
  Vector theta_star_;
  const AugmentedProblem& full_;
  std::vector<double> times_;
  std::vector<Vector> err_, obs_, col_;
  std::vector<double> lambda_;
  std::vector<std::size_t> jumps_;
  std::vector<double> residual_;
};

/// Lower bound lambda_min(t) >= 1 / (2 c t + 1 / lambda_min(0)), c = max_i |A_tilde_i|^2.
struct EigenBoundReport {
  bool skipped = false;  // lambda_min(0) <= 0
  bool passed = false;
  double c = 0.0;
  std::vector<double> bound;
  std::vector<double> margin;  // lambda_min - bound
  std::vector<bool> holds;
};

EigenBoundReport lambda_min_bound_check(const TrajectoryRecord& rec, const std::vector<AugmentedProblem>& subsets,
                                        double slack = 1e-10);

/// Mean over samples of min(1, |theta_s - theta_star|^q); the optimal coupling
/// with a point mass is the product coupling.
double wasserstein_to_dirac(std::span<const Vector> samples, const Vector& theta_star, double q = 1.0);

enum class RateAxes { loglog, semilogy };

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Least-squares line through log(values) against log(times) or times,
/// restricted to t in [t_lo, t_hi]. Needs >= 10 points, all positive.
RateFit rate_slope(std::span<const double> times, std::span<const double> values, double t_lo, double t_hi,
                   RateAxes axes);

struct SeriesSummary {
  std::string name;
  std::vector<double> mean;
  std::vector<double> std;  // sample standard deviation, N-1 divisor
};

struct Aggregate {
  std::vector<double> times;
  std::vector<SeriesSummary> series;
  std::size_t n_runs = 0;

  const SeriesSummary& get(const std::string& name) const;
};

/// Named scalar series of one run: param_error, param_error_sq, obs_misfit,
/// collapse, collapse_p<j>, lambda_min, jumps, wasserstein.
std::vector<std::pair<std::string, std::vector<double>>> run_series(const TrajectoryRecord& rec);

Aggregate aggregate_runs(const std::vector<TrajectoryRecord>& records);

/// Columns: time, series_name, mean, std, n_runs.
void write_aggregate_csv(std::ostream& out, const Aggregate& agg);
Aggregate read_aggregate_csv(std::istream& in);

/// Columns: time, particle, param_error, obs_misfit, collapse, lambda_min, jumps.
void write_run_csv(std::ostream& out, const TrajectoryRecord& rec);
TrajectoryRecord read_run_csv(std::istream& in);

}  // namespace eki
