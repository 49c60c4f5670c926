#include "eki/diagnostics.hpp"
#include "eki/dynamics.hpp"
#include "eki/matrix_io.hpp"

#include <Eigen/Eigenvalues>

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace eki {

void TrajectoryRecord::validate() const {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (param_error.rows() != n || obs_misfit.rows() != n || collapse.rows() != n ||
      lambda_min.size() != times.size() || jumps.size() != times.size()) {
    throw DimensionError("trajectory series do not share the time axis");
  }
  if (obs_misfit.cols() != param_error.cols() || collapse.cols() != param_error.cols()) {
    throw DimensionError("trajectory series differ in particle count");
  }
}

Vector collapse_norms(const Ensemble& ens) {
  return ens.centered().colwise().norm().transpose();
}

double lambda_min_in_frame(const Ensemble& ens, const Matrix& E) {
  const Matrix coords = E.transpose() * ens.centered();
  const Matrix C = coords * coords.transpose() / static_cast<double>(ens.size() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(C, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double residual_misfit(const AugmentedProblem& p, const Vector& theta) {
  return (p.A_tilde * theta - p.y_tilde).norm();
}

double spectral_norm_squared(const Matrix& M, int max_iter, double tol) {
  Vector v = Vector::Ones(M.cols()) / std::sqrt(static_cast<double>(M.cols()));
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = M.transpose() * (M * v);
    const double next = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(next - lambda) <= tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotient of the converged vector
  return (M * v).squaredNorm();
}

TrajectoryRecorder::TrajectoryRecorder(const SubspaceFrame& frame, Vector theta_star, const AugmentedProblem& full)
    : frame_(frame), theta_star_(std::move(theta_star)), full_(full) {}

void TrajectoryRecorder::record(double t, const Ensemble& ens, std::size_t jumps) {
  const Matrix diff = ens.particles.colwise() - theta_star_;
  times_.push_back(t);
  err_.push_back(diff.colwise().norm().transpose());
  obs_.push_back((full_.A_tilde * diff).colwise().norm().transpose());
  col_.push_back(collapse_norms(ens));
  lambda_.push_back(lambda_min_in_frame(ens, frame_.E));
  jumps_.push_back(jumps);
  residual_.push_back(subspace_projection_residual(ens, frame_.E, frame_.theta0_perp));
}

TrajectoryRecord TrajectoryRecorder::snapshot() const {
  TrajectoryRecord rec;
  rec.times = times_;
  const auto n = static_cast<Eigen::Index>(times_.size());
  const Eigen::Index m = n ? err_.front().size() : 0;
  rec.param_error.resize(n, m);
  rec.obs_misfit.resize(n, m);
  rec.collapse.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    rec.param_error.row(i) = err_[k].transpose();
    rec.obs_misfit.row(i) = obs_[k].transpose();
    rec.collapse.row(i) = col_[k].transpose();
  }
  rec.lambda_min = lambda_;
  rec.jumps = jumps_;
  rec.projection_residual = residual_;
  return rec;
}

// Single-subsampling TEKI gives d/dt C^{-1} = 2 E^T A_i^T A_i E <= 2c in frame
// coordinates, so 1/lambda_min grows at most linearly. The identity does not
// depend on the covariance divisor.
EigenBoundReport lambda_min_bound_check(const TrajectoryRecord& rec, const std::vector<AugmentedProblem>& subsets,
                                        double slack) {
  EigenBoundReport report;
  if (rec.times.empty()) throw Error("empty trajectory");
  for (const auto& s : subsets) report.c = std::max(report.c, spectral_norm_squared(s.A_tilde));
  const double l0 = rec.lambda_min.front();
  if (!(l0 > 0.0)) {
    report.skipped = true;
    return report;
  }
  const double t0 = rec.times.front();
  report.passed = true;
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const double b = 1.0 / (2.0 * report.c * (rec.times[k] - t0) + 1.0 / l0);
    report.bound.push_back(b);
    report.margin.push_back(rec.lambda_min[k] - b);
    const bool ok = rec.lambda_min[k] >= b - slack;
    report.holds.push_back(ok);
    report.passed = report.passed && ok;
  }
  return report;
}

double wasserstein_to_dirac(std::span<const Vector> samples, const Vector& theta_star, double q) {
  if (samples.empty()) throw Error("no samples");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("exponent q must lie in (0, 1]");
  double sum = 0.0;
  for (const auto& s : samples) sum += std::min(1.0, std::pow((s - theta_star).norm(), q));
  return sum / static_cast<double>(samples.size());
}

RateFit rate_slope(std::span<const double> times, std::span<const double> values, double t_lo, double t_hi,
                   RateAxes axes) {
  if (times.size() != values.size()) throw DimensionError("times and values differ in length");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_lo || times[k] > t_hi) continue;
    if (!(values[k] > 0.0)) throw Error("non-positive value inside the fit window");
    if (axes == RateAxes::loglog && !(times[k] > 0.0)) throw Error("non-positive time on a log axis");
    xs.push_back(axes == RateAxes::loglog ? std::log(times[k]) : times[k]);
    ys.push_back(std::log(values[k]));
  }
  if (xs.size() < 10) throw Error("fewer than 10 samples inside the fit window");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  RateFit fit;
  fit.n = xs.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

const SeriesSummary& Aggregate::get(const std::string& name) const {
  for (const auto& s : series) {
    if (s.name == name) return s;
  }
  throw Error("aggregate has no series '" + name + "'");
}

std::vector<std::pair<std::string, std::vector<double>>> run_series(const TrajectoryRecord& rec) {
  rec.validate();
  const std::size_t n = rec.n_times();
  const Eigen::Index m = rec.n_particles();
  std::vector<std::pair<std::string, std::vector<double>>> out;
  auto per_time = [&](auto fn) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = fn(static_cast<Eigen::Index>(k));
    return v;
  };
  out.emplace_back("param_error", per_time([&](Eigen::Index k) { return rec.param_error.row(k).mean(); }));
  out.emplace_back("param_error_sq",
                   per_time([&](Eigen::Index k) { return rec.param_error.row(k).array().square().mean(); }));
  out.emplace_back("obs_misfit", per_time([&](Eigen::Index k) { return rec.obs_misfit.row(k).mean(); }));
  out.emplace_back("collapse", per_time([&](Eigen::Index k) { return rec.collapse.row(k).mean(); }));
  for (Eigen::Index j = 0; j < m; ++j) {
    out.emplace_back("collapse_p" + std::to_string(j + 1),
                     per_time([&](Eigen::Index k) { return rec.collapse(k, j); }));
  }
  out.emplace_back("lambda_min", rec.lambda_min);
  out.emplace_back("jumps", per_time([&](Eigen::Index k) { return static_cast<double>(rec.jumps[static_cast<std::size_t>(k)]); }));
  out.emplace_back("wasserstein", per_time([&](Eigen::Index k) {
                     return rec.param_error.row(k).array().min(1.0).mean();
                   }));
  return out;
}

Aggregate aggregate_runs(const std::vector<TrajectoryRecord>& records) {
  if (records.empty()) throw Error("nothing to aggregate");
  Aggregate agg;
  agg.times = records.front().times;
  agg.n_runs = records.size();
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> all;
  for (const auto& r : records) {
    if (r.times != agg.times) throw DimensionError("runs have different time axes");
    if (r.n_particles() != records.front().n_particles()) throw DimensionError("runs differ in ensemble size");
    all.push_back(run_series(r));
  }
  const double n = static_cast<double>(records.size());
  for (std::size_t s = 0; s < all.front().size(); ++s) {
    SeriesSummary sum;
    sum.name = all.front()[s].first;
    sum.mean.assign(agg.times.size(), 0.0);
    sum.std.assign(agg.times.size(), 0.0);
    for (std::size_t k = 0; k < agg.times.size(); ++k) {
      double m = 0.0;
      for (const auto& run : all) m += run[s].second[k];
      m /= n;
      double var = 0.0;
      for (const auto& run : all) var += (run[s].second[k] - m) * (run[s].second[k] - m);
      sum.mean[k] = m;
      sum.std[k] = records.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    }
    agg.series.push_back(std::move(sum));
  }
  return agg;
}

void write_aggregate_csv(std::ostream& out, const Aggregate& agg) {
  out << "time,series_name,mean,std,n_runs\n";
  for (const auto& s : agg.series) {
    for (std::size_t k = 0; k < agg.times.size(); ++k) {
      out << format_double(agg.times[k]) << ',' << s.name << ',' << format_double(s.mean[k]) << ','
          << format_double(s.std[k]) << ',' << agg.n_runs << '\n';
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ls(line);
  while (std::getline(ls, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error("line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

long long to_integer(const std::string& tok, std::size_t line) {
  long long v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error("line " + std::to_string(line) + ": bad integer '" + tok + "'");
  }
  return v;
}

}  // namespace

Aggregate read_aggregate_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "time,series_name,mean,std,n_runs") {
    throw Error("aggregate csv: unexpected header");
  }
  Aggregate agg;
  std::map<std::string, std::size_t> where;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 5) throw Error("aggregate csv: line " + std::to_string(lineno) + " needs 5 fields");
    auto [it, fresh] = where.emplace(f[1], agg.series.size());
    if (fresh) agg.series.push_back({f[1], {}, {}});
    auto& s = agg.series[it->second];
    const double t = to_double(f[0], lineno);
    if (it->second == 0) agg.times.push_back(t);
    s.mean.push_back(to_double(f[2], lineno));
    s.std.push_back(to_double(f[3], lineno));
    agg.n_runs = static_cast<std::size_t>(to_integer(f[4], lineno));
  }
  for (const auto& s : agg.series) {
    if (s.mean.size() != agg.times.size()) throw Error("aggregate csv: series '" + s.name + "' is ragged");
  }
  return agg;
}

void write_run_csv(std::ostream& out, const TrajectoryRecord& rec) {
  rec.validate();
  out << "time,particle,param_error,obs_misfit,collapse,lambda_min,jumps\n";
  for (std::size_t k = 0; k < rec.n_times(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    for (Eigen::Index j = 0; j < rec.n_particles(); ++j) {
      out << format_double(rec.times[k]) << ',' << (j + 1) << ',' << format_double(rec.param_error(i, j)) << ','
          << format_double(rec.obs_misfit(i, j)) << ',' << format_double(rec.collapse(i, j)) << ','
          << format_double(rec.lambda_min[k]) << ',' << rec.jumps[k] << '\n';
    }
  }
}

TrajectoryRecord read_run_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "time,particle,param_error,obs_misfit,collapse,lambda_min,jumps") {
    throw Error("run csv: unexpected header");
  }
  struct Row {
    double t;
    long long particle;
    double err, obs, col, lam;
    long long jumps;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw Error("run csv: line " + std::to_string(lineno) + " needs 7 fields");
    rows.push_back({to_double(f[0], lineno), to_integer(f[1], lineno), to_double(f[2], lineno),
                    to_double(f[3], lineno), to_double(f[4], lineno), to_double(f[5], lineno),
                    to_integer(f[6], lineno)});
  }
  if (rows.empty()) throw Error("run csv: no data rows");
  long long m = 0;
  while (static_cast<std::size_t>(m) < rows.size() && rows[static_cast<std::size_t>(m)].t == rows.front().t) ++m;
  if (rows.size() % static_cast<std::size_t>(m) != 0) throw Error("run csv: ragged particle blocks");
  const std::size_t n = rows.size() / static_cast<std::size_t>(m);
  TrajectoryRecord rec;
  rec.param_error.resize(static_cast<Eigen::Index>(n), m);
  rec.obs_misfit.resize(static_cast<Eigen::Index>(n), m);
  rec.collapse.resize(static_cast<Eigen::Index>(n), m);
  for (std::size_t k = 0; k < n; ++k) {
    const Row& head = rows[k * static_cast<std::size_t>(m)];
    rec.times.push_back(head.t);
    rec.lambda_min.push_back(head.lam);
    rec.jumps.push_back(static_cast<std::size_t>(head.jumps));
    for (long long j = 0; j < m; ++j) {
      const Row& r = rows[k * static_cast<std::size_t>(m) + static_cast<std::size_t>(j)];
      if (r.t != head.t || r.particle != j + 1) {
        throw Error("run csv: rows for time " + format_double(head.t) + " are out of order");
      }
      rec.param_error(static_cast<Eigen::Index>(k), j) = r.err;
      rec.obs_misfit(static_cast<Eigen::Index>(k), j) = r.obs;
      rec.collapse(static_cast<Eigen::Index>(k), j) = r.col;
    }
  }
  return rec;
}

}  // namespace eki
