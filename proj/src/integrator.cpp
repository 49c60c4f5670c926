#include "eki/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace eki {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// PI controller constants (Hairer & Wanner, DOPRI5)
constexpr double kSafe = 0.9;
constexpr double kBeta = 0.04;
constexpr double kFacMin = 0.2;   // largest shrink 1/5
constexpr double kFacMax = 10.0;  // largest growth 10

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("integrator tolerances must be positive");
  if (!(h_init > 0.0) || !(h_max > 0.0) || h_init > h_max) {
    throw ConfigError("integrator needs 0 < h_init <= h_max");
  }
  if (!std::is_sorted(sample_times.begin(), sample_times.end())) {
    throw ConfigError("sample times must be sorted");
  }
}

Matrix integrate(const RhsFunction& f, Matrix y, double t0, double t1, const IntegratorConfig& cfg,
                 SwitchingSource* switches, const StateObserver& observer, IntegrationStats* stats) {
  cfg.validate();
  if (!(t1 > t0)) throw ConfigError("integration interval must have t1 > t0");
  IntegrationStats local;
  IntegrationStats& st = stats ? *stats : local;
  const double h_min = 1e-14 * (t1 - t0);

  const auto rows = y.rows();
  const auto cols = y.cols();
  Matrix k1(rows, cols), k2(rows, cols), k3(rows, cols), k4(rows, cols), k5(rows, cols), k6(rows, cols),
      k7(rows, cols), ytmp(rows, cols), ynew(rows, cols), err(rows, cols);

  auto eval = [&](double t, const Matrix& state, Matrix& out) {
    f(t, state, out);
    ++st.rhs_evals;
  };
  auto notify = [&](double t, ObserverEvent ev) {
    if (observer) observer(t, y, ev);
  };

  auto sample = std::lower_bound(cfg.sample_times.begin(), cfg.sample_times.end(), t0);
  double t = t0;
  if (cfg.record_steps) st.step_nodes.push_back(t);
  while (sample != cfg.sample_times.end() && *sample <= t) {
    notify(t, ObserverEvent::sample);
    ++sample;
  }

  double h = std::min(cfg.h_init, cfg.h_max);
  double err_old = 1e-4;
  bool have_k1 = false;
  bool last_rejected = false;

  while (t < t1) {
    if (switches) {
      while (switches->next_switch_time() <= t) {
        switches->switch_now();
        ++st.switches;
        have_k1 = false;
        err_old = 1e-4;
        notify(t, ObserverEvent::jump);
      }
    }
    const double t_switch = switches ? switches->next_switch_time() : kInf;
    const double t_sample = sample != cfg.sample_times.end() ? *sample : kInf;
    const double t_stop = std::min({t1, t_switch, t_sample});

    if (!have_k1) {
      eval(t, y, k1);
      have_k1 = true;
    }

    const double span = t_stop - t;
    const bool lands = h >= span;
    const double hs = lands ? span : h;

    ytmp = y + hs * a21 * k1;
    eval(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    eval(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double t_end = lands ? t_stop : t + hs;
    eval(t_end, ytmp, k6);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    eval(t_end, ynew, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const auto scale = (cfg.atol + cfg.rtol * y.cwiseAbs().cwiseMax(ynew.cwiseAbs()).array()).eval();
    const double err_norm = std::sqrt((err.array() / scale).square().mean());

    if (!std::isfinite(err_norm) || !ynew.allFinite()) {
      if (hs <= h_min) throw DivergenceError("state became non-finite", t);
      h = hs * kFacMin;
      ++st.rejected;
      last_rejected = true;
      continue;
    }

    const double expo = 0.2 - kBeta * 0.75;
    double fac = std::pow(std::max(err_norm, 1e-300), expo);
    if (err_norm <= 1.0) {
      fac /= std::pow(err_old, kBeta);
      fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
      double h_next = hs / fac;
      if (last_rejected) h_next = std::min(h_next, hs);
      // a step shortened to hit an event does not shrink the proposal
      if (lands && hs < h) h_next = std::max(h_next, h);
      h = std::min(h_next, cfg.h_max);
      err_old = std::max(err_norm, 1e-4);
      last_rejected = false;

      y.swap(ynew);
      k1.swap(k7);
      t = t_end;
      ++st.accepted;
      if (cfg.record_steps) st.step_nodes.push_back(t);

      while (sample != cfg.sample_times.end() && *sample <= t) {
        notify(t, ObserverEvent::sample);
        ++sample;
      }
    } else {
      fac = std::min(1.0 / kFacMin, fac / kSafe);
      h = hs / fac;
      ++st.rejected;
      last_rejected = true;
      if (h < h_min && h < span) {
        throw StiffnessError("step size underflow", t);
      }
    }
  }
  return y;
}

FlowResult integrate_flow(const FlowSpec& spec, const Ensemble& ens0, IndexProcess* proc, double t0, double t1,
                          const IntegratorConfig& cfg, const EnsembleObserver& observer) {
  spec.validate();
  if ((proc == nullptr) != (spec.subsampling == Subsampling::none)) {
    throw ConfigError("an index process is required exactly for subsampled flows");
  }
  if (proc) {
    const int want = spec.subsampling == Subsampling::single ? 1 : static_cast<int>(ens0.size());
    if (proc->n_coordinates() != want) throw DimensionError("index process has the wrong number of coordinates");
    if (proc->n_sub() != spec.problem->n_sub()) throw PartitionError("index process and problem disagree on N_sub");
  }

  DriftEvaluator drift(spec);
  RhsFunction f = [&](double t, const Matrix& y, Matrix& dydt) {
    std::span<const int> idx;
    if (proc) idx = proc->indices();
    drift(y, t, idx, dydt);
  };

  Ensemble view;
  StateObserver obs;
  if (observer) {
    obs = [&](double t, const Matrix& y, ObserverEvent ev) {
      view.particles = y;
      observer(t, view, ev);
    };
  }

  FlowResult result;
  std::unique_ptr<IndexSwitching> sw;
  if (proc) sw = std::make_unique<IndexSwitching>(*proc);
  result.final.particles = integrate(f, ens0.particles, t0, t1, cfg, sw.get(), obs, &result.stats);
  if (proc && proc->now() < t1) proc->advance(t1);
  return result;
}

void write_step_log_csv(std::ostream& out, const std::vector<double>& nodes) {
  out << "step,time\n";
  char buf[48];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, nodes[i]);
    out << buf;
  }
}

}  // namespace eki
