// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include "eki/config.hpp"
#include "eki/diagnostics.hpp"
#include "eki/dynamics.hpp"
#include "eki/heat_model.hpp"
#include "eki/index_process.hpp"
#include "eki/integrator.hpp"
#include "eki/reference.hpp"
#include "eki/runner.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace eki;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;  // informational lines printed below the verdict
};

class Battery {
 public:
  explicit Battery(std::string only) : only_(std::move(only)) {}

  void check(const std::string& name, double budget_s, const std::function<Verdict()>& body) {
    if (!only_.empty() && name.find(only_) == std::string::npos) return;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what(), {}};
    }
    const double s = seconds_since(t0);
    const bool in_time = s < budget_s;
    const bool pass = v.pass && in_time;
    std::printf("%s  %-28s %8.2fs (budget %.0fs)  %s%s\n", pass ? "PASS" : "FAIL", name.c_str(), s, budget_s,
                v.detail.c_str(), in_time ? "" : "  [over time budget]");
    for (const auto& n : v.notes) std::printf("      %s\n", n.c_str());
    std::fflush(stdout);
    failures_ += pass ? 0 : 1;
    ++count_;
  }

  int failures() const { return failures_; }
  int count() const { return count_; }

 private:
  std::string only_;
  int failures_ = 0;
  int count_ = 0;
};

struct Cell {
  ExperimentConfig cfg;
  CampaignData data;
  std::vector<RunOutcome> runs;
  double seconds = 0.0;
};

Cell run_cell(const std::string& name, int jobs) {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = preset(name);
  Cell c{cfg, build_campaign_data(cfg), {}, 0.0};
  c.runs.resize(static_cast<std::size_t>(c.cfg.n_runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < c.cfg.n_runs; r = next++) c.runs[static_cast<std::size_t>(r)] = execute_run(c.cfg, c.data, r);
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min(jobs, c.cfg.n_runs); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  c.seconds = seconds_since(t0);
  return c;
}

std::vector<TrajectoryRecord> records(const Cell& c) {
  std::vector<TrajectoryRecord> out;
  for (const auto& r : c.runs) {
    if (!r.ok) throw Error(c.cfg.name + " run " + std::to_string(r.run + 1) + " failed: " + r.error);
    out.push_back(r.record);
  }
  return out;
}

/// Mean over runs and particles of a squared per-particle series.
std::vector<double> mean_square(const std::vector<TrajectoryRecord>& recs, Matrix TrajectoryRecord::*field) {
  std::vector<double> out(recs.front().n_times(), 0.0);
  for (const auto& r : recs) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] += (r.*field).row(static_cast<Eigen::Index>(k)).array().square().mean() / static_cast<double>(recs.size());
    }
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kFamilies[] = {"vi", "dimvi", "novi"};
constexpr const char* kMethods[] = {"eki", "single", "batch"};

std::string desk(const char* fam, const char* m) { return std::string("heat_") + fam + "_" + m + "_desk"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance battery"};
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string only;
  app.add_option("--jobs", jobs, "worker threads for Monte-Carlo runs")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "run only criteria whose name contains this text");
  CLI11_PARSE(app, argc, argv);

  std::printf("%s, %d worker thread(s)\n", version_string().c_str(), jobs);
  Battery battery(only);
  std::map<std::string, Cell> cells;
  auto cell = [&](const std::string& name) -> const Cell& {
    auto it = cells.find(name);
    if (it == cells.end()) it = cells.emplace(name, run_cell(name, jobs)).first;
    return it->second;
  };

  battery.check("reference_oracle", 1.0, [] {
    const auto cfg = preset("heat_vi_eki_desk");
    const auto data = build_campaign_data(cfg);
    Rng rng(derive_seed(cfg.master_seed, 99));
    const auto frame = build_frame(draw_initial_ensemble(data.prior, cfg.model.n_ens, rng));
    const auto& aug = data.problem->full;
    const Vector mine = constrained_tikhonov(frame, aug).theta_star;
    const Vector c = oracle::mgs_lstsq(aug.A_tilde * frame.E, aug.y_tilde - aug.A_tilde * frame.theta0_perp);
    const Vector ref = frame.E * c + frame.theta0_perp;
    const double rel = (mine - ref).norm() / ref.norm();
    return Verdict{rel <= 1e-9, fmt("relative difference %.2e (tol 1e-9), d = %td", rel, aug.dim()), {}};
  });

  battery.check("potential_splitting", 1.0, [] {
    const auto data = build_campaign_data(preset("heat_vi_eki_desk"));
    const auto& sp = *data.problem;
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Vector theta = std::pow(10.0, -2.0 + 4.0 * k / 99.0) * oracle::random_vector(sp.dim(), rng);
      const double full = potential(sp.full, theta);
      double sum = 0.0;
      for (const auto& s : sp.subsets) sum += potential(s, theta);
      worst = std::max(worst, std::abs(full - sum) / (1.0 + full));
    }
    return Verdict{worst <= 1e-10, fmt("max |Phi - sum Phi_i| / (1 + Phi) = %.2e over 100 points (tol 1e-10)", worst),
                   {}};
  });

  battery.check("ctmp_law", 30.0, [] {
    Verdict v{true, "", {}};
    Rng rng(77);
    std::vector<double> waits;
    for (int k = 0; k < 10000; ++k) waits.push_back(sample_waiting_time(3.0, LearningRateSchedule::constant(0.25), rng));
    const double ks = oracle::ks_exponential(waits, 0.25);
    v.pass = v.pass && ks < 0.02;

    double worst = 0.0;
    std::uniform_real_distribution<double> t0s(0.0, 1.0), us(1e-6, 1.0);
    for (const auto& sched : {LearningRateSchedule::exponential(0.01, 10.0), LearningRateSchedule::reciprocal(100.0, 100.0)}) {
      for (int k = 0; k < 100; ++k) {
        const double t0 = t0s(rng), u = us(rng);
        const double mine = waiting_time_from_uniform(t0, sched, u);
        const double ref = oracle::waiting_time([&](double t) { return sched.eta(t); }, t0, u);
        worst = std::max(worst, std::abs(mine - ref) / ref);
      }
    }
    v.pass = v.pass && worst <= 1e-8;

    const int n_sub = 6, draws = 100000;
    std::vector<int> hits(n_sub, 0);
    int current = 0;
    for (int k = 0; k < draws; ++k) {
      current = next_index(current, n_sub, rng);
      ++hits[static_cast<std::size_t>(current)];
    }
    double dev = 0.0;
    for (int h : hits) dev = std::max(dev, std::abs(static_cast<double>(h) / draws - 1.0 / n_sub));
    v.pass = v.pass && dev <= 0.01;
    v.detail = fmt("KS %.4f (< 0.02), inverse vs quadrature %.2e (<= 1e-8), frequency deviation %.4f (<= 0.01)", ks,
                   worst, dev);
    return v;
  });

  battery.check("subspace_property", 300.0, [&] {
    Verdict v{true, "", {}};
    double worst = 0.0;
    for (const char* fam : kFamilies) {
      for (const char* m : kMethods) {
        const Cell& c = cell(desk(fam, m));
        double cell_worst = 0.0;
        std::size_t jumps = 0;
        for (const auto& r : c.runs) {
          if (!r.ok) {
            v.pass = false;
            v.notes.push_back(c.cfg.name + ": run " + std::to_string(r.run + 1) + " failed: " + r.error);
            continue;
          }
          cell_worst = std::max(cell_worst, r.max_projection_residual / r.max_particle_norm);
          jumps += r.jumps;
        }
        worst = std::max(worst, cell_worst);
        v.notes.push_back(fmt("%-22s %zu runs  %7.2fs  max relative residual %.2e  mean jumps %.3g", c.cfg.name.c_str(),
                              c.runs.size(), c.seconds, cell_worst,
                              static_cast<double>(jumps) / static_cast<double>(c.runs.size())));
      }
    }
    v.pass = v.pass && worst <= 1e-8;
    v.detail = fmt("max relative projection residual %.2e over 9 desk cells (tol 1e-8)", worst);
    return v;
  });

  battery.check("rate_with_vi", 120.0, [&] {
    auto fit_of = [&](const std::string& name, bool squared) {
      const auto recs = records(cell(name));
      const auto series = squared ? mean_square(recs, &TrajectoryRecord::obs_misfit)
                                  : aggregate_runs(recs).get("obs_misfit").mean;
      return rate_slope(recs.front().times, series, 0.2, 1.0, RateAxes::semilogy);
    };
    const auto f = fit_of(desk("vi", "single"), false);
    Verdict v{f.slope <= -2.0 && f.r2 >= 0.95,
              fmt("heat_vi_single_desk mean obs misfit: slope %.3f (<= -2), R^2 %.3f (>= 0.95), %zu points", f.slope,
                  f.r2, f.n),
              {}};
    for (const char* m : kMethods) {
      for (bool sq : {false, true}) {
        const auto g = fit_of(desk("vi", m), sq);
        v.notes.push_back(fmt("info: %-20s %-17s slope %7.3f  R^2 %.3f", desk("vi", m).c_str(),
                              sq ? "mean squared" : "mean", g.slope, g.r2));
      }
    }
    return v;
  });

  battery.check("rate_without_vi", 300.0, [&] {
    Verdict v{true, "", {}};
    std::string parts;
    for (const char* m : kMethods) {
      const auto recs = records(cell(desk("novi", m)));
      const auto agg = aggregate_runs(recs);
      const auto f = rate_slope(agg.times, agg.get("param_error_sq").mean, 1e2, 1e4, RateAxes::loglog);
      v.pass = v.pass && std::abs(f.slope + 1.0) <= 0.3;
      parts += fmt("%s %.3f (R^2 %.3f) ", m, f.slope, f.r2);
    }
    v.detail = "loglog slope of mean squared parameter error on [1e2, 1e4], target -1 +- 0.3: " + parts;
    return v;
  });

  battery.check("subsampling_tracks_eki", 300.0, [&] {
    auto final_error = [&](const char* m) { return aggregate_runs(records(cell(desk("novi", m)))).get("param_error").mean.back(); };
    const double e = final_error("eki"), s = final_error("single"), b = final_error("batch");
    const double rs = s / e, rb = b / e;
    auto within = [](double r) { return r <= 3.0 && r >= 1.0 / 3.0; };
    return Verdict{within(rs) && within(rb),
                   fmt("mean parameter error at t_end: eki %.3e, single %.3e (x%.2f), batch %.3e (x%.2f), bound x3", e,
                       s, rs, b, rb),
                   {}};
  });

  battery.check("eigenvalue_bound", 60.0, [&] {
    const Cell& c = cell(desk("novi", "single"));
    Verdict v{true, "", {}};
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t points = 0;
    for (const auto& rec : records(c)) {
      const auto rep = lambda_min_bound_check(rec, c.data.problem->subsets, 1e-10);
      if (rep.skipped) throw Error("lambda_min(0) is not positive");
      v.pass = v.pass && rep.passed;
      for (double m : rep.margin) min_margin = std::min(min_margin, m);
      points += rep.margin.size();
    }
    v.detail = fmt("single-subsampling TEKI, %zu runs, %zu sample times, min(lambda_min - bound) = %.3e (slack 1e-10)",
                   c.runs.size(), points, min_margin);
    return v;
  });

  battery.check("frozen_gradient_monotonicity", 30.0, [] {
    const auto cfg = preset("heat_novi_batch_desk");
    const auto data = build_campaign_data(cfg);
    Rng rng(derive_seed(cfg.master_seed, 7));
    const Ensemble e0 = draw_initial_ensemble(data.prior, cfg.model.n_ens, rng);
    const std::vector<int> idx{0, 1, 2, 3, 4};
    auto proc = IndexProcess::frozen(idx, static_cast<int>(data.problem->n_sub()));
    FlowSpec spec;
    spec.variant = FlowVariant::teki;
    spec.subsampling = Subsampling::batch;
    spec.problem = data.problem;
    IntegratorConfig ic;
    for (int k = 0; k < 50; ++k) ic.sample_times.push_back(std::pow(10.0, -3.0 + 7.0 * k / 49.0));
    std::vector<std::vector<double>> values(idx.size());
    integrate_flow(spec, e0, &proc, 0.0, 1e4, ic, [&](double, const Ensemble& ens, ObserverEvent ev) {
      if (ev != ObserverEvent::sample) return;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        values[j].push_back(gradient_lyapunov(ens, data.problem->subsets[static_cast<std::size_t>(idx[j])],
                                              static_cast<Eigen::Index>(j)));
      }
    });
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto& v : values) {
      ok = ok && v.size() == 50;
      for (std::size_t k = 1; k < v.size(); ++k) worst = std::max(worst, v[k] - v[k - 1]);
    }
    ok = ok && worst <= 1e-9;
    return Verdict{ok, fmt("5 particles x 50 times on [1e-3, 1e4], max increase %.3e (slack 1e-9), final/initial %.2e",
                           worst, values[0].back() / values[0].front()),
                   {}};
  });

  battery.check("jump_count", 180.0, [] {
    auto cfg = preset("heat_vi_single");
    cfg.n_runs = 1;
    const auto data = build_campaign_data(cfg);
    const auto out = execute_run(cfg, data, 0);
    if (!out.ok) throw Error(out.error);
    const double expected = cfg.schedule.integrated_rate(0.0, cfg.t_end);
    const auto j = static_cast<double>(out.jumps);
    return Verdict{j >= 1e5 && j <= 4e5,
                   fmt("heat_vi_single (d = %td), 1 run: %zu jumps in [1e5, 4e5], expected %.3g, %zu accepted steps",
                       data.problem->dim(), out.jumps, expected, out.stats.accepted),
                   {}};
  });

  battery.check("determinism", 60.0, [&] {
    auto cfg = preset("heat_vi_batch_desk");
    cfg.n_runs = 2;
    cfg.t_end = 0.5;
    std::vector<fs::path> dirs;
    for (int k = 0; k < 2; ++k) {
      cfg.output_dir = (fs::temp_directory_path() / ("eki_acceptance_det_" + std::to_string(k))).string();
      fs::remove_all(cfg.output_dir);
      run_experiment(cfg, {k == 0 ? jobs : 1, true});
      dirs.emplace_back(cfg.output_dir);
    }
    bool same = true;
    std::size_t bytes = 0;
    for (const char* f : {"run_001.csv", "run_002.csv", "aggregate.csv"}) {
      const auto a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
      same = same && !a.empty() && a == b;
      bytes += a.size();
    }
    return Verdict{same, fmt("two heat_vi_batch_desk campaigns (t_end 0.5, 2 runs): %s, %zu bytes compared",
                             same ? "byte-identical" : "DIFFER", bytes),
                   {}};
  });

  std::printf("%d of %d criteria passed\n", battery.count() - battery.failures(), battery.count());
  return battery.failures() == 0 ? 0 : 1;
}
