#include "eki/runner.hpp"
#include "eki/integrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#ifndef EKI_VERSION
#define EKI_VERSION "0.1.0"
#endif

namespace eki {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kEnsembleStream = 1;
constexpr std::uint64_t kIndexStream = 2;

std::string run_file_name(int run) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03d.csv", run + 1);
  return buf;
}

KLFieldSpec field_spec(const FieldConfig& f, const Vector& grid) {
  KLFieldSpec s;
  s.sigma2 = f.sigma2;
  s.L_sc = f.L_sc;
  s.n_terms = f.n_terms;
  s.grid = grid;
  return s;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t run_seed(std::uint64_t master_seed, int run) {
  return derive_seed(master_seed, 0x1000 + static_cast<std::uint64_t>(run));
}

std::string version_string() { return std::string("eki ") + EKI_VERSION; }

CampaignData build_campaign_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const HeatConfig& heat = cfg.model.heat;
  const Vector grid = heat.grid();
  Matrix A = assemble_forward(heat);
  DataPartition part = partition_by_timestep(A, heat);

  Rng rng(derive_seed(cfg.master_seed, kDataStream));
  const KLBasis truth = kl_basis(field_spec(cfg.model.truth, grid));
  Vector forcing = sample_kl_field(truth, rng);
  std::normal_distribution<double> normal;
  Vector noise(A.rows());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = cfg.model.noise_std * normal(rng);

  LinearProblem raw;
  raw.A = A;
  raw.y = A * forcing + noise;
  raw.gamma = cfg.model.noise_std * cfg.model.noise_std * Matrix::Identity(A.rows(), A.rows());
  raw.theta_true = forcing;
  LinearProblem whitened = whiten(raw, part);

  const Eigen::Index d = A.cols();
  auto problem = std::make_shared<const SubsampledProblem>(
      make_subsampled_problem(whitened, part, cfg.alpha, Matrix::Identity(d, d)));

  return CampaignData{std::move(A),        std::move(forcing),
                      std::move(whitened), std::move(part),
                      std::move(problem),  kl_basis(field_spec(cfg.model.prior, grid))};
}

RunOutcome execute_run(const ExperimentConfig& cfg, const CampaignData& data, int run) {
  RunOutcome out;
  out.run = run;
  out.seed = run_seed(cfg.master_seed, run);
  try {
    Rng ens_rng(derive_seed(out.seed, kEnsembleStream));
    const Ensemble ens0 = draw_initial_ensemble(data.prior, cfg.model.n_ens, ens_rng);
    const SubspaceFrame frame = build_frame(ens0);
    out.theta_star = constrained_tikhonov(frame, data.problem->full).theta_star;

    FlowSpec spec;
    spec.variant = cfg.variant;
    spec.subsampling = subsampling_of(cfg.method);
    spec.problem = data.problem;
    if (spec.variant == FlowVariant::teki_vi || spec.variant == FlowVariant::teki_dim_vi) {
      spec.alpha_vi = cfg.alpha_vi;
      // identity on the span of the initial ensemble
      spec.C_vi = frame.E * frame.E.transpose();
    }

    std::optional<IndexProcess> proc;
    if (spec.subsampling != Subsampling::none) {
      const int coords = spec.subsampling == Subsampling::single ? 1 : cfg.model.n_ens;
      proc.emplace(coords, static_cast<int>(data.problem->n_sub()), cfg.schedule,
                   derive_seed(out.seed, kIndexStream));
    }

    TrajectoryRecorder recorder(frame, out.theta_star, data.problem->full);
    double max_norm = 0.0;
    auto observer = [&](double t, const Ensemble& ens, ObserverEvent ev) {
      if (ev != ObserverEvent::sample) return;
      recorder.record(t, ens, proc ? proc->jump_count() : 0);
      max_norm = std::max(max_norm, ens.particles.colwise().norm().maxCoeff());
    };
    FlowResult res = integrate_flow(spec, ens0, proc ? &*proc : nullptr, 0.0, cfg.t_end, cfg.integrator(), observer);

    out.record = recorder.snapshot();
    out.stats = std::move(res.stats);
    out.jumps = proc ? proc->jump_count() : 0;
    out.max_particle_norm = max_norm;
    for (double r : out.record.projection_residual) out.max_projection_residual = std::max(out.max_projection_residual, r);
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

bool CampaignResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

namespace {

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, const CampaignData& data,
                    const std::vector<RunOutcome>& runs) {
  nlohmann::json m;
  m["version"] = version_string();
  m["config"] = to_json(cfg);
  m["data_seed"] = derive_seed(cfg.master_seed, kDataStream);
  m["dimension"] = data.problem->dim();
  m["n_obs"] = data.whitened.y.size();
  m["n_sub"] = data.problem->n_sub();
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json e{{"run", r.run + 1}, {"seed", r.seed}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
      e["file"] = run_file_name(r.run);
      e["jumps"] = r.jumps;
      e["accepted_steps"] = r.stats.accepted;
      e["rejected_steps"] = r.stats.rejected;
      e["rhs_evaluations"] = r.stats.rhs_evals;
      e["max_projection_residual"] = r.max_projection_residual;
    } else {
      e["error"] = r.error;
    }
    list.push_back(e);
  }
  m["runs"] = list;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace

CampaignResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const CampaignData data = build_campaign_data(cfg);
  CampaignResult result;
  result.dir = cfg.output_dir;
  if (opts.write_files) std::filesystem::create_directories(result.dir);
  result.runs.resize(static_cast<std::size_t>(cfg.n_runs));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < cfg.n_runs; r = next++) {
      RunOutcome out = execute_run(cfg, data, r);
      if (out.ok && opts.write_files) {
        std::ofstream f(result.dir / run_file_name(r));
        write_run_csv(f, out.record);
      }
      result.runs[static_cast<std::size_t>(r)] = std::move(out);
    }
  };
  const int jobs = std::clamp(opts.jobs, 1, cfg.n_runs);
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<TrajectoryRecord> good;
  for (const auto& r : result.runs) {
    if (r.ok) good.push_back(r.record);
  }
  if (!good.empty()) result.aggregate = aggregate_runs(good);
  if (opts.write_files) {
    if (result.aggregate) {
      std::ofstream f(result.dir / "aggregate.csv");
      write_aggregate_csv(f, *result.aggregate);
    }
    write_manifest(result.dir, cfg, data, result.runs);
  }
  return result;
}

Aggregate aggregate(const std::filesystem::path& campaign_dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(campaign_dir)) throw Error(campaign_dir.string() + " is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(campaign_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no run csv files in " + campaign_dir.string());
  std::vector<TrajectoryRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      records.push_back(read_run_csv(in));
    } catch (const std::exception& e) {
      throw Error(f.string() + ": " + e.what());
    }
  }
  Aggregate agg;
  try {
    agg = aggregate_runs(records);
  } catch (const std::exception& e) {
    throw Error(campaign_dir.string() + ": " + e.what());
  }
  std::ofstream out(campaign_dir / "aggregate.csv");
  write_aggregate_csv(out, agg);
  return agg;
}

}  // namespace eki
