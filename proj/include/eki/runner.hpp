#pragma once

#include "eki/config.hpp"
#include "eki/diagnostics.hpp"
#include "eki/reference.hpp"
#include "eki/regularization.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace eki {

/// 64-bit mix of (seed, stream) used for every derived seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seed of run r (0-based) of a campaign.
std::uint64_t run_seed(std::uint64_t master_seed, int run);

/// Synthetic data shared by every run of a campaign.
struct CampaignData {
  Matrix A;                 // forward operator (unwhitened)
  Vector forcing_true;      // forcing behind the data
  LinearProblem whitened;
  DataPartition partition;
  std::shared_ptr<const SubsampledProblem> problem;
  KLBasis prior;
};

CampaignData build_campaign_data(const ExperimentConfig& cfg);

struct RunOutcome {
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TrajectoryRecord record;
  Vector theta_star;
  std::size_t jumps = 0;
  IntegrationStats stats;
  double max_projection_residual = 0.0;
  double max_particle_norm = 0.0;
};

/// Executes one run in memory.
RunOutcome execute_run(const ExperimentConfig& cfg, const CampaignData& data, int run);

struct RunOptions {
  int jobs = 1;
  bool write_files = true;
};

struct CampaignResult {
  std::filesystem::path dir;
  std::vector<RunOutcome> runs;
  std::optional<Aggregate> aggregate;  // absent when every run failed
  bool all_ok() const;
};

/// Runs the campaign into cfg.output_dir: run_XXX.csv per run, aggregate.csv
/// and manifest.json. A failing run is recorded in the manifest and the
/// remaining runs continue.
CampaignResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Re-aggregates the run CSVs of a campaign directory into aggregate.csv.
Aggregate aggregate(const std::filesystem::path& campaign_dir);

std::string version_string();

}  // namespace eki
