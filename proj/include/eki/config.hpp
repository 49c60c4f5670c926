#pragma once

#include "eki/dynamics.hpp"
#include "eki/heat_model.hpp"
#include "eki/index_process.hpp"
#include "eki/integrator.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eki {

enum class Method { eki_full, single_subsampling, batch_subsampling };

const char* to_string(Method m);
Method method_from_string(const std::string& name);
Subsampling subsampling_of(Method m);

struct FieldConfig {
  double sigma2 = 10.0;
  double L_sc = 0.1;
  int n_terms = 8;
};

struct ModelConfig {
  HeatConfig heat;
  double noise_std = 0.1;
  FieldConfig prior;  // initial ensemble
  FieldConfig truth;  // synthetic forcing behind the data
  int n_ens = 5;
};

/// One campaign: n_runs independent repetitions of a single method/flow
/// combination on fixed synthetic data.
struct ExperimentConfig {
  std::string name = "experiment";
  ModelConfig model;
  Method method = Method::eki_full;
  FlowVariant variant = FlowVariant::teki;
  double alpha = 10.0;
  double alpha_vi = 0.01;
  LearningRateSchedule schedule = LearningRateSchedule::exponential(0.01, 10.0);
  double t_end = 1.0;
  int n_runs = 1;
  std::uint64_t master_seed = 1;
  int sample_count = 200;  // log-spaced samples in [sample_t_min, t_end], plus t = 0
  double sample_t_min = 1e-3;
  double rtol = 1e-6;
  double atol = 1e-9;
  double h_init = 1e-4;
  double h_max = 0.0;  // 0 means unbounded
  std::string output_dir = "runs/experiment";

  void validate() const;
  std::vector<double> sample_times() const;
  IntegratorConfig integrator() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Throws ConfigError naming the offending key path.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Parse errors report the byte position.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

std::vector<std::string> list_presets();
ExperimentConfig preset(const std::string& name);
bool is_preset(const std::string& name);

}  // namespace eki
