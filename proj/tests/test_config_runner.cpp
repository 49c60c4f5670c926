#include "eki/config.hpp"
#include "eki/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace eki;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eki_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({"model": {"h": 0.1, "T": 0.1}, "method": "single_subsampling",
                           "flow": {"variant": "teki_vi"}, "t_end": 0.5})";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal JSON fills defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.method == Method::single_subsampling);
  CHECK(c.variant == FlowVariant::teki_vi);
  CHECK(c.model.heat.h == 0.1);
  CHECK(c.model.heat.dt == 0.05);
  CHECK(c.alpha == 10.0);
  CHECK(c.t_end == 0.5);
  CHECK(c.model.n_ens == 5);
}

TEST_CASE("JSON round-trip of every preset") {
  for (const auto& name : list_presets()) {
    const auto c = preset(name);
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK_NOTHROW(c.validate());
  }
}

TEST_CASE("errors name the key path") {
  CHECK(error_of(R"({"model": {}, "method": "eki_full", "flow": {"variant": "teki"}})").find("t_end") != std::string::npos);
  CHECK(error_of(R"({"model": {}, "method": "eki_full", "flow": {"variant": "teki"}, "t_end": "x"})").find("t_end") !=
        std::string::npos);
  CHECK(error_of(R"({"model": {}, "method": "eki_full", "flow": {"variant": "teki", "alfa": 1}, "t_end": 1})")
            .find("flow.alfa") != std::string::npos);
  CHECK(error_of(R"({"method": "eki_full", "flow": {"variant": "teki"}, "t_end": 1, "model": {"prior": {"n_terms": 1.5}}})")
            .find("model.prior.n_terms") != std::string::npos);
  CHECK(error_of(R"({"model": {}, "method": "nope", "flow": {"variant": "teki"}, "t_end": 1})").find("method") !=
        std::string::npos);
  CHECK(error_of(R"({"model": {}, "method": "eki_full", "flow": {"variant": "teki"}, "t_end": 1,
                     "schedule": {"kind": "piecewise", "decay": {"kind": "piecewise"}, "t_switch": 1, "step": 1}})")
            .find("schedule.decay") != std::string::npos);
  CHECK(error_of("{ not json").find("byte") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/eki.json"), ConfigError);
}

TEST_CASE("semantic validation") {
  auto bad = [](auto mutate) {
    auto c = preset("tiny");
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.model.n_ens = 1; });
  bad([](ExperimentConfig& c) { c.model.n_ens = 20; });
  bad([](ExperimentConfig& c) { c.alpha = 0.0; });
  bad([](ExperimentConfig& c) { c.t_end = -1.0; });
  bad([](ExperimentConfig& c) { c.n_runs = 0; });
  bad([](ExperimentConfig& c) { c.sample_t_min = 2.0; });
  bad([](ExperimentConfig& c) { c.model.noise_std = 0.0; });
  bad([](ExperimentConfig& c) { c.model.prior.n_terms = 2; });
  bad([](ExperimentConfig& c) {
    c.variant = FlowVariant::teki_vi;
    c.alpha_vi = 0.0;
  });
  bad([](ExperimentConfig& c) {
    c.model.heat.T = 0.05;
    c.method = Method::single_subsampling;
  });
}

TEST_CASE("preset catalogue") {
  const auto names = list_presets();
  CHECK(names.size() == 19);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  for (const char* fam : {"vi", "dimvi", "novi"}) {
    for (const char* m : {"eki", "single", "batch"}) {
      const std::string base = std::string("heat_") + fam + "_" + m;
      CHECK(is_preset(base));
      CHECK(is_preset(base + "_desk"));
    }
  }
  CHECK_FALSE(is_preset("heat_vi"));
  CHECK_THROWS_AS(preset("heat_vi"), ConfigError);

  const auto full = preset("heat_vi_single");
  CHECK(full.model.heat.h == 0.01);
  CHECK(full.model.heat.dt == 0.05);
  CHECK(full.model.heat.T == 0.3);
  CHECK(full.model.n_ens == 5);
  CHECK(full.alpha == 10.0);
  CHECK(full.alpha_vi == 0.01);
  CHECK(full.n_runs == 32);
  CHECK(full.t_end == 1.0);
  CHECK(full.schedule.kind == LearningRateSchedule::Kind::exponential);
  CHECK(preset("heat_dimvi_batch").variant == FlowVariant::teki_dim_vi);
  const auto novi = preset("heat_novi_eki");
  CHECK(novi.variant == FlowVariant::teki);
  CHECK(novi.t_end == 1e6);
  CHECK(novi.schedule.kind == LearningRateSchedule::Kind::piecewise);
  const auto desk = preset("heat_novi_batch_desk");
  CHECK(desk.model.heat.h == 0.02);
  CHECK(desk.n_runs == 8);
  CHECK(desk.t_end == 1e4);
}

TEST_CASE("sample times are log-spaced after zero") {
  auto c = preset("tiny");
  const auto t = c.sample_times();
  REQUIRE(t.size() == 21);
  CHECK(t.front() == 0.0);
  CHECK(t[1] == doctest::Approx(c.sample_t_min));
  CHECK(t.back() == c.t_end);
  for (std::size_t k = 2; k + 1 < t.size(); ++k) {
    CHECK(t[k + 1] / t[k] == doctest::Approx(t[k] / t[k - 1]));
  }
  CHECK(c.integrator().sample_times == t);
}

}

TEST_SUITE("runner") {

TEST_CASE("derived seeds") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  std::set<std::uint64_t> seen;
  for (int r = 0; r < 1000; ++r) seen.insert(run_seed(42, r));
  CHECK(seen.size() == 1000);
  CHECK(version_string().rfind("eki ", 0) == 0);
}

TEST_CASE("tiny campaign writes manifest, run and aggregate files") {
  auto c = preset("tiny");
  c.output_dir = scratch("tiny").string();
  const auto res = run_experiment(c);
  REQUIRE(res.all_ok());
  CHECK(fs::exists(res.dir / "manifest.json"));
  CHECK(fs::exists(res.dir / "run_001.csv"));
  CHECK(fs::exists(res.dir / "aggregate.csv"));

  const auto m = nlohmann::json::parse(slurp(res.dir / "manifest.json"));
  CHECK(m["version"] == version_string());
  CHECK(m["dimension"] == 9);
  CHECK(m["n_obs"] == 18);
  CHECK(m["n_sub"] == 2);
  CHECK(m["runs"].size() == 1);
  CHECK(m["runs"][0]["status"] == "ok");
  CHECK(m["runs"][0]["seed"] == run_seed(c.master_seed, 0));
  CHECK(config_from_json(m["config"]).name == "tiny");

  SUBCASE("a single run aggregates to itself with zero spread") {
    const auto agg = aggregate(res.dir);
    CHECK(agg.n_runs == 1);
    const auto& rec = res.runs[0].record;
    const auto& pe = agg.get("param_error");
    for (std::size_t k = 0; k < agg.times.size(); ++k) {
      CHECK(pe.mean[k] == doctest::Approx(rec.param_error.row(static_cast<Eigen::Index>(k)).mean()).epsilon(1e-14));
      CHECK(pe.std[k] == 0.0);
    }
  }
  SUBCASE("the run stays in its initial affine frame") {
    CHECK(res.runs[0].max_projection_residual <= 1e-8 * res.runs[0].max_particle_norm);
  }
}

TEST_CASE("campaigns are reproducible byte for byte") {
  auto c = preset("tiny");
  c.method = Method::batch_subsampling;
  c.n_runs = 3;
  c.output_dir = scratch("det_a").string();
  run_experiment(c, {3, true});
  c.output_dir = scratch("det_b").string();
  run_experiment(c, {1, true});
  for (const char* f : {"run_001.csv", "run_002.csv", "run_003.csv", "aggregate.csv"}) {
    CHECK(slurp(fs::temp_directory_path() / "eki_test_det_a" / f) == slurp(fs::temp_directory_path() / "eki_test_det_b" / f));
  }
}

TEST_CASE("aggregate row count is times times series") {
  auto c = preset("tiny");
  c.n_runs = 32;
  c.output_dir = scratch("many").string();
  const auto res = run_experiment(c, {4, true});
  REQUIRE(res.aggregate);
  std::ifstream in(res.dir / "aggregate.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines - 1 == c.sample_times().size() * res.aggregate->series.size());
  CHECK(res.aggregate->n_runs == 32);
}

TEST_CASE("failing runs are recorded and leave no aggregate") {
  auto c = preset("tiny");
  c.model.prior.sigma2 = 0.0;
  c.n_runs = 2;
  c.output_dir = scratch("fail").string();
  const auto res = run_experiment(c);
  CHECK_FALSE(res.all_ok());
  CHECK_FALSE(res.aggregate);
  CHECK_FALSE(fs::exists(res.dir / "aggregate.csv"));
  const auto m = nlohmann::json::parse(slurp(res.dir / "manifest.json"));
  for (const auto& r : m["runs"]) {
    CHECK(r["status"] == "failed");
    CHECK_FALSE(r["error"].get<std::string>().empty());
  }
}

TEST_CASE("aggregate of a missing or empty directory") {
  CHECK_THROWS(aggregate(scratch("missing")));
  const auto empty = scratch("empty");
  fs::create_directories(empty);
  CHECK_THROWS(aggregate(empty));
  std::ofstream(empty / "run_001.csv") << "garbage\n";
  try {
    aggregate(empty);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("run_001.csv") != std::string::npos);
  }
}

}
