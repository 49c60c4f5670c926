#include "eki/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace eki {

using nlohmann::json;

const char* to_string(Method m) {
  switch (m) {
    case Method::eki_full:
      return "eki_full";
    case Method::single_subsampling:
      return "single_subsampling";
    case Method::batch_subsampling:
      return "batch_subsampling";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::eki_full, Method::single_subsampling, Method::batch_subsampling}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

Subsampling subsampling_of(Method m) {
  switch (m) {
    case Method::eki_full:
      return Subsampling::none;
    case Method::single_subsampling:
      return Subsampling::single;
    case Method::batch_subsampling:
      return Subsampling::batch;
  }
  return Subsampling::none;
}

void ExperimentConfig::validate() const {
  model.heat.validate();
  const int d = model.heat.n_interior();
  if (model.n_ens < 2) throw ConfigError("model.n_ens must be >= 2");
  if (model.n_ens - 1 > d) throw ConfigError("model.n_ens - 1 exceeds the parameter dimension");
  for (const FieldConfig* f : {&model.prior, &model.truth}) {
    if (!(f->sigma2 >= 0.0) || !(f->L_sc > 0.0) || f->n_terms < 1 || f->n_terms > d) {
      throw ConfigError("field needs sigma2 >= 0, L_sc > 0 and 1 <= n_terms <= interior nodes");
    }
  }
  if (model.prior.n_terms < model.n_ens - 1) {
    throw ConfigError("model.prior.n_terms must be >= n_ens - 1 for a non-degenerate ensemble");
  }
  if (!(model.noise_std > 0.0)) throw ConfigError("model.noise_std must be positive");
  if (model.heat.n_steps() < 2 && method != Method::eki_full) {
    throw ConfigError("subsampling needs at least two observed time steps");
  }
  if (!(alpha > 0.0)) throw ConfigError("flow.alpha must be positive");
  if ((variant == FlowVariant::teki_vi || variant == FlowVariant::teki_dim_vi) && !(alpha_vi > 0.0)) {
    throw ConfigError("flow.alpha_vi must be positive for inflated variants");
  }
  schedule.validate();
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
  if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (sample_count < 2) throw ConfigError("sampling.count must be >= 2");
  if (!(sample_t_min > 0.0) || !(sample_t_min < t_end)) throw ConfigError("sampling.t_min must lie in (0, t_end)");
  integrator().validate();
}

std::vector<double> ExperimentConfig::sample_times() const {
  std::vector<double> t{0.0};
  const double lo = std::log(sample_t_min);
  const double hi = std::log(t_end);
  for (int k = 0; k < sample_count; ++k) {
    const double v = k + 1 == sample_count ? t_end : std::exp(lo + (hi - lo) * k / (sample_count - 1));
    if (v > t.back()) t.push_back(v);
  }
  return t;
}

IntegratorConfig ExperimentConfig::integrator() const {
  IntegratorConfig c;
  c.rtol = rtol;
  c.atol = atol;
  c.h_init = h_init;
  c.h_max = h_max > 0.0 ? h_max : std::numeric_limits<double>::infinity();
  c.sample_times = sample_times();
  return c;
}

namespace {

json field_json(const FieldConfig& f) {
  return {{"sigma2", f.sigma2}, {"L_sc", f.L_sc}, {"n_terms", f.n_terms}};
}

json schedule_json(const LearningRateSchedule& s) {
  using K = LearningRateSchedule::Kind;
  auto law = [](K kind, const LearningRateSchedule& p) {
    json j{{"kind", to_string(kind)}};
    if (kind == K::constant) {
      j["c"] = p.c;
    } else {
      j["a"] = p.a;
      j["b"] = p.b;
    }
    return j;
  };
  if (s.kind != K::piecewise) return law(s.kind, s);
  return {{"kind", "piecewise"}, {"decay", law(s.decay, s)}, {"t_switch", s.t_switch}, {"step", s.step}};
}

// Reads a JSON object against a fixed key set, reporting errors by path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  // Rejects keys that were never asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(key(it.key()), "unknown key");
    }
  }

  template <typename T>
  void get(const std::string& k, T& out, bool required = false) {
    seen_.insert(k);
    auto it = j_.find(k);
    if (it == j_.end()) {
      if (required) fail(key(k), "missing required key");
      return;
    }
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) fail(key(k), "expected a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) fail(key(k), "expected an integer");
      } else {
        if (!it->is_number()) fail(key(k), "expected a number");
      }
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(key(k), e.what());
    }
  }

  const json* child(const std::string& k, bool required = false) {
    seen_.insert(k);
    auto it = j_.find(k);
    if (it == j_.end()) {
      if (required) fail(key(k), "missing required key");
      return nullptr;
    }
    return &*it;
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

FieldConfig read_field(const json& j, const std::string& path, FieldConfig f) {
  Reader r(j, path);
  r.get("sigma2", f.sigma2);
  r.get("L_sc", f.L_sc);
  r.get("n_terms", f.n_terms);
  r.finish();
  return f;
}

LearningRateSchedule read_law(const json& j, const std::string& path) {
  Reader r(j, path);
  std::string kind;
  r.get("kind", kind, true);
  LearningRateSchedule s;
  try {
    s.kind = schedule_kind_from_string(kind);
  } catch (const ConfigError& e) {
    Reader::fail(r.key("kind"), e.what());
  }
  if (s.kind == LearningRateSchedule::Kind::piecewise) {
    const json* decay = r.child("decay", true);
    LearningRateSchedule law = read_law(*decay, r.key("decay"));
    if (law.kind == LearningRateSchedule::Kind::piecewise) Reader::fail(r.key("decay"), "cannot nest piecewise");
    double t_switch = 0.0;
    double step = 0.0;
    r.get("t_switch", t_switch, true);
    r.get("step", step, true);
    r.finish();
    try {
      return LearningRateSchedule::piecewise(law, t_switch, step);
    } catch (const ConfigError& e) {
      Reader::fail(path, e.what());
    }
  }
  if (s.kind == LearningRateSchedule::Kind::constant) {
    r.get("c", s.c, true);
  } else {
    r.get("a", s.a, true);
    r.get("b", s.b, true);
  }
  r.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    Reader::fail(path, e.what());
  }
  return s;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json model{{"h", c.model.heat.h},
             {"dt", c.model.heat.dt},
             {"T", c.model.heat.T},
             {"obs_per_step", c.model.heat.obs_per_step},
             {"noise_std", c.model.noise_std},
             {"prior", field_json(c.model.prior)},
             {"truth", field_json(c.model.truth)},
             {"n_ens", c.model.n_ens}};
  return {{"name", c.name},
          {"model", model},
          {"method", to_string(c.method)},
          {"flow", {{"variant", to_string(c.variant)}, {"alpha", c.alpha}, {"alpha_vi", c.alpha_vi}}},
          {"schedule", schedule_json(c.schedule)},
          {"t_end", c.t_end},
          {"n_runs", c.n_runs},
          {"master_seed", c.master_seed},
          {"sampling", {{"count", c.sample_count}, {"t_min", c.sample_t_min}}},
          {"integrator", {{"rtol", c.rtol}, {"atol", c.atol}, {"h_init", c.h_init}, {"h_max", c.h_max}}},
          {"output_dir", c.output_dir}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  {
    Reader r(j, "");
    r.get("name", c.name);
    if (const json* m = r.child("model", true)) {
      Reader rm(*m, "model");
      rm.get("h", c.model.heat.h);
      rm.get("dt", c.model.heat.dt);
      rm.get("T", c.model.heat.T);
      rm.get("obs_per_step", c.model.heat.obs_per_step);
      rm.get("noise_std", c.model.noise_std);
      rm.get("n_ens", c.model.n_ens);
      if (const json* p = rm.child("prior")) c.model.prior = read_field(*p, "model.prior", c.model.prior);
      if (const json* p = rm.child("truth")) c.model.truth = read_field(*p, "model.truth", c.model.truth);
      rm.finish();
    }
    std::string method;
    r.get("method", method, true);
    try {
      c.method = method_from_string(method);
    } catch (const ConfigError& e) {
      Reader::fail("method", e.what());
    }
    if (const json* f = r.child("flow", true)) {
      Reader rf(*f, "flow");
      std::string variant;
      rf.get("variant", variant, true);
      try {
        c.variant = flow_variant_from_string(variant);
      } catch (const ConfigError& e) {
        Reader::fail("flow.variant", e.what());
      }
      rf.get("alpha", c.alpha);
      rf.get("alpha_vi", c.alpha_vi);
      rf.finish();
    }
    if (const json* s = r.child("schedule")) c.schedule = read_law(*s, "schedule");
    r.get("t_end", c.t_end, true);
    r.get("n_runs", c.n_runs);
    r.get("master_seed", c.master_seed);
    if (const json* s = r.child("sampling")) {
      Reader rs(*s, "sampling");
      rs.get("count", c.sample_count);
      rs.get("t_min", c.sample_t_min);
      rs.finish();
    }
    if (const json* s = r.child("integrator")) {
      Reader ri(*s, "integrator");
      ri.get("rtol", c.rtol);
      ri.get("atol", c.atol);
      ri.get("h_init", c.h_init);
      ri.get("h_max", c.h_max);
      ri.finish();
    }
    r.get("output_dir", c.output_dir);
    r.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

struct Family {
  const char* key;
  FlowVariant variant;
};

constexpr Family kFamilies[] = {
    {"vi", FlowVariant::teki_vi}, {"dimvi", FlowVariant::teki_dim_vi}, {"novi", FlowVariant::teki}};

struct MethodName {
  const char* key;
  Method method;
};

constexpr MethodName kMethods[] = {
    {"eki", Method::eki_full}, {"single", Method::single_subsampling}, {"batch", Method::batch_subsampling}};

constexpr double kNoviSwitchTime = 10.0;
constexpr double kNoviEquidistantJumps = 1e5;

ExperimentConfig family_preset(const Family& fam, const MethodName& m, bool desk) {
  ExperimentConfig c;
  c.name = std::string("heat_") + fam.key + "_" + m.key + (desk ? "_desk" : "");
  c.output_dir = "runs/" + c.name;
  c.model.heat = {desk ? 0.02 : 0.01, 0.05, 0.3, 0};
  c.model.noise_std = 0.1;
  c.model.prior = {10.0, 0.1, 8};
  c.model.truth = {10.0, 0.1, 8};
  c.model.n_ens = 5;
  c.method = m.method;
  c.variant = fam.variant;
  c.alpha = 10.0;
  c.alpha_vi = 0.01;
  c.n_runs = desk ? 8 : 32;
  c.master_seed = 20240611;
  c.sample_count = 200;
  if (fam.variant == FlowVariant::teki) {
    c.t_end = desk ? 1e4 : 1e6;
    c.schedule = LearningRateSchedule::piecewise(LearningRateSchedule::reciprocal(100.0, 100.0), kNoviSwitchTime,
                                                 (c.t_end - kNoviSwitchTime) / kNoviEquidistantJumps);
    c.sample_t_min = 1e-2;
  } else {
    c.t_end = 1.0;
    c.schedule = LearningRateSchedule::exponential(0.01, 10.0);
    c.sample_t_min = 1e-3;
  }
  return c;
}

ExperimentConfig tiny_preset() {
  ExperimentConfig c;
  c.name = "tiny";
  c.output_dir = "runs/tiny";
  c.model.heat = {0.1, 0.05, 0.1, 0};
  c.model.prior = {10.0, 0.1, 8};
  c.model.truth = {10.0, 0.1, 8};
  c.model.n_ens = 5;
  c.method = Method::eki_full;
  c.variant = FlowVariant::teki;
  c.schedule = LearningRateSchedule::constant(0.1);
  c.t_end = 1.0;
  c.n_runs = 1;
  c.master_seed = 7;
  c.sample_count = 20;
  c.sample_t_min = 1e-2;
  return c;
}

}  // namespace

std::vector<std::string> list_presets() {
  std::vector<std::string> names;
  for (bool desk : {false, true}) {
    for (const auto& fam : kFamilies) {
      for (const auto& m : kMethods) names.push_back(family_preset(fam, m, desk).name);
    }
  }
  names.emplace_back("tiny");
  return names;
}

ExperimentConfig preset(const std::string& name) {
  if (name == "tiny") return tiny_preset();
  for (bool desk : {false, true}) {
    for (const auto& fam : kFamilies) {
      for (const auto& m : kMethods) {
        ExperimentConfig c = family_preset(fam, m, desk);
        if (c.name == name) return c;
      }
    }
  }
  throw ConfigError("unknown preset '" + name + "'");
}

bool is_preset(const std::string& name) {
  for (const auto& n : list_presets()) {
    if (n == name) return true;
  }
  return false;
}

}  // namespace eki
