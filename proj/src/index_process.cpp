#include "eki/index_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace eki {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Waiting time of a non-piecewise law given the exponential variate e = -log(u).
double decay_wait(double t0, LearningRateSchedule::Kind kind, double c, double a, double b, double e) {
  switch (kind) {
    case LearningRateSchedule::Kind::constant:
      return c * e;
    case LearningRateSchedule::Kind::exponential:
      // (e^{b t0} / (a b)) (e^{b D} - 1) = e
      return std::log1p(a * b * e * std::exp(-b * t0)) / b;
    case LearningRateSchedule::Kind::reciprocal: {
      // r D + a D^2 / 2 = e with r = a t0 + b, written without cancellation
      const double r = a * t0 + b;
      return 2.0 * e / (r + std::sqrt(r * r + 2.0 * a * e));
    }
    case LearningRateSchedule::Kind::piecewise:
      break;
  }
  return kInf;
}

double next_grid_point(double t0, double t_switch, double step) {
  double k = std::max(1.0, std::floor((t0 - t_switch) / step) + 1.0);
  while (t_switch + k * step <= t0) k += 1.0;
  return t_switch + k * step;
}

// Absolute time of the next switch after t0.
double next_event_time(double t0, const LearningRateSchedule& s, double u) {
  const double e = -std::log(u);
  if (s.kind != LearningRateSchedule::Kind::piecewise) {
    return t0 + decay_wait(t0, s.kind, s.c, s.a, s.b, e);
  }
  if (t0 < s.t_switch) {
    const double t = t0 + decay_wait(t0, s.decay, s.c, s.a, s.b, e);
    if (t < s.t_switch) return t;
  }
  return next_grid_point(t0, s.t_switch, s.step);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("learning-rate parameter ") + what + " must be positive and finite");
  }
}

}  // namespace

double uniform_open_left(Rng& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

LearningRateSchedule LearningRateSchedule::constant(double c) {
  LearningRateSchedule s;
  s.kind = Kind::constant;
  s.c = c;
  s.validate();
  return s;
}

LearningRateSchedule LearningRateSchedule::exponential(double a, double b) {
  LearningRateSchedule s;
  s.kind = Kind::exponential;
  s.a = a;
  s.b = b;
  s.validate();
  return s;
}

LearningRateSchedule LearningRateSchedule::reciprocal(double a, double b) {
  LearningRateSchedule s;
  s.kind = Kind::reciprocal;
  s.a = a;
  s.b = b;
  s.validate();
  return s;
}

LearningRateSchedule LearningRateSchedule::piecewise(LearningRateSchedule decaying, double t_switch, double step) {
  LearningRateSchedule s = decaying;
  s.kind = Kind::piecewise;
  s.decay = decaying.kind;
  s.t_switch = t_switch;
  s.step = step;
  s.validate();
  return s;
}

void LearningRateSchedule::validate() const {
  const Kind law = kind == Kind::piecewise ? decay : kind;
  switch (law) {
    case Kind::constant:
      require_positive(c, "c");
      break;
    case Kind::exponential:
    case Kind::reciprocal:
      require_positive(a, "a");
      require_positive(b, "b");
      break;
    case Kind::piecewise:
      throw ConfigError("a piecewise schedule needs a constant, exponential or reciprocal decaying phase");
  }
  if (kind == Kind::piecewise) {
    if (!(t_switch >= 0.0) || !std::isfinite(t_switch)) throw ConfigError("t_switch must be >= 0");
    require_positive(step, "step");
  }
}

double LearningRateSchedule::eta(double t) const {
  const Kind law = kind == Kind::piecewise ? (t < t_switch ? decay : Kind::piecewise) : kind;
  switch (law) {
    case Kind::constant:
      return c;
    case Kind::exponential:
      return a * std::exp(-b * t);
    case Kind::reciprocal:
      return 1.0 / (a * t + b);
    case Kind::piecewise:
      return step;
  }
  return c;
}

double LearningRateSchedule::integrated_rate(double t0, double t1) const {
  const Kind law = kind == Kind::piecewise ? decay : kind;
  if (kind == Kind::piecewise) t1 = std::min(t1, t_switch);
  if (t1 <= t0) return 0.0;
  switch (law) {
    case Kind::constant:
      return (t1 - t0) / c;
    case Kind::exponential:
      return (std::exp(b * t1) - std::exp(b * t0)) / (a * b);
    case Kind::reciprocal:
      return 0.5 * a * (t1 * t1 - t0 * t0) + b * (t1 - t0);
    case Kind::piecewise:
      break;
  }
  return 0.0;
}

const char* to_string(LearningRateSchedule::Kind kind) {
  switch (kind) {
    case LearningRateSchedule::Kind::constant:
      return "constant";
    case LearningRateSchedule::Kind::exponential:
      return "exponential";
    case LearningRateSchedule::Kind::reciprocal:
      return "reciprocal";
    case LearningRateSchedule::Kind::piecewise:
      return "piecewise";
  }
  return "?";
}

LearningRateSchedule::Kind schedule_kind_from_string(const std::string& name) {
  using K = LearningRateSchedule::Kind;
  for (K k : {K::constant, K::exponential, K::reciprocal, K::piecewise}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown learning-rate kind '" + name + "'");
}

double waiting_time_from_uniform(double t0, const LearningRateSchedule& sched, double u) {
  return next_event_time(t0, sched, u) - t0;
}

double sample_waiting_time(double t0, const LearningRateSchedule& sched, Rng& rng) {
  return waiting_time_from_uniform(t0, sched, uniform_open_left(rng));
}

int initial_index(int n_sub, Rng& rng) {
  if (n_sub < 1) throw PartitionError("index set is empty");
  std::uniform_int_distribution<int> pick(0, n_sub - 1);
  return pick(rng);
}

int next_index(int current, int n_sub, Rng& rng) {
  if (n_sub < 2) throw PartitionError("switching needs at least two subsets");
  std::uniform_int_distribution<int> pick(0, n_sub - 2);
  const int k = pick(rng);
  return k >= current ? k + 1 : k;
}

IndexProcess::IndexProcess(int n_coordinates, int n_sub, LearningRateSchedule sched, std::uint64_t seed, double t0)
    : n_sub_(n_sub), sched_(sched), rng_(seed), t_now_(t0) {
  if (n_sub < 2) throw PartitionError("switching needs at least two subsets");
  if (n_coordinates < 1) throw Error("index process needs at least one coordinate");
  sched_.validate();
  current_.resize(static_cast<std::size_t>(n_coordinates));
  next_.resize(current_.size());
  for (auto& i : current_) i = initial_index(n_sub_, rng_);
  for (auto& t : next_) t = next_event_time(t_now_, sched_, uniform_open_left(rng_));
}

IndexProcess IndexProcess::frozen(std::vector<int> indices, int n_sub, double t0) {
  IndexProcess p;
  p.n_sub_ = n_sub;
  p.t_now_ = t0;
  for (int i : indices) {
    if (i < 0 || i >= n_sub) throw PartitionError("frozen index out of range");
  }
  p.current_ = std::move(indices);
  p.next_.assign(p.current_.size(), kInf);
  p.frozen_ = true;
  return p;
}

double IndexProcess::next_jump_time() const {
  return *std::min_element(next_.begin(), next_.end());
}

std::vector<JumpEvent> IndexProcess::jump() {
  std::vector<JumpEvent> events;
  const double t = next_jump_time();
  if (!std::isfinite(t)) return events;
  t_now_ = t;
  for (std::size_t k = 0; k < current_.size(); ++k) {
    if (next_[k] != t) continue;
    current_[k] = next_index(current_[k], n_sub_, rng_);
    next_[k] = next_event_time(t, sched_, uniform_open_left(rng_));
    events.push_back({t, static_cast<int>(k), current_[k]});
    ++jumps_;
  }
  return events;
}

std::vector<JumpEvent> IndexProcess::advance(double t_target) {
  std::vector<JumpEvent> log;
  while (next_jump_time() <= t_target) {
    auto events = jump();
    log.insert(log.end(), events.begin(), events.end());
  }
  t_now_ = std::max(t_now_, t_target);
  return log;
}

void write_jump_log_csv(std::ostream& out, const std::vector<JumpEvent>& log) {
  out << "time,coordinate,new_index\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%d\n", e.time, e.coordinate, e.new_index + 1);
    out << buf;
  }
}

}  // namespace eki
