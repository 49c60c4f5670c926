#pragma once

#include "eki/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace eki {

using Rng = std::mt19937_64;

/// Uniform draw on (0, 1].
double uniform_open_left(Rng& rng);

/// Learning rate eta(t): the mean holding time of the index process.
///
///   constant     eta(t) = c
///   exponential  eta(t) = a exp(-b t)
///   reciprocal   eta(t) = 1 / (a t + b)
///   piecewise    a decaying (exponential or reciprocal) law on [0, t_switch),
///                then deterministic switches every `step` time units.
struct LearningRateSchedule {
  enum class Kind { constant, exponential, reciprocal, piecewise };

  Kind kind = Kind::constant;
  double c = 1.0;
  double a = 1.0;
  double b = 1.0;
  Kind decay = Kind::reciprocal;  // piecewise only
  double t_switch = 0.0;
  double step = 0.0;

  static LearningRateSchedule constant(double c);
  static LearningRateSchedule exponential(double a, double b);
  static LearningRateSchedule reciprocal(double a, double b);
  static LearningRateSchedule piecewise(LearningRateSchedule decaying, double t_switch, double step);

  void validate() const;
  /// eta(t); for the piecewise kind beyond t_switch this is the step length.
  double eta(double t) const;
  /// Integrated switching intensity int_t0^t1 1/eta(u) du over the random phase.
  double integrated_rate(double t0, double t1) const;
};

const char* to_string(LearningRateSchedule::Kind kind);
LearningRateSchedule::Kind schedule_kind_from_string(const std::string& name);

/// Inverse-transform waiting time: the Delta solving
/// int_0^Delta 1/eta(t0 + u) du = -log(u), for u in (0, 1].
/// Beyond t_switch of a piecewise schedule this is the distance to the next
/// grid point t_switch + k * step.
double waiting_time_from_uniform(double t0, const LearningRateSchedule& sched, double u);
double sample_waiting_time(double t0, const LearningRateSchedule& sched, Rng& rng);

/// Uniform over {0..n_sub-1}.
int initial_index(int n_sub, Rng& rng);
/// Uniform over {0..n_sub-1} minus current.
int next_index(int current, int n_sub, Rng& rng);

struct JumpEvent {
  double time;
  int coordinate;  // 0 for single subsampling, particle for batch
  int new_index;   // 0-based subset index
};

/// The switching process over subset indices. Single subsampling uses one
/// coordinate shared by every particle; batch subsampling runs one independent
/// coordinate per particle off a common random stream.
class IndexProcess {
 public:
  IndexProcess(int n_coordinates, int n_sub, LearningRateSchedule sched, std::uint64_t seed, double t0 = 0.0);

  /// Process that never switches, pinned to the given indices.
  static IndexProcess frozen(std::vector<int> indices, int n_sub, double t0 = 0.0);

  int n_sub() const { return n_sub_; }
  int n_coordinates() const { return static_cast<int>(current_.size()); }
  double now() const { return t_now_; }
  double next_jump_time() const;
  const std::vector<int>& indices() const { return current_; }
  std::size_t jump_count() const { return jumps_; }

  /// Moves to next_jump_time() and performs every switch scheduled there.
  std::vector<JumpEvent> jump();

  /// Performs all switches in (now, t_target] and sets now = t_target.
  std::vector<JumpEvent> advance(double t_target);

 private:
  IndexProcess() = default;

  int n_sub_ = 0;
  LearningRateSchedule sched_;
  Rng rng_;
  double t_now_ = 0.0;
  std::vector<int> current_;
  std::vector<double> next_;
  std::size_t jumps_ = 0;
  bool frozen_ = false;
};

/// Columns: time, coordinate, new_index (1-based subset label).
void write_jump_log_csv(std::ostream& out, const std::vector<JumpEvent>& log);

}  // namespace eki
