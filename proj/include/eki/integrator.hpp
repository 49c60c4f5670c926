#pragma once

#include "eki/dynamics.hpp"
#include "eki/index_process.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace eki {

struct IntegratorConfig {
  double rtol = 1e-6;
  double atol = 1e-9;
  double h_init = 1e-4;
  double h_max = std::numeric_limits<double>::infinity();
  std::vector<double> sample_times;  // sorted; observers fire exactly here
  bool record_steps = false;

  void validate() const;
};

/// Error-controlled step size fell below 1e-14 (t1 - t0).
class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double t) : Error(what), time(t) {}
  double time;
};

/// NaN or Inf appeared in the state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_good) : Error(what), last_good_time(last_good) {}
  double last_good_time;
};

/// Source of discontinuities in the right-hand side. The integrator never
/// steps across next_switch_time(); it lands on it exactly, calls
/// switch_now() and restarts.
class SwitchingSource {
 public:
  virtual ~SwitchingSource() = default;
  virtual double next_switch_time() const = 0;
  virtual void switch_now() = 0;
};

enum class ObserverEvent { sample, jump };

using RhsFunction = std::function<void(double t, const Matrix& y, Matrix& dydt)>;
using StateObserver = std::function<void(double t, const Matrix& y, ObserverEvent ev)>;

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  std::size_t switches = 0;
  std::vector<double> step_nodes;  // filled when record_steps is set; starts at t0
};

/// Dormand-Prince 5(4) with PI step-size control. Between switches the
/// right-hand side is smooth; at each switch the step is truncated to land on
/// the switch time and the stage cache and controller history are discarded.
Matrix integrate(const RhsFunction& f, Matrix y0, double t0, double t1, const IntegratorConfig& cfg,
                 SwitchingSource* switches, const StateObserver& observer, IntegrationStats* stats = nullptr);

/// Adapts an IndexProcess to the integrator.
class IndexSwitching : public SwitchingSource {
 public:
  explicit IndexSwitching(IndexProcess& proc) : proc_(proc) {}
  double next_switch_time() const override { return proc_.next_jump_time(); }
  void switch_now() override { proc_.jump(); }

 private:
  IndexProcess& proc_;
};

using EnsembleObserver = std::function<void(double t, const Ensemble& ens, ObserverEvent ev)>;

struct FlowResult {
  Ensemble final;
  IntegrationStats stats;
};

/// Integrates the ensemble flow on [t0, t1]. `proc` supplies the subset
/// indices and must be null exactly when the flow is not subsampled.
FlowResult integrate_flow(const FlowSpec& spec, const Ensemble& ens0, IndexProcess* proc, double t0, double t1,
                          const IntegratorConfig& cfg, const EnsembleObserver& observer = {});

/// Columns: step, time.
void write_step_log_csv(std::ostream& out, const std::vector<double>& nodes);

}  // namespace eki
