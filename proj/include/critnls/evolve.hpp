#pragma once

#include <functional>
#include <string>
#include <vector>

#include "critnls/ground_state.hpp"

namespace critnls {

enum class Direction { forward, backward };

struct SpongeConfig {
  bool enabled = false;
  /// Damping starts at r_start_fraction * r_max and ramps cubically to
  /// `strength` at r_max.
  double r_start_fraction = 0.8;
  double strength = 2.0;
};

struct EvolveConfig {
  /// "yoshida4" (default) or "strang2".
  std::string scheme = "yoshida4";
  double dt_init = 1e-2;
  double dt_min = 1e-7;
  double dt_max = 5e-2;
  /// Accepted when the embedded estimate ||u_high - u_low||_H1 / ||u||_H1
  /// of one step stays below this.
  double tolerance = 1e-8;
  double t_end = 1.0;
  Direction direction = Direction::forward;
  SpongeConfig sponge;
  /// Stop once ||grad u|| exceeds this multiple of ||grad W||.
  double blowup_factor = 1.5;
  /// Stop once ||u||_L4^4 falls below this fraction of its largest value
  /// so far.
  double dispersal_fraction = 1e-2;
  long max_steps = 2000000;
  /// Pade order of the radial linear step.
  int pade_order = 6;
  /// Fields are stored at the first accepted step reaching each |t|.
  std::vector<double> snapshot_times;
};

enum class Termination { reached_end, blowup_threshold, dispersed, max_steps, numerical_blowup };
const char* to_string(Termination t);

struct Snapshot {
  double t;
  Field u;
};

/// One sample per accepted step (plus t = 0). Times run negative for
/// backward runs.
struct TrajectoryRecord {
  GeometryPtr geometry;
  Direction direction = Direction::forward;
  std::vector<double> t;
  std::vector<double> energy;
  std::vector<double> kinetic;   // ||grad u||^2
  std::vector<double> delta;
  std::vector<double> l4;        // ||u||_L4^4
  std::vector<double> l6;        // ||u||_L6^6
  std::vector<double> s_cum;     // int_0^t ||u||_L6^6 over the elapsed span
  std::vector<double> flux;      // cumulative L2 mass removed by the sponge
  std::vector<double> dt;
  std::vector<Snapshot> snapshots;
  Field final_field;
  Termination termination = Termination::reached_end;
  long rejected_steps = 0;
  /// Sum of the accepted embedded error estimates, in H1 norm.
  double error_estimate = 0.0;
  /// Largest |E(t) - E(0)| / |E(0)| while the sponge had removed less than
  /// 1e-12 of the initial mass.
  double energy_drift = 0.0;

  std::size_t size() const noexcept { return t.size(); }
};

/// Called after every accepted step with the current time and field.
using StepObserver = std::function<void(double t, const Field& u)>;

/// Integrates i u_t = -Lap u - |u|^2 u (d = 4). Backward runs evolve
/// conj(u0) forward and report conj fields at negative times.
TrajectoryRecord evolve(const Field& u0, const EvolveConfig& cfg, const StepObserver& observer = {});

/// Trapezoid quadrature of the recorded ||u||_L6^6 over [t_a, t_b], with
/// linear interpolation at the ends.
double scattering_size(const TrajectoryRecord& traj, double t_a, double t_b);

enum class Regime { scattering_like, converging_to_W, blowup_like, undetermined };
const char* to_string(Regime r);

struct RegimeOptions {
  std::size_t min_samples = 100;
  /// Converging: fitted decay rate of log|delta| over the last half must
  /// exceed min_rate with an rms fit residual below this, and |delta| stays below
  /// max_delta_fraction * ||W||_H1^2.
  double max_fit_residual = 0.5;
  double min_rate = 1e-3;
  double max_delta_fraction = 0.1;
};

Regime detect_regime(const TrajectoryRecord& traj, const RegimeOptions& options = {});

}  // namespace critnls
