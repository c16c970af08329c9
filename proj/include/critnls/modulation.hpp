#pragma once

#include <optional>
#include <string>
#include <vector>

#include "critnls/evolve.hpp"

namespace critnls {

/// Decomposition u = T_p((1 + alpha) W + u~) where T_p f = e^{i theta}
/// lambda^{-(d-2)/2} f((x - x0) / lambda) and u~ is H1-orthogonal to iW, W1
/// and d_j W.
struct ModulationState {
  double t = 0.0;
  double theta = 0.0;
  double lambda = 1.0;
  Point4 x{};
  double alpha = 0.0;
  double delta = 0.0;
  double utilde_h1 = 0.0;
  /// |(T_p^{-1} u - W, z)_H1| / ||W||_H1^2 for z = iW, W1[, d_j W].
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
};

struct ModulationOptions {
  /// Fits are refused once |delta(u)| >= delta0_fraction * ||W||_H1^2.
  double delta0_fraction = 0.1;
  /// Newton stops when every residual is below this.
  double tolerance = 1e-11;
  int max_iterations = 50;
  /// Smallest singular value of the scaled Jacobian, relative to the largest.
  double min_rcond = 1e-10;
};

/// Newton iteration on (theta, log lambda, x). Without a guess the phase comes
/// from the complex H1 pairing with W, the scale from the peak amplitude and
/// the centre from the |u|^4 centroid.
ModulationState fit(const Field& u, const std::optional<ModulationState>& guess = std::nullopt,
                    const ModulationOptions& options = {});

/// Finite-difference parameter velocities at one sample.
struct ModulationVelocity {
  double t = 0.0;
  double theta = 0.0;
  double log_lambda = 0.0;  // lambda' / lambda
  Point4 x{};
  double alpha = 0.0;
  /// (|x' - (lambda'/lambda) x| + |alpha'| + |theta'| + |lambda'/lambda|)
  /// * lambda^2 / |delta|. lambda is a length here, so parameter velocities
  /// scale like delta / lambda^2.
  double bound_ratio = 0.0;
  /// |lambda'/lambda| * lambda^2 / |delta|.
  double scale_ratio = 0.0;
};

struct TrackResult {
  std::vector<ModulationState> states;
  std::vector<ModulationVelocity> velocities;
  /// max of bound_ratio over the samples.
  double bound_constant = 0.0;
  double scale_constant = 0.0;
  /// Set when a sample left the regime; states stop before it.
  bool truncated = false;
  std::size_t boundary = 0;
  std::string boundary_reason;
};

/// Warm-started fits along a sequence of fields; theta is unwrapped.
TrackResult track(const std::vector<Snapshot>& samples, const ModulationOptions& options = {});
/// Tracks the stored snapshots of a trajectory.
TrackResult track(const TrajectoryRecord& traj, const ModulationOptions& options = {});

struct DecayFit {
  /// |delta| ~ amplitude * exp(-rate t).
  double rate = 0.0;
  double amplitude = 0.0;
  /// rms of the residual in log |delta|.
  double residual = 0.0;
  bool reliable = true;
  std::string warning;
};

/// Least-squares line through (t, log |delta|). Needs at least 20 samples of
/// one sign; warns when |delta| spans under two decades or is not monotone
/// beyond the fit noise.
DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& delta);
DecayFit decay_fit(const std::vector<ModulationState>& states);

}  // namespace critnls
