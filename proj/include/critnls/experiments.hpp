#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "critnls/evolve.hpp"
#include "critnls/modulation.hpp"
#include "critnls/orbit.hpp"

namespace critnls {

/// Experiment ids accepted by run().
const std::vector<std::string>& experiment_ids();

/// Parsed key=value configuration. Keys not set fall back to the defaults of
/// the experiment, which mirror the acceptance thresholds.
struct ExperimentConfig {
  std::string id;
  std::map<std::string, std::string> values;
  std::string out_dir;
  std::uint64_t seed = 1;
};

/// Reads "key = value" lines; '#' starts a comment. The keys "id", "out" and
/// "seed" fill the matching fields.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Effective configuration for an experiment: defaults overlaid with the
/// given values. Unknown keys and out-of-range knobs raise invalid-config.
std::map<std::string, std::string> effective_config(const ExperimentConfig& cfg);

/// Evolve settings from "evolve.*" keys on top of `base`.
EvolveConfig evolve_overrides(const std::map<std::string, std::string>& values, EvolveConfig base);

struct Metric {
  /// Acceptance criterion the metric belongs to (0: informational).
  int criterion = 0;
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  /// How value, target and tolerance combine: "rel" |v - t| <= tol |t|,
  /// "abs" |v - t| <= tol, "below" v < tol, "above" v >= tol, "flag" v == 1,
  /// "info" always passes.
  std::string check;
  bool pass = false;
  std::string provenance;
};

struct ExperimentReport {
  std::string id;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> config;
  std::vector<Metric> metrics;
  /// Paths relative to the output directory.
  std::vector<std::string> artifacts;
  /// "pass", "fail" or "error".
  std::string status;
  std::string error;

  bool passed() const;
  /// Whether every metric of one criterion passed; false if it has none.
  bool criterion_passed(int criterion) const;
};

/// Runs an experiment and writes report.kv, metrics.csv and artifacts under
/// cfg.out_dir (if set). Library errors are rethrown with the experiment id
/// prefixed after a FAILED marker and a partial report have been written.
ExperimentReport run(const ExperimentConfig& cfg);

void write_report(const ExperimentReport& report, const std::string& out_dir);

/// Trajectory CSV (t, energy, kinetic, delta, l4_quartic, l6_sextic, S_cum,
/// flux) plus a termination record; snapshots go to `field_dir` with a
/// manifest next to the CSV. Returns the written paths.
std::vector<std::string> write_trajectory(const TrajectoryRecord& traj, const std::string& csv_path,
                                          const std::string& field_dir = "");
/// Snapshots listed in the manifest written by write_trajectory.
std::vector<Snapshot> read_trajectory_snapshots(const std::string& csv_path);

/// Per-sample CSV: t, theta, lambda, x1..x4, alpha, delta, resid (largest
/// orthogonality residual), plus the velocity bound ratio.
void write_modulation_csv(const TrackResult& track, const std::string& path);

/// Smallest c > 0 with E(c u) = target, from E(c u) = c^2 A / 2 - c^4 B / 4,
/// nudged down so that E(c u) <= target. Throws out-of-regime when the
/// target lies above the peak of c -> E(c u).
double energy_trim_scale(const Field& u, double target);

struct LogLawOptions {
  GeometryPtr geometry;
  int order = 4;
  EvolveConfig evolve;
  /// Also evolve a Gaussian trimmed to the same energies.
  bool control = true;
  double control_width = 1.0;
  // Control Gaussians sit at this fraction of the sample energy.
  double control_fraction = 1.0;
};

struct LogLawSample {
  double eps = 0.0;
  double t0 = 0.0;
  /// Amplitude factor c in c * W_k(t0) placing E at E(W) - eps^2.
  double scale = 1.0;
  double energy_gap = 0.0;
  double kinetic_ratio = 0.0;
  double s_forward = 0.0;
  double s_backward = 0.0;
  double s_total = 0.0;
  std::string forward_end;
  std::string backward_end;
  bool valid = false;
  std::string note;
};

struct LogLawReport {
  std::vector<LogLawSample> samples;
  std::vector<LogLawSample> control;
  double lambda1 = 0.0;
  double int_w6 = 0.0;
  /// (2 / lambda1) int W^6.
  double target = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double control_slope = 0.0;
  double control_spread = 0.0;
  bool monotone = false;
  std::size_t valid_samples = 0;
};

/// Total scattering size of near-threshold data u0(eps) = c W_k^-(t0) with
/// t0 = |log eps| / lambda1 and c trimming the energy to E(W) - eps^2, fitted
/// against |log eps|. Samples failing the subcritical checks are rejected;
/// fewer than four valid samples raise scan-failure.
LogLawReport log_law_scan(const std::vector<double>& eps_list, const LogLawOptions& options);

}  // namespace critnls
