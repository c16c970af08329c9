#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "critnls/experiments.hpp"

namespace critnls::detail {

/// Typed access to an effective configuration.
class Knobs {
 public:
  explicit Knobs(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;
  GeometryPtr geometry(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

double parse_number(const std::string& key, const std::string& text);
std::vector<double> parse_list(const std::string& key, const std::string& text);

/// Collects metrics and artifacts of one run.
class Recorder {
 public:
  Recorder(ExperimentReport& report, std::string out_dir) : report_(report), out_(std::move(out_dir)) {}

  void rel(int criterion, const std::string& name, double value, double target, double tol, const std::string& prov);
  void abs(int criterion, const std::string& name, double value, double target, double tol, const std::string& prov);
  void below(int criterion, const std::string& name, double value, double bound, const std::string& prov);
  void above(int criterion, const std::string& name, double value, double floor, const std::string& prov);
  void flag(int criterion, const std::string& name, bool ok, const std::string& prov);
  void info(int criterion, const std::string& name, double value, const std::string& prov);

  bool writing() const noexcept { return !out_.empty(); }
  /// Absolute path for an artifact; the relative path joins the manifest.
  std::string artifact(const std::string& relative);
  void field(const std::string& name, const Field& f);
  void trajectory(const std::string& name, const TrajectoryRecord& traj, bool with_snapshots = false);

 private:
  void push(Metric m);
  ExperimentReport& report_;
  std::string out_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void reset() { start_ = std::chrono::steady_clock::now(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

void run_ground_state_audit(const Knobs& k, std::uint64_t seed, Recorder& rec);
void run_spectrum(const Knobs& k, std::uint64_t seed, Recorder& rec);
void run_heteroclinic(const Knobs& k, std::uint64_t seed, Recorder& rec);
void run_delta_decay(const Knobs& k, std::uint64_t seed, Recorder& rec);
void run_virial_identity(const Knobs& k, std::uint64_t seed, Recorder& rec);
void run_log_law(const Knobs& k, std::uint64_t seed, Recorder& rec);

}  // namespace critnls::detail
