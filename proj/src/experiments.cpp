#include "critnls/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "detail/experiments.hpp"

namespace critnls {

namespace fs = std::filesystem;

namespace {

enum class Kind { number, integer, list, flag, geometry, text };

struct KnobSpec {
  const char* key;
  const char* value;
  Kind kind;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Defaults mirror the acceptance thresholds.
const std::map<std::string, std::vector<KnobSpec>>& knob_table() {
  static const std::map<std::string, std::vector<KnobSpec>> table = {
      {"ground-state-audit",
       {
           {"geometry", "radial:r_max=200,n=4096", Kind::geometry},
           {"random_fields", "100", Kind::integer, 1, 100000},
           {"orbit_points", "10", Kind::integer, 1, 10000},
           {"orbit.lambda_min", "0.5", Kind::number, 0.05, 20},
           {"orbit.lambda_max", "2", Kind::number, 0.05, 20},
           {"tol.h1_sq", "1e-6", Kind::number, 0, 1},
           {"tol.pohozaev", "1e-6", Kind::number, 0, 1},
           {"tol.energy", "1e-6", Kind::number, 0, 1},
           {"tol.int_w6", "1e-4", Kind::number, 0, 1},
           {"tol.sobolev_floor", "1e-8", Kind::number, 0, 1},
           {"tol.orbit_defect", "1e-4", Kind::number, 0, 1},
           {"budget.audit", "1", Kind::number, 0, kInf},
           {"budget.sobolev", "10", Kind::number, 0, kInf},
       }},
      {"spectrum",
       {
           {"geometry", "radial:r_max=200,n=4096", Kind::geometry},
           {"coarse_geometry", "radial:r_max=200,n=2048", Kind::geometry},
           {"tol.eigen", "1e-6", Kind::number, 0, 1},
           {"tol.lambda_agreement", "0.01", Kind::number, 0, 1},
           {"tol.kernel", "1e-6", Kind::number, 0, 1},
           {"tol.coercivity_stability", "0.05", Kind::number, 0, 1},
           {"tol.quadratic", "1e-6", Kind::number, 0, 1},
           {"sweep.amplitudes", "0.1,0.05,0.025,0.0125", Kind::list, 1e-8, 1},
           {"tol.sweep_ratio", "0.25", Kind::number, 0, 1},
           {"budget.spectrum", "60", Kind::number, 0, kInf},
           {"budget.quadratic", "10", Kind::number, 0, kInf},
       }},
      {"heteroclinic",
       {
           {"geometry", "radial:r_max=200,n=4096", Kind::geometry},
           {"orders", "2,3,4", Kind::list, 1, 8},
           {"k", "4", Kind::integer, 1, 8},
           {"residual.t_start", "3", Kind::number, -kInf, kInf},
           {"residual.span", "6", Kind::number, 0.5, 100},
           {"residual.step", "0.25", Kind::number, 1e-3, 10},
           {"residual.floor_factor", "100", Kind::number, 1, 1e12},
           {"tol.residual_slope", "0.1", Kind::number, 0, 1},
           {"amplitude", "0.01", Kind::number, 1e-8, 0.1},
           {"forward.t_end", "20", Kind::number, 1, 1e4},
           {"backward.t_end", "400", Kind::number, 1, 1e5},
           {"blowup.t_end", "100", Kind::number, 1, 1e5},
           {"snapshot_every", "0.25", Kind::number, 1e-3, 100},
           {"tol.rate", "0.02", Kind::number, 0, 1},
           {"evolve.tolerance", "1e-8", Kind::number, 1e-14, 1e-2},
           {"budget.residual", "60", Kind::number, 0, kInf},
           {"budget.classification", "900", Kind::number, 0, kInf},
       }},
      {"delta-decay",
       {
           {"geometry", "radial:r_max=200,n=4096", Kind::geometry},
           {"coarse_geometry", "radial:r_max=200,n=2048", Kind::geometry},
           {"k", "4", Kind::integer, 1, 8},
           {"stationary.t_end", "10", Kind::number, 0.1, 1e4},
           {"tol.delta", "1e-5", Kind::number, 0, 1},
           {"tol.drift", "1e-6", Kind::number, 0, 1},
           {"reversal.t_end", "1", Kind::number, 0.01, 100},
           {"reversal.amplitude", "0.01", Kind::number, 1e-8, 0.1},
           {"tol.reversal_factor", "10", Kind::number, 1, 1e6},
           {"roundtrip_points", "20", Kind::integer, 1, 10000},
           {"tol.roundtrip", "1e-8", Kind::number, 0, 1},
           {"sweep.delta_min", "1e-4", Kind::number, 1e-12, 1},
           {"sweep.points", "12", Kind::integer, 2, 1000},
           {"sweep.backward_t_end", "20", Kind::number, 1, 1e4},
           {"delta0_fraction", "0.1", Kind::number, 1e-6, 1},
           {"tol.bracket_stability", "0.1", Kind::number, 0, 1},
           {"tol.sweep_coverage", "0.5", Kind::number, 0, 1},
           {"track.t_end", "20", Kind::number, 1, 1e4},
           {"track.amplitude", "0.01", Kind::number, 1e-8, 0.1},
           {"snapshot_every", "0.25", Kind::number, 1e-3, 100},
           {"tol.mod2_stability", "0.1", Kind::number, 0, 1},
           {"tol.rate", "0.02", Kind::number, 0, 1},
           {"evolve.tolerance", "1e-8", Kind::number, 1e-14, 1e-2},
           {"budget.stationarity", "300", Kind::number, 0, kInf},
           {"budget.modulation", "300", Kind::number, 0, kInf},
       }},
      {"virial-identity",
       {
           {"geometry", "radial:r_max=200,n=4096", Kind::geometry},
           {"radii", "4,8,16", Kind::list, 0.01, 1e4},
           {"a", "-1", Kind::number, -1, 1},
           {"k", "4", Kind::integer, 1, 8},
           {"amplitude", "0.01", Kind::number, 1e-8, 0.1},
           {"direction", "backward", Kind::text},
           {"t_end", "20", Kind::number, 0.1, 1e4},
           {"tol.identity", "1e-3", Kind::number, 0, 1},
           {"tol.static", "1e-8", Kind::number, 0, 1},
           {"evolve.tolerance", "1e-8", Kind::number, 1e-14, 1e-2},
           {"budget.virial", "300", Kind::number, 0, kInf},
       }},
      {"log-law",
       {
           {"geometry", "radial:r_max=200,n=2048", Kind::geometry},
           {"k", "4", Kind::integer, 1, 8},
           {"eps", "1e-2,5.623e-3,3.162e-3,1.778e-3,1e-3,5.623e-4,3.162e-4", Kind::list, 1e-12, 0.5},
           {"t_end", "1000", Kind::number, 1, 1e6},
           {"control", "1", Kind::flag},
           {"control.width", "1", Kind::number, 1e-3, 100},
           {"control.fraction", "1", Kind::number, 1e-3, 1},
           {"tol.slope", "0.25", Kind::number, 0, 10},
           {"tol.control", "0.05", Kind::number, 0, 10},
           {"min_decades", "1.5", Kind::number, 0, 20},
           {"evolve.tolerance", "1e-7", Kind::number, 1e-14, 1e-2},
           {"budget.log_law", "7200", Kind::number, 0, kInf},
       }},
  };
  return table;
}

// Optional evolve overrides accepted by every experiment.
const std::vector<KnobSpec>& evolve_knobs() {
  static const std::vector<KnobSpec> knobs = {
      {"evolve.scheme", "", Kind::text},
      {"evolve.tolerance", "", Kind::number, 1e-14, 1e-2},
      {"evolve.dt_init", "", Kind::number, 1e-12, 10},
      {"evolve.dt_min", "", Kind::number, 1e-14, 10},
      {"evolve.dt_max", "", Kind::number, 1e-12, 10},
      {"evolve.pade_order", "", Kind::integer, 2, 12},
      {"evolve.max_steps", "", Kind::integer, 1, 1e12},
      {"evolve.blowup_factor", "", Kind::number, 1, 1e6},
      {"evolve.dispersal_fraction", "", Kind::number, 0, 1},
      {"evolve.sponge.strength", "", Kind::number, 0, 1e6},
      {"evolve.sponge.r_start_fraction", "", Kind::number, 0, 1},
  };
  return knobs;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::invalid_config, "'" + key + "' expects a boolean, got '" + v + "'");
}

void validate(const KnobSpec& spec, const std::string& value) {
  const std::string key = spec.key;
  auto in_range = [&](double x) {
    if (!(x >= spec.lo && x <= spec.hi))
      throw Error(ErrorCode::invalid_config, "'" + key + "' = " + format_double(x) + " outside [" +
                                                 format_double(spec.lo) + ", " + format_double(spec.hi) + "]");
  };
  switch (spec.kind) {
    case Kind::number: in_range(detail::parse_number(key, value)); break;
    case Kind::integer: {
      const double x = detail::parse_number(key, value);
      if (x != std::floor(x)) throw Error(ErrorCode::invalid_config, "'" + key + "' expects an integer");
      in_range(x);
      break;
    }
    case Kind::list: {
      const auto xs = detail::parse_list(key, value);
      if (xs.empty()) throw Error(ErrorCode::invalid_config, "'" + key + "' is empty");
      for (double x : xs) in_range(x);
      break;
    }
    case Kind::flag: parse_flag(key, value); break;
    case Kind::geometry: parse_geometry(value); break;
    case Kind::text:
      if (value.empty()) throw Error(ErrorCode::invalid_config, "'" + key + "' is empty");
      break;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {"ground-state-audit", "spectrum", "heteroclinic",
                                               "delta-decay", "virial-identity", "log-law"};
  return ids;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::invalid_config, "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::invalid_config, "line " + std::to_string(lineno) + ": empty key");
    if (key == "id") {
      cfg.id = value;
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "seed") {
      const double s = detail::parse_number(key, value);
      if (s < 0 || s != std::floor(s)) throw Error(ErrorCode::invalid_config, "seed must be a non-negative integer");
      cfg.seed = std::stoull(value);
    } else {
      if (cfg.values.count(key))
        throw Error(ErrorCode::invalid_config, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.values[key] = value;
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read config " + path);
  return parse_config(in);
}

std::map<std::string, std::string> effective_config(const ExperimentConfig& cfg) {
  const auto& table = knob_table();
  const auto it = table.find(cfg.id);
  if (it == table.end()) throw Error(ErrorCode::invalid_config, "unknown experiment id '" + cfg.id + "'");
  std::map<std::string, const KnobSpec*> specs;
  for (const auto& k : evolve_knobs()) specs[k.key] = &k;
  std::map<std::string, std::string> out;
  for (const auto& k : it->second) {
    specs[k.key] = &k;
    out[k.key] = k.value;
  }
  for (const auto& [key, value] : cfg.values) {
    const auto s = specs.find(key);
    if (s == specs.end()) throw Error(ErrorCode::invalid_config, "unknown key '" + key + "' for " + cfg.id);
    out[key] = value;
  }
  for (const auto& [key, value] : out) validate(*specs.at(key), value);
  return out;
}

EvolveConfig evolve_overrides(const std::map<std::string, std::string>& values, EvolveConfig base) {
  auto num = [&](const char* key, double& field) {
    if (auto it = values.find(key); it != values.end()) field = detail::parse_number(key, it->second);
  };
  if (auto it = values.find("evolve.scheme"); it != values.end()) base.scheme = it->second;
  num("evolve.tolerance", base.tolerance);
  num("evolve.dt_init", base.dt_init);
  num("evolve.dt_min", base.dt_min);
  num("evolve.dt_max", base.dt_max);
  num("evolve.blowup_factor", base.blowup_factor);
  num("evolve.dispersal_fraction", base.dispersal_fraction);
  num("evolve.sponge.strength", base.sponge.strength);
  num("evolve.sponge.r_start_fraction", base.sponge.r_start_fraction);
  if (auto it = values.find("evolve.pade_order"); it != values.end())
    base.pade_order = static_cast<int>(detail::parse_number(it->first, it->second));
  if (auto it = values.find("evolve.max_steps"); it != values.end())
    base.max_steps = static_cast<long>(detail::parse_number(it->first, it->second));
  return base;
}

bool ExperimentReport::passed() const {
  return status != "error" && std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
}

bool ExperimentReport::criterion_passed(int criterion) const {
  bool any = false;
  for (const auto& m : metrics) {
    if (m.criterion != criterion) continue;
    any = true;
    if (!m.pass) return false;
  }
  return any && status != "error";
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream kv;
  kv << "id=" << report.id << "\n";
  kv << "status=" << report.status << "\n";
  if (!report.error.empty()) kv << "error=" << report.error << "\n";
  kv << "seed=" << report.seed << "\n";
  for (const auto& [k, v] : report.config) kv << "config." << k << "=" << v << "\n";
  for (const auto& m : report.metrics) {
    kv << "metric." << m.name << "=" << format_double(m.value) << "\n";
    kv << "metric." << m.name << ".pass=" << (m.pass ? 1 : 0) << "\n";
  }
  std::size_t passed = std::count_if(report.metrics.begin(), report.metrics.end(), [](const Metric& m) { return m.pass; });
  kv << "metrics_passed=" << passed << "\n";
  kv << "metrics_total=" << report.metrics.size() << "\n";
  for (const auto& a : report.artifacts) kv << "artifact=" << a << "\n";
  write_text((fs::path(out_dir) / "report.kv").string(), kv.str());

  std::ostringstream csv;
  csv << "criterion,name,value,target,tolerance,check,pass,provenance\n";
  for (const auto& m : report.metrics)
    csv << m.criterion << "," << csv_escape(m.name) << "," << format_double(m.value) << "," << format_double(m.target)
        << "," << format_double(m.tolerance) << "," << m.check << "," << (m.pass ? 1 : 0) << ","
        << csv_escape(m.provenance) << "\n";
  write_text((fs::path(out_dir) / "metrics.csv").string(), csv.str());
}

ExperimentReport run(const ExperimentConfig& cfg) {
  ExperimentReport report;
  report.id = cfg.id;
  report.seed = cfg.seed;
  report.config = effective_config(cfg);
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    fs::remove(fs::path(cfg.out_dir) / "FAILED");
  }
  detail::Recorder rec(report, cfg.out_dir);
  const detail::Knobs knobs(report.config);
  try {
    if (cfg.id == "ground-state-audit") detail::run_ground_state_audit(knobs, cfg.seed, rec);
    else if (cfg.id == "spectrum") detail::run_spectrum(knobs, cfg.seed, rec);
    else if (cfg.id == "heteroclinic") detail::run_heteroclinic(knobs, cfg.seed, rec);
    else if (cfg.id == "delta-decay") detail::run_delta_decay(knobs, cfg.seed, rec);
    else if (cfg.id == "virial-identity") detail::run_virial_identity(knobs, cfg.seed, rec);
    else detail::run_log_law(knobs, cfg.seed, rec);
  } catch (const Error& e) {
    report.status = "error";
    report.error = e.what();
    if (!cfg.out_dir.empty()) {
      write_text((fs::path(cfg.out_dir) / "FAILED").string(), std::string(e.what()) + "\n");
      write_report(report, cfg.out_dir);
    }
    throw Error(e.code(), cfg.id + ": " + e.what(), e.diagnostics());
  }
  report.status = report.passed() ? "pass" : "fail";
  if (!cfg.out_dir.empty()) write_report(report, cfg.out_dir);
  return report;
}

std::vector<std::string> write_trajectory(const TrajectoryRecord& traj, const std::string& csv_path,
                                          const std::string& field_dir) {
  std::vector<std::string> written;
  const fs::path csv(csv_path);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ostringstream os;
  os << "t,energy,kinetic,delta,l4_quartic,l6_sextic,S_cum,flux\n";
  for (std::size_t i = 0; i < traj.size(); ++i)
    os << format_double(traj.t[i]) << "," << format_double(traj.energy[i]) << "," << format_double(traj.kinetic[i])
       << "," << format_double(traj.delta[i]) << "," << format_double(traj.l4[i]) << "," << format_double(traj.l6[i])
       << "," << format_double(traj.s_cum[i]) << "," << format_double(traj.flux[i]) << "\n";
  write_text(csv.string(), os.str());
  written.push_back(csv.string());

  const std::string stem = (csv.parent_path() / csv.stem()).string();
  std::ostringstream term;
  term << "termination=" << to_string(traj.termination) << "\n";
  term << "geometry=" << (traj.geometry ? traj.geometry->spec() : "") << "\n";
  term << "direction=" << (traj.direction == Direction::forward ? "forward" : "backward") << "\n";
  term << "samples=" << traj.size() << "\n";
  if (traj.size()) term << "t_final=" << format_double(traj.t.back()) << "\n";
  term << "rejected_steps=" << traj.rejected_steps << "\n";
  term << "error_estimate=" << format_double(traj.error_estimate) << "\n";
  term << "energy_drift=" << format_double(traj.energy_drift) << "\n";
  term << "snapshots=" << traj.snapshots.size() << "\n";
  write_text(stem + ".termination.kv", term.str());
  written.push_back(stem + ".termination.kv");

  if (!traj.snapshots.empty() && !field_dir.empty()) {
    fs::create_directories(field_dir);
    std::ostringstream man;
    man << "index,t,file\n";
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const std::string name = csv.stem().string() + "_snap_" + std::to_string(i) + ".csv";
      const fs::path file = fs::path(field_dir) / name;
      write_snapshot(traj.snapshots[i].u, file.string());
      written.push_back(file.string());
      man << i << "," << format_double(traj.snapshots[i].t) << ","
          << fs::relative(file, csv.parent_path().empty() ? fs::path(".") : csv.parent_path()).generic_string() << "\n";
    }
    write_text(stem + ".snapshots.csv", man.str());
    written.push_back(stem + ".snapshots.csv");
  }
  return written;
}

std::vector<Snapshot> read_trajectory_snapshots(const std::string& csv_path) {
  const fs::path csv(csv_path);
  const fs::path manifest = csv.parent_path() / (csv.stem().string() + ".snapshots.csv");
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::io_error, "missing snapshot manifest " + manifest.string());
  std::string line;
  std::getline(in, line);
  std::vector<Snapshot> out;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error(ErrorCode::io_error, "malformed manifest row: " + line);
    const double t = detail::parse_number("t", line.substr(c1 + 1, c2 - c1 - 1));
    out.push_back({t, read_snapshot((csv.parent_path() / line.substr(c2 + 1)).string())});
  }
  if (out.empty()) throw Error(ErrorCode::io_error, "no snapshots listed in " + manifest.string());
  return out;
}

namespace detail {

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(text.substr(used)) != "")
    throw Error(ErrorCode::invalid_config, "'" + key + "' expects a number, got '" + text + "'");
  if (!std::isfinite(v)) throw Error(ErrorCode::invalid_config, "'" + key + "' is not finite");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
  return out;
}

const std::string& Knobs::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::invalid_config, "missing key '" + key + "'");
  return it->second;
}
double Knobs::num(const std::string& key) const { return parse_number(key, str(key)); }
int Knobs::integer(const std::string& key) const { return static_cast<int>(num(key)); }
bool Knobs::flag(const std::string& key) const { return parse_flag(key, str(key)); }
std::vector<double> Knobs::list(const std::string& key) const { return parse_list(key, str(key)); }
GeometryPtr Knobs::geometry(const std::string& key) const { return parse_geometry(str(key)); }

void Recorder::push(Metric m) { report_.metrics.push_back(std::move(m)); }

void Recorder::rel(int c, const std::string& name, double v, double target, double tol, const std::string& prov) {
  push({c, name, v, target, tol, "rel", std::abs(v - target) <= tol * std::abs(target), prov});
}
void Recorder::abs(int c, const std::string& name, double v, double target, double tol, const std::string& prov) {
  push({c, name, v, target, tol, "abs", std::abs(v - target) <= tol, prov});
}
void Recorder::below(int c, const std::string& name, double v, double bound, const std::string& prov) {
  push({c, name, v, 0.0, bound, "below", v < bound, prov});
}
void Recorder::above(int c, const std::string& name, double v, double floor, const std::string& prov) {
  push({c, name, v, floor, 0.0, "above", v >= floor, prov});
}
void Recorder::flag(int c, const std::string& name, bool ok, const std::string& prov) {
  push({c, name, ok ? 1.0 : 0.0, 1.0, 0.0, "flag", ok, prov});
}
void Recorder::info(int c, const std::string& name, double v, const std::string& prov) {
  push({c, name, v, 0.0, 0.0, "info", true, prov});
}

std::string Recorder::artifact(const std::string& relative) {
  const fs::path p = fs::path(out_) / relative;
  fs::create_directories(p.parent_path());
  report_.artifacts.push_back(relative);
  return p.string();
}

void Recorder::field(const std::string& name, const Field& f) {
  if (!writing()) return;
  write_snapshot(f, artifact("fields/" + name + ".csv"));
}

void Recorder::trajectory(const std::string& name, const TrajectoryRecord& traj, bool with_snapshots) {
  if (!writing()) return;
  const fs::path csv = fs::path(out_) / "traj" / (name + ".csv");
  const auto paths = write_trajectory(traj, csv.string(), with_snapshots ? (fs::path(out_) / "fields").string() : "");
  for (const auto& p : paths) report_.artifacts.push_back(fs::relative(p, out_).generic_string());
}

}  // namespace detail

}  // namespace critnls

namespace critnls {

void write_modulation_csv(const TrackResult& track, const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ostringstream os;
  os << "t,theta,lambda,x1,x2,x3,x4,alpha,delta,resid,bound_ratio\n";
  for (std::size_t i = 0; i < track.states.size(); ++i) {
    const auto& s = track.states[i];
    double resid = 0.0;
    for (double r : s.residuals) resid = std::max(resid, r);
    os << format_double(s.t) << "," << format_double(s.theta) << "," << format_double(s.lambda);
    for (double x : s.x) os << "," << format_double(x);
    os << "," << format_double(s.alpha) << "," << format_double(s.delta) << "," << format_double(resid) << ","
       << format_double(i < track.velocities.size() ? track.velocities[i].bound_ratio : 0.0) << "\n";
  }
  write_text(p.string(), os.str());
}

double energy_trim_scale(const Field& u, double target) {
  const int d = u.geometry().dim();
  const double p = critical_exponent(d);
  const double A = h1_inner(u, u);
  const double B = integrate_density(u, [&](cplx z, std::size_t) { return std::pow(std::norm(z), 0.5 * p); });
  if (!(A > 0.0) || !(B > 0.0)) throw Error(ErrorCode::numerical_input, "energy trim needs a nonzero field");
  if (d != 4) throw Error(ErrorCode::unsupported_on_backend, "energy trim is implemented for d = 4");
  // x = c^2 solves B/4 x^2 - A/2 x + target = 0; the smaller root lies below the peak.
  const double disc = 0.25 * A * A - B * target;
  if (disc < 0.0) throw Error(ErrorCode::out_of_regime, "target energy above the peak of E(c u)");
  const double x = 2.0 * target / (0.5 * A + std::sqrt(disc));
  double c = std::sqrt(x);
  for (int i = 0; i < 60 && energy(c * u) > target; ++i) c *= 1.0 - 1e-12 * (1 << std::min(i, 30));
  return c;
}

}  // namespace critnls
