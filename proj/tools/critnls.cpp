#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "critnls/experiments.hpp"
#include "critnls/virial.hpp"

using namespace critnls;
namespace fs = std::filesystem;

namespace {

const char* kReference = "radial:r_max=200,n=4096";

void write_kv(const fs::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  for (const auto& [k, v] : rows) out << k << "=" << format_double(v) << "\n";
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

int report_exit(const ExperimentReport& rep) {
  for (const auto& m : rep.metrics)
    std::cout << (m.pass ? "pass " : "FAIL ") << m.name << " = " << format_double(m.value) << "\n";
  std::cout << rep.id << ": " << rep.status << "\n";
  return rep.passed() ? 0 : 1;
}

// "orbit:a=-1,k=4,t0=14" or "orbit:a=-1,k=4,amplitude=0.01"; "ground-state";
// anything else is a snapshot path.
Field initial_field(const std::string& init, const GeometryPtr& geom) {
  if (init == "ground-state") return ground_state(geom)->W;
  if (init.rfind("orbit:", 0) == 0) {
    double a = -1.0, t0 = NAN, amp = 0.01;
    int k = 4;
    std::stringstream ss(init.substr(6));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::invalid_config, "bad orbit spec item '" + item + "'");
      const std::string key = item.substr(0, eq);
      const double v = std::stod(item.substr(eq + 1));
      if (key == "a") a = v;
      else if (key == "k") k = static_cast<int>(v);
      else if (key == "t0") t0 = v;
      else if (key == "amplitude") amp = v;
      else throw Error(ErrorCode::invalid_config, "unknown orbit spec key '" + key + "'");
    }
    const auto series = profile_recursion(a, k, *unstable_eigenpair(geom));
    return assemble(series, std::isnan(t0) ? orbit_time(series, amp) : t0);
  }
  return read_snapshot(init);
}

int cmd_experiment(const std::string& id, const std::string& cfg_path, const std::string& out, std::uint64_t seed,
                   bool seed_set, const std::string& geom) {
  ExperimentConfig cfg = cfg_path.empty() ? ExperimentConfig{} : load_config(cfg_path);
  if (!cfg.id.empty() && cfg.id != id)
    throw Error(ErrorCode::invalid_config, "config is for '" + cfg.id + "', not '" + id + "'");
  cfg.id = id;
  if (!out.empty()) cfg.out_dir = out;
  if (seed_set) cfg.seed = seed;
  if (!geom.empty()) cfg.values["geometry"] = geom;
  const auto rep = run(cfg);
  if (id == "spectrum" && !cfg.out_dir.empty()) {
    std::vector<std::pair<std::string, double>> rows;
    for (const char* key : {"lambda1", "eigen_residual", "coercivity_Aperp", "coercivity_Bperp"})
      for (const auto& m : rep.metrics)
        if (m.name == key) rows.emplace_back(key, m.value);
    write_kv(fs::path(cfg.out_dir) / "summary.kv", rows);
  }
  return report_exit(rep);
}

int cmd_ground_state(const std::string& geom, const std::string& out) {
  const auto gs = ground_state(parse_geometry(geom));
  const std::vector<std::pair<std::string, double>> rows = {
      {"h1_sq", gs->h1_sq}, {"l4_quartic", gs->critical_power}, {"energy", gs->energy},
      {"sharp_const", gs->sharp_const}, {"int_W6", gs->scattering_density}, {"pohozaev_defect", gs->pohozaev_defect}};
  for (const auto& [k, v] : rows) std::cout << k << "=" << format_double(v) << "\n";
  if (!out.empty()) {
    write_kv(fs::path(out) / "summary.kv", rows);
    fs::create_directories(fs::path(out) / "fields");
    write_snapshot(gs->W, (fs::path(out) / "fields" / "W.csv").string());
  }
  return 0;
}

int cmd_construct_orbit(double a, int k, double t0, const std::string& geom, const std::string& out, double span,
                        double step) {
  const auto g = parse_geometry(geom);
  const auto spec = unstable_eigenpair(g);
  const auto series = profile_recursion(a, k, *spec);
  const Field u = assemble(series, t0);
  std::cout << "lambda1=" << format_double(spec->lambda1) << "\n";
  std::cout << "delta=" << format_double(delta(u)) << "\n";
  std::cout << "energy=" << format_double(energy(u)) << "\n";
  for (std::size_t i = 0; i < series.solve_residuals.size(); ++i)
    std::cout << "order" << i + 1 << ".solve_residual=" << format_double(series.solve_residuals[i])
              << " rcond=" << format_double(series.conditioning[i])
              << " tail=" << format_double(series.tail_fractions[i]) << "\n";
  if (out.empty()) return 0;
  const fs::path fields = fs::path(out) / "fields";
  fs::create_directories(fields);
  for (int j = 1; j <= k; ++j) write_snapshot(series.phi[j - 1], (fields / ("Phi_" + std::to_string(j) + ".csv")).string());
  write_snapshot(u, (fields / "orbit_t0.csv").string());
  std::ofstream csv(fs::path(out) / "residual.csv");
  csv << "t,residual,delta\n";
  for (int i = 0; i * step <= span + 1e-12; ++i) {
    const double t = t0 + i * step;
    csv << format_double(t) << "," << format_double(pde_residual(series, t)) << ","
        << format_double(delta(assemble(series, t))) << "\n";
  }
  return 0;
}

int cmd_evolve(const std::string& init, const std::string& cfg_path, const std::string& geom, const std::string& out) {
  ExperimentConfig cfg = cfg_path.empty() ? ExperimentConfig{} : load_config(cfg_path);
  std::map<std::string, std::string> evolve_keys;
  EvolveConfig ec;
  double snap_every = 0.0;
  std::string geometry = geom.empty() ? kReference : geom;
  for (const auto& [key, value] : cfg.values) {
    if (key.rfind("evolve.", 0) == 0) evolve_keys[key] = value;
    else if (key == "t_end") ec.t_end = std::stod(value);
    else if (key == "direction") {
      if (value != "forward" && value != "backward") throw Error(ErrorCode::invalid_config, "direction must be forward or backward");
      ec.direction = value == "forward" ? Direction::forward : Direction::backward;
    } else if (key == "sponge") ec.sponge.enabled = value == "1" || value == "true";
    else if (key == "snapshot_every") snap_every = std::stod(value);
    else if (key == "geometry") { if (geom.empty()) geometry = value; }
    else throw Error(ErrorCode::invalid_config, "unknown evolve key '" + key + "'");
  }
  const EvolveConfig merged = [&] {
    EvolveConfig m = evolve_overrides(evolve_keys, ec);
    if (snap_every > 0.0)
      for (int i = 0; i * snap_every <= m.t_end + 1e-12; ++i) m.snapshot_times.push_back(i * snap_every);
    return m;
  }();
  const Field u0 = initial_field(init, parse_geometry(geometry));
  const auto traj = evolve(u0, merged);
  std::cout << "termination=" << to_string(traj.termination) << "\n";
  std::cout << "t_final=" << format_double(traj.t.back()) << "\n";
  std::cout << "S=" << format_double(traj.s_cum.back()) << "\n";
  std::cout << "regime=" << to_string(detect_regime(traj)) << "\n";
  if (!out.empty()) {
    write_trajectory(traj, (fs::path(out) / "traj" / "trajectory.csv").string(), (fs::path(out) / "fields").string());
    std::ofstream(fs::path(out) / "traj" / "trajectory.termination.kv", std::ios::app)
        << "regime=" << to_string(detect_regime(traj)) << "\n";
  }
  return traj.termination == Termination::numerical_blowup ? 2 : 0;
}

int cmd_modulate(const std::string& traj_csv, const std::string& out) {
  const auto samples = read_trajectory_snapshots(traj_csv);
  const auto tr = track(samples);
  const fs::path dir = out.empty() ? fs::path(traj_csv).parent_path() : fs::path(out);
  write_modulation_csv(tr, (dir / "modulation.csv").string());
  std::vector<std::pair<std::string, double>> rows = {{"samples", static_cast<double>(tr.states.size())},
                                                      {"truncated", tr.truncated ? 1.0 : 0.0},
                                                      {"bound_constant", tr.bound_constant},
                                                      {"scale_constant", tr.scale_constant}};
  std::string warning;
  try {
    const auto f = decay_fit(tr.states);
    rows.insert(rows.end(), {{"decay_rate", f.rate}, {"decay_amplitude", f.amplitude}, {"decay_residual", f.residual},
                             {"decay_reliable", f.reliable ? 1.0 : 0.0}});
    warning = f.warning;
  } catch (const Error& e) {
    warning = e.what();
  }
  write_kv(dir / "decay_fit.kv", rows);
  if (!warning.empty()) std::ofstream(dir / "decay_fit.kv", std::ios::app) << "warning=" << warning << "\n";
  if (tr.truncated) std::ofstream(dir / "decay_fit.kv", std::ios::app) << "boundary_reason=" << tr.boundary_reason << "\n";
  for (const auto& [k, v] : rows) std::cout << k << "=" << format_double(v) << "\n";
  if (!warning.empty()) std::cout << "warning=" << warning << "\n";
  return 0;
}

int cmd_virial(const std::string& traj_csv, const std::vector<double>& radii, const std::string& out) {
  const auto samples = read_trajectory_snapshots(traj_csv);
  if (samples.size() < 3) throw Error(ErrorCode::degenerate_fit, "virial defect needs at least three snapshots");
  const auto geom = samples.front().u.geometry_ptr();
  const fs::path dir = out.empty() ? fs::path(traj_csv).parent_path() : fs::path(out);
  fs::create_directories(dir);
  std::ofstream csv(dir / "virial_defect.csv");
  csv << "R,t,M,main,error_term,rate,fd_rate,defect\n";
  for (double R : radii) {
    const VirialWeights w(geom, R);
    std::vector<double> M;
    for (const auto& s : samples) M.push_back(morawetz_potential(s.u, w));
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
      const double h1 = samples[i].t - samples[i - 1].t, h2 = samples[i + 1].t - samples[i].t;
      const double fd = -h2 / (h1 * (h1 + h2)) * M[i - 1] + (h2 - h1) / (h1 * h2) * M[i] + h1 / (h2 * (h1 + h2)) * M[i + 1];
      const auto d = morawetz_rate_decomposition(samples[i].u, w);
      worst = std::max(worst, std::abs(fd - d.rate()));
      peak = std::max(peak, std::abs(d.rate()));
      csv << format_double(R) << "," << format_double(samples[i].t) << "," << format_double(M[i]) << ","
          << format_double(d.main) << "," << format_double(d.error_term) << "," << format_double(d.rate()) << ","
          << format_double(fd) << "," << format_double(fd - d.rate()) << "\n";
    }
    std::cout << "R=" << format_double(R) << " relative_defect=" << format_double(peak > 0 ? worst / peak : worst) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the 4d focusing energy-critical NLS"};
  app.require_subcommand(1);

  std::string cfg_path, out, geom;
  std::uint64_t seed = 1;
  std::map<std::string, CLI::App*> experiments;
  for (const auto& id : experiment_ids()) {
    auto* sub = app.add_subcommand(id, "Run the " + id + " experiment");
    sub->add_option("--cfg", cfg_path, "key=value config file");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "seed for randomized sweeps");
    sub->add_option("--geom", geom, "geometry override");
    experiments[id] = sub;
  }

  auto* gs_cmd = app.add_subcommand("ground-state", "Ground state summary and snapshot");
  std::string gs_geom = kReference;
  gs_cmd->add_option("--geom", gs_geom, "geometry spec");
  gs_cmd->add_option("--out", out, "output directory");

  auto* orbit_cmd = app.add_subcommand("construct-orbit", "Orbit series profiles and residuals");
  double a = -1.0, t0 = 14.0, span = 10.0, step = 0.5;
  int k = 4;
  std::string orbit_geom = kReference;
  orbit_cmd->add_option("--a", a, "branch amplitude")->required();
  orbit_cmd->add_option("--k", k, "series order")->required();
  orbit_cmd->add_option("--t0", t0, "evaluation time")->required();
  orbit_cmd->add_option("--geom", orbit_geom, "geometry spec");
  orbit_cmd->add_option("--span", span, "residual table span after t0");
  orbit_cmd->add_option("--step", step, "residual table step");
  orbit_cmd->add_option("--out", out, "output directory");

  auto* ev_cmd = app.add_subcommand("evolve", "Evolve a snapshot or an orbit point");
  std::string init;
  std::string ev_geom;
  ev_cmd->add_option("--init", init, "snapshot path, 'ground-state' or orbit:a=..,k=..,t0=..")->required();
  ev_cmd->add_option("--cfg", cfg_path, "key=value config (t_end, direction, sponge, snapshot_every, evolve.*)");
  ev_cmd->add_option("--geom", ev_geom, "geometry for generated data");
  ev_cmd->add_option("--out", out, "output directory");

  auto* mod_cmd = app.add_subcommand("modulate", "Modulation fits along stored snapshots");
  std::string traj;
  mod_cmd->add_option("--traj", traj, "trajectory CSV written by evolve")->required();
  mod_cmd->add_option("--out", out, "output directory");

  auto* vir_cmd = app.add_subcommand("virial", "Virial identity defect along stored snapshots");
  std::vector<double> radii{4.0, 8.0, 16.0};
  vir_cmd->add_option("--traj", traj, "trajectory CSV written by evolve")->required();
  vir_cmd->add_option("--R", radii, "radii")->delimiter(',');
  vir_cmd->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    for (const auto& [id, sub] : experiments)
      if (sub->parsed()) return cmd_experiment(id, cfg_path, out, seed, sub->count("--seed") > 0, geom);
    if (gs_cmd->parsed()) return cmd_ground_state(gs_geom, out);
    if (orbit_cmd->parsed()) return cmd_construct_orbit(a, k, t0, orbit_geom, out, span, step);
    if (ev_cmd->parsed()) return cmd_evolve(init, cfg_path, ev_geom, out);
    if (mod_cmd->parsed()) return cmd_modulate(traj, out);
    if (vir_cmd->parsed()) return cmd_virial(traj, radii, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
