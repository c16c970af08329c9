#include <filesystem>
#include <fstream>
#include <sstream>

#include "critnls/experiments.hpp"
#include "doctest.h"

using namespace critnls;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("critnls_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment config parsing") {
  std::istringstream in(
      "# comment line\n"
      "id = spectrum\n"
      "seed=42   # trailing comment\n"
      "\n"
      "tol.eigen = 1e-7\n"
      "out = /tmp/x\n");
  const auto cfg = parse_config(in);
  CHECK(cfg.id == "spectrum");
  CHECK(cfg.seed == 42);
  CHECK(cfg.out_dir == "/tmp/x");
  REQUIRE(cfg.values.size() == 1);
  CHECK(cfg.values.at("tol.eigen") == "1e-7");

  const auto eff = effective_config(cfg);
  CHECK(eff.at("tol.eigen") == "1e-7");
  CHECK(eff.at("tol.kernel") == "1e-6");
  CHECK(eff.at("geometry") == "radial:r_max=200,n=4096");

  std::istringstream bad("no equals sign\n");
  CHECK_THROWS_AS(parse_config(bad), Error);
  std::istringstream dup("a=1\na=2\n");
  CHECK_THROWS_AS(parse_config(dup), Error);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.id = "log-law";
  CHECK(effective_config(cfg).at("tol.slope") == "0.25");

  auto expect_invalid = [](const ExperimentConfig& c) {
    try {
      effective_config(c);
      FAIL("expected invalid-config");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_config);
    }
  };
  cfg.id = "nope";
  expect_invalid(cfg);
  cfg.id = "log-law";
  cfg.values["unknown.key"] = "1";
  expect_invalid(cfg);
  cfg.values.clear();
  cfg.values["eps"] = "1e-2,abc";
  expect_invalid(cfg);
  cfg.values["eps"] = "1e-2,2";
  expect_invalid(cfg);
  cfg.values.clear();
  cfg.values["k"] = "2.5";
  expect_invalid(cfg);
  cfg.values.clear();
  cfg.values["geometry"] = "radial:r_max=-1,n=10";
  CHECK_THROWS_AS(effective_config(cfg), Error);
  cfg.values.clear();
  cfg.values["evolve.tolerance"] = "1e-6";
  cfg.values["evolve.dt_max"] = "0.01";
  const auto eff = effective_config(cfg);
  const auto ev = evolve_overrides(eff, EvolveConfig{});
  CHECK(ev.tolerance == 1e-6);
  CHECK(ev.dt_max == 0.01);
  CHECK(ev.scheme == "yoshida4");
}

TEST_CASE("energy trim") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 2048);
  const auto gs = ground_state(g);
  const Field gauss = Field::from_radial(g, [](double r) { return std::exp(-r * r / 2.0); });
  const double target = gs->energy - 1e-4;
  const double c = energy_trim_scale(gauss, target);
  CHECK(energy(c * gauss) <= target);
  CHECK(energy(c * gauss) > target * (1.0 - 1e-9));
  // The smaller root: below the peak of E(c u), kinetic energy below W's.
  const double A = h1_inner(gauss, gauss);
  const double B = integrate_density(gauss, [](cplx z, std::size_t) { return std::norm(z) * std::norm(z); });
  CHECK(c * c < A / B);
  CHECK(h1_inner(c * gauss, c * gauss) < gs->h1_sq);
  // The peak of E(c u) for this Gaussian is 4 pi^2.
  CHECK(A * A / (4.0 * B) == doctest::Approx(4.0 * M_PI * M_PI).epsilon(1e-4));
  try {
    energy_trim_scale(gauss, 4.1 * M_PI * M_PI);
    FAIL("expected out-of-regime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_regime);
  }
  // Exactly at W the trim scales down by a hair.
  const double cw = energy_trim_scale(gs->W, gs->energy - 1e-6);
  CHECK(cw < 1.0);
  CHECK(cw > 0.999);
  CHECK(energy(cw * gs->W) <= gs->energy - 1e-6);
}

TEST_CASE("trajectory files round trip") {
  auto g = make_geometry(GeometryKind::radial, 40.0, 256);
  EvolveConfig cfg;
  cfg.t_end = 0.2;
  cfg.snapshot_times = {0.0, 0.1, 0.2};
  const Field u0 = Field::from_radial(g, [](double r) { return 0.5 * std::exp(-r * r); });
  const auto traj = evolve(u0, cfg);
  const fs::path dir = scratch("traj");
  const auto files = write_trajectory(traj, (dir / "traj" / "run.csv").string(), (dir / "fields").string());
  CHECK(files.size() == 3 + traj.snapshots.size());
  const std::string csv = slurp(dir / "traj" / "run.csv");
  CHECK(csv.rfind("t,energy,kinetic,delta,l4_quartic,l6_sextic,S_cum,flux\n", 0) == 0);
  CHECK(slurp(dir / "traj" / "run.termination.kv").find("termination=reached-end") != std::string::npos);
  const auto snaps = read_trajectory_snapshots((dir / "traj" / "run.csv").string());
  REQUIRE(snaps.size() == traj.snapshots.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    CHECK(snaps[i].t == traj.snapshots[i].t);
    CHECK(h1_norm(snaps[i].u - traj.snapshots[i].u) == 0.0);
  }
  CHECK_THROWS_AS(read_trajectory_snapshots((dir / "missing.csv").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("experiment reports and failure markers") {
  const fs::path dir = scratch("report");
  ExperimentConfig cfg;
  cfg.id = "ground-state-audit";
  cfg.out_dir = dir.string();
  cfg.values["random_fields"] = "4";
  cfg.values["orbit_points"] = "2";
  const auto rep = run(cfg);
  CHECK(rep.status == "pass");
  CHECK(rep.criterion_passed(1));
  CHECK(rep.criterion_passed(2));
  CHECK_FALSE(rep.criterion_passed(3));
  CHECK(fs::exists(dir / "report.kv"));
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "fields" / "W.csv"));
  CHECK_FALSE(fs::exists(dir / "FAILED"));
  const std::string kv = slurp(dir / "report.kv");
  CHECK(kv.find("status=pass") != std::string::npos);
  CHECK(kv.find("config.random_fields=4") != std::string::npos);
  CHECK(kv.find("artifact=fields/W.csv") != std::string::npos);
  for (const auto& m : rep.metrics) CHECK_FALSE(m.provenance.empty());

  // Deterministic for a fixed seed, apart from the timings.
  const auto again = run(cfg);
  REQUIRE(again.metrics.size() == rep.metrics.size());
  for (std::size_t i = 0; i < rep.metrics.size(); ++i)
    if (rep.metrics[i].name.rfind("runtime", 0) != 0) CHECK(again.metrics[i].value == rep.metrics[i].value);

  // A failing threshold gives a failed report, not an error.
  cfg.values["tol.h1_sq"] = "0";
  const auto strict = run(cfg);
  CHECK(strict.status == "fail");
  CHECK_FALSE(strict.criterion_passed(1));

  // Library errors leave a marker and a partial report.
  cfg.values.clear();
  cfg.values["geometry"] = "radial:r_max=5,n=64";
  try {
    run(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ground-state-audit") != std::string::npos);
  }
  CHECK(fs::exists(dir / "FAILED"));
  CHECK(slurp(dir / "report.kv").find("status=error") != std::string::npos);
  fs::remove_all(dir);
}
