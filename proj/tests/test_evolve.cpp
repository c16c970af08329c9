#include <cmath>
#include <numbers>

#include "critnls/evolve.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

GeometryPtr grid() {
  static GeometryPtr g = make_geometry(GeometryKind::radial, 200.0, 2048);
  return g;
}

Field gaussian(const GeometryPtr& g, double amp, double width) {
  return Field::from_radial(g, [=](double r) { return amp * std::exp(-r * r / (width * width)); });
}

TrajectoryRecord synthetic(std::size_t n, double (*delta)(double)) {
  TrajectoryRecord r;
  r.geometry = grid();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 0.1 * i;
    r.t.push_back(t);
    r.delta.push_back(delta(t));
    r.kinetic.push_back(ground_state(grid())->h1_sq - delta(t));
    r.l4.push_back(1.0);
    r.l6.push_back(1.0);
  }
  return r;
}

}  // namespace

TEST_CASE("ground state is stationary") {
  const auto gs = ground_state(grid());
  EvolveConfig cfg;
  cfg.t_end = 2.0;
  const auto tr = evolve(gs->W, cfg);
  CHECK(tr.termination == Termination::reached_end);
  CHECK(tr.t.back() == doctest::Approx(2.0));
  double worst = 0.0;
  for (double d : tr.delta) worst = std::max(worst, std::abs(d));
  CHECK(worst < 1e-5);
  CHECK(tr.energy_drift < 1e-6);
  // Only the phase rotates: W(t) = W for the exact flow.
  CHECK(h1_norm(tr.final_field - gs->W) < 1e-4 * std::sqrt(gs->h1_sq));

  const Field w2 = apply_symmetry(gs->W, 0.0, 2.0, {0, 0, 0, 0});
  cfg.t_end = 1.0;
  const auto tr2 = evolve(w2, cfg);
  CHECK(std::abs(tr2.delta.back() - tr2.delta.front()) < 1e-5);
}

TEST_CASE("small data disperse") {
  const auto g = grid();
  EvolveConfig cfg;
  cfg.t_end = 400.0;
  cfg.sponge.enabled = true;
  cfg.tolerance = 1e-6;
  const Field u0 = gaussian(g, 0.3, 1.5);
  const auto tr = evolve(u0, cfg);
  CHECK(tr.termination == Termination::dispersed);
  RegimeOptions few;
  few.min_samples = 10;
  INFO("samples " << tr.size());
  CHECK(detect_regime(tr, few) == Regime::scattering_like);
  // Small-data bound S <~ ||grad u0||^6.
  CHECK(tr.s_cum.back() < std::pow(h1_inner(u0, u0), 3));
  for (std::size_t i = 1; i < tr.size(); ++i) {
    CHECK(tr.s_cum[i] >= tr.s_cum[i - 1]);
    CHECK(tr.t[i] > tr.t[i - 1]);
  }
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (tr.flux[i] > 1e-12) CHECK(tr.energy[i] <= tr.energy[i - 1] + 1e-9);
}

TEST_CASE("scattering size of the ground state") {
  const auto gs = ground_state(grid());
  EvolveConfig cfg;
  cfg.t_end = 1.0;
  const auto tr = evolve(gs->W, cfg);
  const double w6 = 16.0 * std::numbers::pi * std::numbers::pi / 5.0;
  CHECK(std::abs(scattering_size(tr, 0.0, 1.0) - w6) / w6 < 1e-4);
  const double whole = scattering_size(tr, 0.1, 0.9);
  const double split = scattering_size(tr, 0.1, 0.4321) + scattering_size(tr, 0.4321, 0.9);
  CHECK(std::abs(whole - split) < 1e-12 * whole);
  CHECK_THROWS_AS(scattering_size(tr, -1.0, 0.5), Error);
  CHECK_THROWS_AS(scattering_size(tr, 0.5, 0.2), Error);

  const auto zero = evolve(Field::zeros(grid()), cfg);
  CHECK(scattering_size(zero, 0.0, 1.0) == 0.0);
}

TEST_CASE("time reversal") {
  const auto g = grid();
  const Field u0 = Field::from_radial(g, [](double r) { return cplx(0.8 * std::exp(-r * r / 4), 0.2 * std::exp(-r * r)); });
  EvolveConfig cfg;
  cfg.t_end = 1.0;
  const auto there = evolve(u0, cfg);
  const auto back = evolve(there.final_field.conj(), cfg);
  const double err = h1_norm(back.final_field - u0.conj());
  CHECK(err < 10.0 * there.error_estimate);

  // A backward run is the conjugate of a forward run of the conjugate.
  cfg.direction = Direction::backward;
  const auto bw = evolve(u0, cfg);
  CHECK(bw.t.back() == doctest::Approx(-1.0));
  for (std::size_t i = 1; i < bw.size(); ++i) CHECK(bw.t[i] < bw.t[i - 1]);
  cfg.direction = Direction::forward;
  const auto fw = evolve(u0.conj(), cfg);
  CHECK(h1_norm(bw.final_field - fw.final_field.conj()) < 1e-12 * h1_norm(u0));
}

TEST_CASE("schemes agree") {
  const auto g = grid();
  const Field u0 = gaussian(g, 1.0, 2.0);
  EvolveConfig cfg;
  cfg.t_end = 0.5;
  cfg.snapshot_times = {0.25};
  const auto a = evolve(u0, cfg);
  cfg.scheme = "strang2";
  const auto b = evolve(u0, cfg);
  CHECK(h1_norm(a.final_field - b.final_field) < 1e-5 * h1_norm(u0));
  REQUIRE(a.snapshots.size() == 1);
  CHECK(a.snapshots[0].t >= 0.25 - 1e-12);
  CHECK(a.snapshots[0].t < 0.3);
}

TEST_CASE("cartesian backend follows the radial flow") {
  const auto cart = make_geometry(GeometryKind::cartesian4, 6.0, 24, 4);
  const auto rad = make_geometry(GeometryKind::radial, 50.0, 1024);
  auto profile = [](double r) { return 0.5 * std::exp(-r * r / 2.0); };
  const Field uc = Field::from_points(cart, [&](const Point4& x) {
    return profile(std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]));
  });
  const Field ur = Field::from_radial(rad, profile);
  EvolveConfig cfg;
  cfg.t_end = 0.2;
  cfg.tolerance = 1e-6;
  const auto a = evolve(uc, cfg);
  const auto b = evolve(ur, cfg);
  CHECK(a.energy_drift < 1e-6);
  CHECK(a.kinetic.back() == doctest::Approx(b.kinetic.back()).epsilon(0.02));
}

TEST_CASE("config validation") {
  const Field u0 = gaussian(grid(), 0.1, 1.0);
  EvolveConfig cfg;
  cfg.dt_min = 1.0;
  CHECK_THROWS_AS(evolve(u0, cfg), Error);
  cfg = {};
  cfg.scheme = "euler";
  CHECK_THROWS_AS(evolve(u0, cfg), Error);
  cfg = {};
  cfg.t_end = 1.0;
  cfg.dt_min = 1e-3;
  cfg.dt_init = 1e-3;
  cfg.dt_max = 1e-3;
  cfg.tolerance = 1e-16;
  try {
    evolve(gaussian(grid(), 1.0, 1.0), cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stiffness_failure);
  }
  auto g5 = make_geometry(GeometryKind::radial, 100.0, 512, 5);
  CHECK_THROWS_AS(evolve(Field::zeros(g5), EvolveConfig{}), Error);
}

TEST_CASE("regime classification on synthetic records") {
  auto conv = synthetic(300, [](double t) { return 0.05 * std::exp(-0.3 * t); });
  conv.termination = Termination::reached_end;
  CHECK(detect_regime(conv) == Regime::converging_to_W);
  CHECK(detect_regime(synthetic(50, [](double t) { return 0.05 * std::exp(-0.3 * t); })) == Regime::undetermined);

  auto blow = synthetic(300, [](double t) { return -0.01 * std::exp(0.3 * t); });
  blow.termination = Termination::blowup_threshold;
  CHECK(detect_regime(blow) == Regime::blowup_like);

  auto flat = synthetic(300, [](double) { return 0.05; });
  CHECK(detect_regime(flat) == Regime::undetermined);
}
