#include <cmath>
#include <numbers>
#include <random>

#include "critnls/modulation.hpp"
#include "critnls/orbit.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

GeometryPtr reference() {
  static GeometryPtr g = make_geometry(GeometryKind::radial, 200.0, 4096);
  return g;
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }

}  // namespace

TEST_CASE("fit recovers group orbit points") {
  const auto g = reference();
  const double K = ground_state(g)->h1_sq;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double theta = -3.0 + 6.0 * uni(rng);
    const double lambda = std::exp(-0.5 + uni(rng));
    const auto st = fit(ground_state_orbit_point(g, theta, lambda));
    CHECK(st.converged);
    CHECK(angle_gap(st.theta, theta) < 1e-9);
    CHECK(std::abs(st.lambda / lambda - 1.0) < 1e-9);
    CHECK(std::abs(st.alpha) < 1e-9);
    CHECK(st.utilde_h1 < 1e-8 * std::sqrt(K));
    REQUIRE(st.residuals.size() == 2);
    for (double r : st.residuals) CHECK(r < 1e-8);
  }

  // Translations on a 4d box.
  auto box = make_geometry(GeometryKind::cartesian4, 6.0, 24);
  const Point4 x0{0.3, -0.2, 0.15, 0.0};
  // The Dirichlet edge inflates delta on small boxes; only the fit is tested.
  ModulationOptions wide;
  wide.delta0_fraction = 1.0;
  const auto st = fit(ground_state_orbit_point(box, 0.7, 1.1, x0), std::nullopt, wide);
  CHECK(st.residuals.size() == 6);
  CHECK(angle_gap(st.theta, 0.7) < 1e-8);
  CHECK(std::abs(st.lambda - 1.1) < 1e-8);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(st.x[k] - x0[k]) < 1e-8);
  CHECK(std::abs(st.alpha) < 1e-8);
}

TEST_CASE("alpha to first order along the unstable direction") {
  const auto g = reference();
  const auto gs = ground_state(g);
  const auto spec = unstable_eigenpair(g);
  const double eps = 1e-3;
  const double a1 = fit(axpy(gs->W, eps, spec->e_plus)).alpha;
  const double a2 = fit(axpy(gs->W, 0.5 * eps, spec->e_plus)).alpha;
  // alpha(e) = c e + O(e^2): 4 alpha(e/2) - alpha(e) removes the e^2 term.
  const double linear = 4.0 * a2 - a1;
  const double oracle = eps * h1_inner(spec->e_plus.real_part(), gs->W) / gs->h1_sq;
  CHECK(std::abs(linear - oracle) < 1e-3 * std::abs(oracle));
  CHECK(std::abs(a1 - oracle) > std::abs(linear - oracle));
}

TEST_CASE("fit composes with the group action") {
  const auto g = reference();
  const auto spec = unstable_eigenpair(g);
  const Field u = axpy(ground_state(g)->W, 0.02, cplx(0.3, 1.0) * spec->e_plus);
  const auto base = fit(u);
  const auto moved = fit(apply_symmetry(u, 0.4, 1.2));
  // Tolerance set by the cubic interpolation inside apply_symmetry.
  CHECK(angle_gap(moved.theta, base.theta + 0.4) < 1e-6);
  CHECK(std::abs(moved.lambda / (1.2 * base.lambda) - 1.0) < 1e-6);
  CHECK(std::abs(moved.alpha - base.alpha) < 1e-6);
}

TEST_CASE("fit errors") {
  const auto g = reference();
  const auto gs = ground_state(g);
  try {
    fit(0.5 * gs->W);
    FAIL("expected out-of-regime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_regime);
  }
  CHECK_THROWS_AS(fit(Field::zeros(g)), Error);
  ModulationOptions strict;
  strict.min_rcond = 2.0;
  try {
    fit(apply_symmetry(gs->W, 0.1, 1.0 + 1e-3), std::nullopt, strict);
    FAIL("expected degenerate-fit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_fit);
  }
  // A fit for delta just above the cut-off is refused, just below accepted.
  ModulationOptions narrow;
  const double d = delta(1.001 * gs->W);
  narrow.delta0_fraction = 0.99 * std::abs(d) / gs->h1_sq;
  CHECK_THROWS_AS(fit(1.001 * gs->W, std::nullopt, narrow), Error);
  narrow.delta0_fraction = 1.01 * std::abs(d) / gs->h1_sq;
  CHECK(fit(1.001 * gs->W, std::nullopt, narrow).alpha == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("tracking a static ground state") {
  const auto g = reference();
  const auto gs = ground_state(g);
  std::vector<Snapshot> samples;
  for (int i = 0; i < 5; ++i) samples.push_back({0.5 * i, gs->W});
  auto tr = track(samples);
  CHECK_FALSE(tr.truncated);
  REQUIRE(tr.states.size() == 5);
  REQUIRE(tr.velocities.size() == 5);
  for (const auto& s : tr.states) {
    CHECK(std::abs(s.theta) < 1e-10);
    CHECK(std::abs(s.lambda - 1.0) < 1e-10);
    CHECK(std::abs(s.alpha) < 1e-10);
  }
  for (const auto& v : tr.velocities) CHECK(std::abs(v.log_lambda) < 1e-10);

  // A sample far from the orbit ends the sequence.
  samples.insert(samples.begin() + 3, Snapshot{1.25, 0.5 * gs->W});
  tr = track(samples);
  CHECK(tr.truncated);
  CHECK(tr.boundary == 3);
  CHECK(tr.states.size() == 3);
  CHECK(tr.boundary_reason.find("out-of-regime") != std::string::npos);
}

TEST_CASE("theta is unwrapped along a rotating sequence") {
  const auto g = reference();
  std::vector<Snapshot> samples;
  for (int i = 0; i < 12; ++i) samples.push_back({0.1 * i, ground_state_orbit_point(g, 0.9 * i, 1.0)});
  const auto tr = track(samples);
  REQUIRE(tr.states.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(tr.states[i].theta - 0.9 * i) < 1e-9);
  CHECK(tr.velocities[5].theta == doctest::Approx(9.0).epsilon(1e-8));
}

TEST_CASE("decay fit") {
  std::vector<double> t, d;
  for (int i = 0; i < 40; ++i) {
    t.push_back(0.1 * i);
    d.push_back(3.0 * std::exp(-2.0 * t.back()));
  }
  auto f = decay_fit(t, d);
  CHECK(std::abs(f.rate - 2.0) < 1e-6);
  CHECK(std::abs(f.amplitude - 3.0) < 1e-6);
  CHECK(f.residual < 1e-10);
  CHECK(f.reliable);

  // Negative delta: fitted on |delta|.
  for (double& x : d) x = -x;
  CHECK(decay_fit(t, d).rate == doctest::Approx(2.0).epsilon(1e-9));

  std::vector<double> flat(40, 0.25);
  f = decay_fit(t, flat);
  CHECK(f.rate == 0.0);
  CHECK(f.amplitude == doctest::Approx(0.25));
  CHECK_FALSE(f.reliable);
  CHECK_FALSE(f.warning.empty());

  // A bump in the middle of a decay is flagged.
  std::vector<double> bumpy;
  for (int i = 0; i < 40; ++i) bumpy.push_back(std::exp(-2.0 * t[i]) * (i == 20 ? 50.0 : 1.0));
  f = decay_fit(t, bumpy);
  CHECK_FALSE(f.reliable);
  CHECK(f.warning.find("monotone") != std::string::npos);

  std::vector<double> few_t(t.begin(), t.begin() + 10), few_d(10, 1.0);
  CHECK_THROWS_AS(decay_fit(few_t, few_d), Error);
  d[7] = -d[7];
  CHECK_THROWS_AS(decay_fit(t, d), Error);
}

TEST_CASE("modulation along the subcritical heteroclinic orbit") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 2048);
  const auto spec = unstable_eigenpair(g);
  const auto series = profile_recursion(-1.0, 4, *spec);
  EvolveConfig cfg;
  cfg.t_end = 6.0;
  cfg.tolerance = 1e-7;
  for (int i = 0; i <= 24; ++i) cfg.snapshot_times.push_back(0.25 * i);
  const auto traj = evolve(assemble(series, orbit_time(series, 0.01)), cfg);
  const auto tr = track(traj);
  REQUIRE_FALSE(tr.truncated);
  REQUIRE(tr.states.size() == 25);

  // Parameters settle while delta decays.
  const auto& s = tr.states;
  const double early = std::abs(std::log(s[4].lambda / s[0].lambda));
  const double late = std::abs(std::log(s[24].lambda / s[20].lambda));
  CHECK(late < 0.5 * early);
  CHECK(angle_gap(s[24].theta, s[20].theta) < 0.5 * angle_gap(s[4].theta, s[0].theta));
  for (const auto& st : s) CHECK(st.delta > 0.0);
  CHECK(s.back().delta < 0.3 * s.front().delta);
  CHECK(std::isfinite(tr.bound_constant));
  CHECK(tr.bound_constant > 0.0);
  CHECK(tr.scale_constant <= tr.bound_constant);

  const auto f = decay_fit(s);
  CHECK(std::abs(f.rate / spec->lambda1 - 1.0) < 0.03);
}
