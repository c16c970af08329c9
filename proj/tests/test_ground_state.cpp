#include <cmath>
#include <numbers>
#include <random>

#include "critnls/ground_state.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

constexpr double kPi = std::numbers::pi;
const double kK = 32.0 * kPi * kPi / 3.0;

GeometryPtr reference() {
  static GeometryPtr g = make_geometry(GeometryKind::radial, 200.0, 4096);
  return g;
}

}  // namespace

TEST_CASE("closed form W and derivatives") {
  CHECK(ground_state_profile(0.0) == 1.0);
  CHECK(ground_state_profile(std::sqrt(8.0)) == doctest::Approx(0.5));
  for (double r : {0.3, 1.0, 2.5, 7.0}) {
    const double h = 1e-4;
    const double fd1 = (ground_state_profile(r + h) - ground_state_profile(r - h)) / (2 * h);
    const double fd2 = (ground_state_dr(r + h) - ground_state_dr(r - h)) / (2 * h);
    const double fd3 = (ground_state_drr(r + h) - ground_state_drr(r - h)) / (2 * h);
    CHECK(ground_state_dr(r) == doctest::Approx(fd1).epsilon(1e-7));
    CHECK(ground_state_drr(r) == doctest::Approx(fd2).epsilon(1e-7));
    CHECK(ground_state_drrr(r) == doctest::Approx(fd3).epsilon(1e-6));
    CHECK(ground_state_drrr(r) == doctest::Approx(192 * r * (8 - r * r) / std::pow(8 + r * r, 4)));
  }
  // d = 3: (1 + r^2/3)^{-1/2}
  CHECK(ground_state_profile(1.0, 3) == doctest::Approx(1.0 / std::sqrt(4.0 / 3.0)));
}

TEST_CASE("ground state scalars on the reference grid") {
  const auto gs = ground_state(reference());
  CHECK(gs->W[0].real() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(gs->h1_sq - kK) / kK < 1e-6);
  CHECK(gs->pohozaev_defect < 1e-6);
  CHECK(std::abs(gs->energy - 8 * kPi * kPi / 3) / (8 * kPi * kPi / 3) < 1e-6);
  CHECK(std::abs(gs->energy - 0.25 * gs->h1_sq) / gs->energy < 1e-6);
  CHECK(std::abs(gs->scattering_density - 16 * kPi * kPi / 5) / (16 * kPi * kPi / 5) < 1e-4);
  CHECK(ground_state(reference()).get() == gs.get());
  CHECK(gs->dW.empty());
}

TEST_CASE("energy and delta functionals") {
  const auto gs = ground_state(reference());
  CHECK(std::abs(energy(gs->W) - 8 * kPi * kPi / 3) / (8 * kPi * kPi / 3) < 1e-6);
  CHECK(energy(Field::zeros(reference())) == 0.0);
  for (double eps : {0.1, 0.5, 0.9}) {
    const double expect = 0.5 * eps * eps * gs->h1_sq - 0.25 * std::pow(eps, 4) * gs->critical_power;
    CHECK(energy(eps * gs->W) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(delta(gs->W) == 0.0);
  CHECK(std::abs(delta(Field::zeros(reference())) - kK) / kK < 1e-6);
  CHECK(std::abs(delta(apply_symmetry(gs->W, 0.4, 1.5))) < 1e-4 * kK);
  CHECK(delta(0.95 * gs->W) > 0.0);
  CHECK(delta(1.01 * gs->W) < 0.0);
}

TEST_CASE("energy expansion in the general dimension") {
  auto g5 = make_geometry(GeometryKind::radial, 400.0, 8192, 5);
  const auto gs = ground_state(g5);
  CHECK(gs->pohozaev_defect < 1e-5);
  CHECK(gs->energy == doctest::Approx(gs->h1_sq / 5.0).epsilon(1e-5));
}

TEST_CASE("sharp Sobolev defect") {
  const auto gs = ground_state(reference());
  CHECK(std::abs(sobolev_defect(gs->W)) < 1e-6);
  CHECK(std::abs(sobolev_defect(apply_symmetry(gs->W, 1.3, 0.7))) < 1e-4);
  CHECK(std::abs(sobolev_defect(ground_state_orbit_point(reference(), 1.3, 0.7))) < 1e-6);
  auto gauss = Field::from_radial(reference(), [](double r) { return std::exp(-r * r); });
  CHECK(sobolev_defect(gauss) > 0.0);
  CHECK_THROWS_AS(sobolev_defect(Field::zeros(reference())), Error);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 1e300;
  for (int trial = 0; trial < 20; ++trial) {
    const double c1 = u(rng), c2 = u(rng), a1 = 0.2 + 2 * u(rng), a2 = 0.05 + u(rng), s = 4 * u(rng);
    auto f = Field::from_radial(reference(), [&](double r) {
      return cplx(c1, c2) * std::exp(-a1 * r * r) + cplx(c2, -c1) * std::exp(-a2 * (r - s) * (r - s));
    });
    worst = std::min(worst, sobolev_defect(f));
  }
  CHECK(worst >= -1e-8);
}

TEST_CASE("energy trapping below the threshold") {
  const auto gs = ground_state(reference());
  const auto rep = trapping_check(0.9 * gs->W);
  CHECK(rep.ordered);
  CHECK(rep.bracketed);
  CHECK(rep.kinetic_ratio == doctest::Approx(0.81));

  const auto zero = trapping_check(Field::zeros(reference()));
  CHECK(zero.kinetic_ratio == 0.0);
  CHECK(zero.energy_ratio == 0.0);
  CHECK(zero.energy == 0.0);

  const auto at = trapping_check(gs->W);
  CHECK(at.kinetic_ratio == doctest::Approx(1.0));
  CHECK(at.energy_ratio == doctest::Approx(1.0));

  try {
    trapping_check(1.1 * gs->W);
    FAIL("expected out-of-regime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_regime);
  }
}

TEST_CASE("grid too small for W") {
  auto small = make_geometry(GeometryKind::radial, 20.0, 512);
  try {
    ground_state(small);
    FAIL("expected resolution loss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::resolution_loss);
  }
  CHECK_NOTHROW(ground_state(small, {1e-2}));
}

TEST_CASE("cartesian ground state data") {
  auto c = make_geometry(GeometryKind::cartesian4, 16.0, 16);
  const auto gs = ground_state(c);
  REQUIRE(gs->dW.size() == 4);
  // d_0 W is odd in x_0.
  const std::size_t i = c->flat_index(3, 8, 8, 8);
  const std::size_t j = c->flat_index(12, 8, 8, 8);
  CHECK(gs->dW[0][i].real() == doctest::Approx(-gs->dW[0][j].real()));
  const Field shifted = ground_state_orbit_point(c, 0.0, 1.0, Point4{1.0, 0.0, 0.0, 0.0});
  CHECK(shifted[c->flat_index(8, 7, 7, 7)].real() > shifted[c->flat_index(7, 7, 7, 7)].real());
}
