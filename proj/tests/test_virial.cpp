#include <cmath>

#include "critnls/orbit.hpp"
#include "critnls/virial.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

GeometryPtr reference() {
  static GeometryPtr g = make_geometry(GeometryKind::radial, 200.0, 4096);
  return g;
}

// Smallest c > 0 with E(c f) = target: golden-section search for the peak
// of c -> E(c f), then bisection below it.
double energy_level_scale(const Field& f, double target) {
  auto e = [&](double c) { return energy(c * f); };
  double a = 0.0, b = 3.0;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 100; ++i) {
    const double x1 = b - r * (b - a), x2 = a + r * (b - a);
    (e(x1) < e(x2) ? a : b) = e(x1) < e(x2) ? x1 : x2;
  }
  double lo = 0.0, hi = 0.5 * (a + b);
  REQUIRE(e(hi) >= target);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (e(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("virial weight profile") {
  const auto g = reference();
  for (double R : {1.0, 4.0, 16.0}) {
    VirialWeights w(g, R);
    const auto r = g->radii();
    const auto& phi = w.phi();
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] <= R) {
        CHECK(phi[i] == doctest::Approx(r[i] * r[i]).epsilon(1e-14));
        CHECK(w.laplacian()[i] == 8.0);
        CHECK(w.bilaplacian()[i] == 0.0);
      } else if (r[i] >= 2.0 * R) {
        CHECK(phi[i] == doctest::Approx(R * R * VirialWeights::plateau()).epsilon(1e-14));
        CHECK(w.phi_r()[i] == 0.0);
        CHECK(w.bilaplacian()[i] == 0.0);
      }
    }
    const auto& c = w.region_counts();
    CHECK(c[0] + c[1] + c[2] == g->size());
    CHECK(c[1] > 0);
  }
  // Derivatives are continuous through both joints.
  for (int k = 0; k <= 4; ++k) {
    for (double s : {1.0, 2.0}) {
      const double left = VirialWeights::psi(s - 1e-9, k);
      const double right = VirialWeights::psi(s + 1e-9, k);
      CHECK(std::abs(left - right) < 1e-6 * (1.0 + std::abs(left)));
    }
  }
  // psi increases to its plateau.
  for (double s = 0.01; s < 2.0; s += 0.01) CHECK(VirialWeights::psi(s, 1) >= 0.0);

  // Bound constants settle under refinement.
  VirialWeights coarse(make_geometry(GeometryKind::radial, 200.0, 2048), 8.0);
  VirialWeights fine(g, 8.0);
  for (int k = 0; k <= 4; ++k) {
    CHECK(fine.bound_constants()[k] > 0.0);
    CHECK(std::abs(coarse.bound_constants()[k] / fine.bound_constants()[k] - 1.0) < 0.01);
  }
  CHECK_THROWS_AS(VirialWeights(g, 0.0), Error);
}

TEST_CASE("Morawetz quantities at the ground state") {
  const auto g = reference();
  const auto gs = ground_state(g);
  for (double R : {4.0, 8.0, 16.0}) {
    VirialWeights w(g, R);
    CHECK(morawetz_potential(gs->W, w) == 0.0);
    const auto d = morawetz_rate_decomposition(gs->W, w);
    CHECK(std::abs(d.main) < 1e-8 * 8.0 * gs->h1_sq);
    CHECK(std::abs(d.error_term) < 1e-8 * 8.0 * gs->h1_sq);
    CHECK(d.rate() == doctest::Approx(d.main + d.error_term));
  }
  // Any real field has zero potential.
  VirialWeights w(g, 3.0);
  const Field real = Field::from_radial(g, [](double r) { return std::exp(-r * r) * (1.0 + r); });
  CHECK(morawetz_potential(real, w) == 0.0);
}

TEST_CASE("Morawetz potential is controlled by delta near the orbit") {
  const auto g = reference();
  const auto spec = unstable_eigenpair(g);
  const auto s = profile_recursion(-1.0, 4, *spec);
  double worst = 0.0, best = 1e300;
  for (double amp : {1e-2, 3e-3, 1e-3, 3e-4}) {
    const Field u = assemble(s, orbit_time(s, amp));
    const double dl = delta(u);
    for (double R : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const double ratio = std::abs(morawetz_potential(u, VirialWeights(g, R))) / (R * R * dl);
      worst = std::max(worst, ratio);
      best = std::min(best, ratio);
    }
  }
  CHECK(worst < 10.0);
  CHECK(best > 0.0);
}

TEST_CASE("tails vanish for concentrated data") {
  const auto g = reference();
  const auto gs = ground_state(g);
  const Field u = Field::from_radial(g, [](double r) { return 0.4 * std::exp(-r * r / 2.0) * cplx(1.0, 0.3 * r); });
  // What remains at large R is the gap between the energy form and the
  // quadrature of |u_r|^2.
  const double floor = 1e-6 * 8.0 * h1_inner(u, u);
  double prev = 1e300;
  for (double R : {2.0, 4.0, 8.0}) {
    const auto d = morawetz_rate_decomposition(u, VirialWeights(g, R));
    const double tails = std::abs(d.hessian_tail) + std::abs(d.potential_tail) + std::abs(d.bilaplacian_term);
    CHECK(tails < std::max(prev, floor));
    prev = tails;
    // Off the threshold the bulk is 32 (E(u) - E(W)).
    CHECK(d.bulk == doctest::Approx(32.0 * (energy(u) - gs->energy)).epsilon(1e-6));
  }
  CHECK(prev < floor);
}

TEST_CASE("virial identity in general dimension") {
  for (int d : {3, 4, 5}) {
    auto g = make_geometry(GeometryKind::radial, 200.0, 4096, d);
    const auto gs = ground_state(g, {1.0});
    // Threshold-energy data below the ground state: the bulk term vanishes
    // and the rate main part is 16/(d-2) delta.
    const Field bump = Field::from_radial(g, [](double r) { return std::exp(-r * r / 4.0); });
    const Field f = axpy(gs->W, 0.2, bump);
    const double c = energy_level_scale(f, gs->energy);
    const Field u = c * f;
    REQUIRE(std::abs(energy(u) - gs->energy) < 1e-10 * gs->energy);
    const auto dec = morawetz_rate_decomposition(u, VirialWeights(g, 50.0));
    CHECK(delta(u) > 0.0);
    CHECK(dec.main == doctest::Approx(16.0 / (d - 2.0) * delta(u)).epsilon(1e-14));
    // Limited by the discrete Pohozaev defect of W on the grid.
    CHECK(std::abs(dec.bulk) < 1e-4 * dec.main);
    // The ground state is stationary in every dimension.
    const auto w = morawetz_rate_decomposition(gs->W, VirialWeights(g, 8.0));
    CHECK(std::abs(w.rate()) < 1e-6 * gs->h1_sq);
  }
}
