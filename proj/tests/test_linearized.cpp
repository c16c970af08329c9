#include <cmath>
#include <random>

#include "critnls/linearized.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

GeometryPtr grid(int n) { return make_geometry(GeometryKind::radial, 200.0, n); }

double rel_l2(const Field& a, const Field& b) { return std::sqrt(l2_inner(a, a) / l2_inner(b, b)); }

}  // namespace

TEST_CASE("energy form is positive on rough fields") {
  const auto g = grid(4096);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<cplx> v(g->size());
    for (auto& x : v) x = cplx(normal(rng), normal(rng));
    const Field f(g, v);
    CHECK(h1_inner(f, f) > 0.0);
  }
  const Field one = Field::from_radial(g, [](double) { return 1.0; });
  CHECK(h1_inner(one, one) > 0.0);
}

TEST_CASE("kernel of L") {
  const auto g = grid(4096);
  const auto gs = ground_state(g);
  const Field iw = cplx(0, 1) * gs->W;
  CHECK(rel_l2(apply_L(iw), iw) < 1e-6);
  CHECK(rel_l2(apply_L(gs->W1), gs->W1) < 1e-6);
  // W itself is not in the kernel: L W = -i (Delta + 3 W^2) W = -2i W^3.
  const Field lw = apply_L(gs->W);
  const Field expect = cplx(0, -2) * pointwise(pointwise(gs->W, gs->W), gs->W);
  CHECK(rel_l2(lw - expect, expect) < 1e-5);
}

TEST_CASE("unstable eigenpair") {
  const auto fine = unstable_eigenpair(grid(4096));
  const auto mid = unstable_eigenpair(grid(2048));
  CHECK(fine->lambda1 > 0.3);
  CHECK(fine->lambda1 < 0.35);
  CHECK(std::abs(fine->lambda1 - mid->lambda1) / fine->lambda1 < 1e-4);
  // The dense coarse estimate is an independent solve on a smaller box.
  CHECK(std::abs(std::sqrt(fine->coarse_estimate) - fine->lambda1) / fine->lambda1 < 1e-3);
  CHECK(fine->eigen_residual < 1e-6);
  CHECK(fine->conjugate_residual < 1e-6);
  CHECK(fine->tail_fraction < 1e-6);
  CHECK(h1_norm(fine->e_plus) == doctest::Approx(1.0));

  const Field ep = fine->e_plus;
  const Field em = fine->e_minus();
  CHECK(rel_l2(apply_L(ep) - fine->lambda1 * ep, ep) < 1e-6);
  CHECK(rel_l2(apply_L(em) + fine->lambda1 * em, em) < 1e-6);
  // F is conserved by the linear flow, so it vanishes on growing modes.
  CHECK(std::abs(quadratic_form(ep)) < 1e-6);
  CHECK(std::abs(quadratic_form(em)) < 1e-6);
  CHECK(quadratic_form(ep, em) < -0.05);

  // Default options hit the cache.
  CHECK(unstable_eigenpair(fine->geometry).get() == fine.get());
}

TEST_CASE("quadratic form at W") {
  const auto g = grid(4096);
  const auto gs = ground_state(g);
  CHECK(quadratic_form(gs->W) / gs->h1_sq == doctest::Approx(-1.0).epsilon(1e-6));
  const Field iw = cplx(0, 1) * gs->W;
  CHECK(std::abs(quadratic_form(iw)) / gs->h1_sq < 1e-6);
  CHECK(unconstrained_minimum(g).constant == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("coercivity on both complements") {
  const auto a_fine = coercivity_Aperp(grid(4096));
  const auto a_mid = coercivity_Aperp(grid(2048));
  CHECK(a_fine.constant > 0.0);
  CHECK(a_fine.constant <= 0.5);
  CHECK(std::abs(a_fine.constant - a_mid.constant) < 0.05 * a_fine.constant);

  const auto b_fine = coercivity_Bperp(*unstable_eigenpair(grid(4096)));
  const auto b_mid = coercivity_Bperp(*unstable_eigenpair(grid(2048)));
  CHECK(b_fine.constant > 0.0);
  CHECK(std::abs(b_fine.constant - b_mid.constant) < 0.05 * b_fine.constant);
}

TEST_CASE("projection and spectral coordinates") {
  const auto g = grid(2048);
  const auto gs = ground_state(g);
  const auto spec = unstable_eigenpair(g);
  const Field bump = Field::from_radial(g, [](double r) { return cplx(std::exp(-r * r / 3), 0.5 * std::exp(-r * r)); });

  const auto fam = modulation_family(g);
  const Field p = project_out(bump, fam);
  for (const Field& z : fam) CHECK(std::abs(h1_inner(p, z)) < 1e-10 * h1_norm(bump) * h1_norm(z));
  CHECK_THROWS_AS(project_out(bump, {gs->W, 2.0 * gs->W}), Error);

  const double ap = 0.3, am = -0.2, beta = 0.7, g0 = 0.1;
  const Field perp = spectral_decompose(bump, *spec).v_perp;
  const Field v = ap * spec->e_plus + am * spec->e_minus() + cplx(0, beta) * gs->W + g0 * gs->W1 + perp;
  const auto c = spectral_decompose(v, *spec);
  CHECK(c.alpha_plus == doctest::Approx(ap).epsilon(1e-6));
  CHECK(c.alpha_minus == doctest::Approx(am).epsilon(1e-6));
  CHECK(c.beta == doctest::Approx(beta).epsilon(1e-6));
  CHECK(c.gamma0 == doctest::Approx(g0).epsilon(1e-6));
  CHECK(h1_norm(c.v_perp - perp) < 1e-8 * h1_norm(perp));
  CHECK(c.reconstruction_error < 1e-12);
  CHECK(c.constraint_residual < 1e-8);
}

TEST_CASE("linearized operator input checks") {
  CHECK_THROWS_AS(unstable_eigenpair(make_geometry(GeometryKind::cartesian4, 8.0, 16, 4)), Error);
  CHECK_THROWS_AS(apply_L(Field::zeros(make_geometry(GeometryKind::radial, 200.0, 1024, 5))), Error);
}
