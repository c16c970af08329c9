#include <cmath>
#include <numbers>
#include <sstream>

#include "critnls/geometry.hpp"
#include "doctest.h"

using namespace critnls;

namespace {

constexpr double kPi = std::numbers::pi;
const double kH1W = 32.0 * kPi * kPi / 3.0;

double w_closed(double r) { return 8.0 / (8.0 + r * r); }

}  // namespace

TEST_CASE("geometry construction and validation") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 4096);
  CHECK(g->spacing() == doctest::Approx(200.0 / 4096));
  CHECK(g->size() == 4096);
  CHECK(g->radii()[0] == doctest::Approx(0.5 * g->spacing()));

  auto c = make_geometry(GeometryKind::cartesian4, 16.0, 32);
  CHECK(c->spacing() == 1.0);
  CHECK(c->cell_volume() == 1.0);
  CHECK(c->size() == 32u * 32u * 32u * 32u);

  try {
    make_geometry(GeometryKind::radial, -1.0, 4096);
    FAIL("expected invalid-config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_config);
  }
  CHECK_THROWS_AS(make_geometry(GeometryKind::radial, 10.0, 8), Error);
  CHECK_THROWS_AS(make_geometry(GeometryKind::cartesian4, 10.0, 16, 5), Error);

  auto p = parse_geometry("radial:r_max=50,n=512,d=5");
  CHECK(p->dim() == 5);
  CHECK(p->resolution() == 512);
  CHECK(parse_geometry(p->spec())->extent() == 50.0);
}

TEST_CASE("radial quadrature of W^4 and the unit ball") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 4096);
  auto w4 = Field::from_radial(g, [](double r) { return std::pow(w_closed(r), 4); });
  const double q = integrate_density(w4, [](cplx z, std::size_t) { return z.real(); });
  CHECK(std::abs(q - kH1W) / kH1W < 1e-6);

  // Gaussian-mollified indicator; the smoothing shifts the volume by the
  // moments of the mollifier: (pi^2/2)(1 + 6 s^2 + 3 s^4).
  const double s = 0.05;
  auto fine = make_geometry(GeometryKind::radial, 4.0, 2048);
  auto ball = Field::from_radial(fine, [s](double r) { return 0.5 * std::erfc((r - 1.0) / (s * std::sqrt(2.0))); });
  const double vol = integrate_density(ball, [](cplx z, std::size_t) { return z.real(); });
  CHECK(vol == doctest::Approx(kPi * kPi / 2.0 * (1 + 6 * s * s + 3 * s * s * s * s)).epsilon(1e-8));
  CHECK(vol == doctest::Approx(kPi * kPi / 2.0).epsilon(2e-2));

  CHECK(integrate_density(Field::zeros(g), [](cplx z, std::size_t) { return z.real(); }) == 0.0);

  std::vector<double> bad(g->size(), 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(integrate(bad, *g), Error);
}

TEST_CASE("quadrature error decreases at fourth order") {
  // int_0^R W^4 |S^3| r^3 dr in closed form, u = 8 + r^2.
  auto primitive = [](double u) { return 0.5 * (-0.5 / (u * u) + 8.0 / (3.0 * u * u * u)); };
  const double exact = 2.0 * kPi * kPi * 4096.0 * (primitive(8.0 + 200.0 * 200.0) - primitive(8.0));
  double prev = 0.0;
  for (int n : {256, 512, 1024}) {
    auto g = make_geometry(GeometryKind::radial, 200.0, n);
    auto w4 = Field::from_radial(g, [](double r) { return std::pow(w_closed(r), 4); });
    const double err = std::abs(lp_norm(w4, 1.0) - exact);
    if (prev > 0.0) CHECK(prev / err > 12.0);
    prev = err;
  }
}

TEST_CASE("energy form and norms of W") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 4096);
  auto w = Field::from_radial(g, w_closed);
  CHECK(std::abs(h1_norm(w) * h1_norm(w) - kH1W) / kH1W < 1e-6);
  CHECK(std::abs(std::pow(lp_norm(w, 4), 4) - kH1W) / kH1W < 1e-6);
  CHECK(std::abs(h1_inner(w, cplx(0, 1) * w)) < 1e-12);

}

TEST_CASE("elliptic residual of W") {
  auto g = make_geometry(GeometryKind::radial, 100.0, 8192);
  auto w = Field::from_radial(g, w_closed);
  const Field w3 = pointwise(pointwise(w, w), w);
  const Field res = laplacian(w) + w3;
  CHECK(lp_norm(res, 2) < 1e-6 * lp_norm(w3, 2));
}

TEST_CASE("laplacian stencils") {
  auto g = make_geometry(GeometryKind::radial, 20.0, 2048);
  auto gauss = Field::from_radial(g, [](double r) { return std::exp(-r * r); });
  CHECK(laplacian(gauss)[0].real() == doctest::Approx(-8.0).epsilon(1e-4));

  auto one = Field::from_radial(g, [](double) { return 1.0; });
  const Field l1 = laplacian(one);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(std::abs(l1[i]) < 1e-9);

  auto c = make_geometry(GeometryKind::cartesian4, 6.0, 24);
  auto cg = Field::from_radial(c, [](double r) { return std::exp(-r * r); });
  const Field cl = laplacian(cg);
  for (std::size_t i = 0; i < cg.size(); i += 997) {
    const double r = c->radii()[i];
    CHECK(std::abs(cl[i].real() - (4 * r * r - 8) * std::exp(-r * r)) < 0.02);
  }
}

TEST_CASE("discrete integration by parts") {
  auto g = make_geometry(GeometryKind::radial, 30.0, 1024);
  auto f = Field::from_radial(g, [](double r) { return std::exp(-r * r / 4) * (1 + r); });
  auto h = Field::from_radial(g, [](double r) { return std::exp(-r * r / 9); });
  auto df = radial_derivative(f);
  auto dh = radial_derivative(h);
  const double grad = l2_inner(df, dh);
  const double lap = l2_inner(laplacian(f), h);
  CHECK(std::abs(lap + grad) < 1e-6 * lp_norm(f, 2) * lp_norm(h, 2));
  CHECK(h1_inner(f, h) == doctest::Approx(grad).epsilon(1e-6));
}

TEST_CASE("symmetry action") {
  auto g = make_geometry(GeometryKind::radial, 200.0, 4096);
  auto w = Field::from_radial(g, w_closed);
  const Field same = apply_symmetry(w, 0.0, 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(same[i] == w[i]);

  for (double lam : {0.5, 0.8, 1.3, 2.0}) {
    const Field t = apply_symmetry(w, 0.7, lam);
    CHECK(std::abs(h1_norm(t) - h1_norm(w)) / h1_norm(w) < 1e-4);
    CHECK(std::abs(lp_norm(t, 4) - lp_norm(w, 4)) / lp_norm(w, 4) < 1e-4);
  }

  const Field a = apply_symmetry(apply_symmetry(w, 0.0, 1.3), 0.0, 0.9);
  const Field b = apply_symmetry(w, 0.0, 1.17);
  CHECK(h1_norm(a - b) < 1e-4 * h1_norm(w));

  CHECK_THROWS_AS(apply_symmetry(w, 0.0, 1.0, Point4{1, 0, 0, 0}), Error);
  try {
    apply_symmetry(w, 0.0, 1e-3);
    FAIL("expected resolution loss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::resolution_loss);
    CHECK(!e.diagnostics().empty());
  }
}

TEST_CASE("cartesian translation moves the maximum") {
  auto c = make_geometry(GeometryKind::cartesian4, 8.0, 16);
  auto w = Field::from_radial(c, [](double r) { return std::exp(-r * r / 4); });
  const Field t = apply_symmetry(w, 0.0, 1.0, Point4{2.0, 0.0, 0.0, 0.0}, {0.2});
  std::size_t arg = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i]) > std::abs(t[arg])) arg = i;
  const Point4 p = c->node_point(arg);
  CHECK(std::abs(p[0] - 2.0) <= 0.5 + 1e-12);
  CHECK(std::abs(p[1]) <= 0.5 + 1e-12);
}

TEST_CASE("snapshot round trip") {
  auto g = make_geometry(GeometryKind::radial, 40.0, 64);
  auto w = Field::from_radial(g, [](double r) { return cplx(w_closed(r), 0.1 * r); });
  std::stringstream ss;
  write_snapshot(w, ss);
  const Field back = read_snapshot(ss);
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(back[i] == w[i]);

  std::stringstream bad("# nope\n");
  CHECK_THROWS_AS(read_snapshot(bad), Error);
}

TEST_CASE("geometry mismatch") {
  auto a = make_geometry(GeometryKind::radial, 40.0, 64);
  auto b = make_geometry(GeometryKind::radial, 40.0, 128);
  CHECK_THROWS_AS(h1_inner(Field::zeros(a), Field::zeros(b)), Error);
}
