#include "critnls/virial.hpp"

#include <cmath>

namespace critnls {

namespace {

// On the joint psi'(1 + t) = (1 - t)^8 q(t) where q is the degree-7 Taylor
// polynomial of (2 + 2t)(1 - t)^{-8}: psi' then matches 2 + 2t to order 7 at
// t = 0 and vanishes to order 7 at t = 1. q has positive coefficients, so psi
// increases monotonically to its plateau.
const std::array<double, 8>& joint_q() {
  static const std::array<double, 8> q = [] {
    std::array<double, 8> out{};
    auto binom7 = [](int n) {
      double b = 1.0;
      for (int i = 0; i < 7; ++i) b = b * (n - i) / (i + 1);
      return n < 7 ? 0.0 : b;
    };
    for (int k = 0; k < 8; ++k) out[k] = 2.0 * binom7(k + 7) + 2.0 * binom7(k + 6);
    return out;
  }();
  return q;
}

// psi(1 + t) as a monomial series, degree 16.
const std::array<double, 17>& joint_primitive() {
  static const std::array<double, 17> a = [] {
    std::array<double, 16> p{};
    const auto& q = joint_q();
    double c = 1.0;  // coefficients of (1 - t)^8
    for (int i = 0; i <= 8; ++i) {
      for (int k = 0; k < 8; ++k) p[i + k] += c * q[k];
      c = -c * (8 - i) / (i + 1);
    }
    std::array<double, 17> out{};
    out[0] = 1.0;
    for (int j = 0; j < 16; ++j) out[j + 1] = p[j] / (j + 1);
    return out;
  }();
  return a;
}

}  // namespace

double VirialWeights::psi(double s, int k) {
  if (k < 0 || k > 4) throw Error(ErrorCode::invalid_config, "psi derivative order must be in [0, 4]");
  if (s <= 1.0) {
    static constexpr double inner[] = {0.0, 0.0, 2.0, 0.0, 0.0};
    return k == 0 ? s * s : (k == 1 ? 2.0 * s : inner[k]);
  }
  if (s >= 2.0) return k == 0 ? plateau() : 0.0;
  const double t = s - 1.0;
  if (k == 0) {
    const auto& a = joint_primitive();
    double acc = 0.0;
    for (int j = 16; j >= 0; --j) acc = acc * t + a[j];
    return acc;
  }
  // (A q)^{(k-1)} with A = (1 - t)^8, by the product rule.
  const auto& q = joint_q();
  const int n = k - 1;
  double acc = 0.0, binom = 1.0;
  for (int j = 0; j <= n; ++j) {
    double a = std::pow(1.0 - t, 8 - j);
    for (int i = 0; i < j; ++i) a *= -(8 - i);
    double qd = 0.0;
    for (int m = 7; m >= n - j; --m) {
      double f = q[m];
      for (int i = 0; i < n - j; ++i) f *= (m - i);
      qd = qd * t + f;
    }
    acc += binom * a * qd;
    binom = binom * (n - j) / (j + 1);
  }
  return acc;
}

double VirialWeights::plateau() {
  const auto& a = joint_primitive();
  double s = 0.0;
  for (double c : a) s += c;
  return s;
}

VirialWeights::VirialWeights(GeometryPtr geometry, double R) : geometry_(std::move(geometry)), R_(R) {
  if (!geometry_) throw Error(ErrorCode::invalid_config, "virial weights need a geometry");
  if (!(R > 0.0) || !std::isfinite(R)) throw Error(ErrorCode::invalid_config, "virial radius must be positive");
  const int d = geometry_->dim();
  const auto r = geometry_->radii();
  const std::size_t n = r.size();
  phi_.resize(n);
  phi_r_.resize(n);
  phi_rr_.resize(n);
  lap_.resize(n);
  bilap_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = r[i] / R;
    std::array<double, 5> p{};
    for (int k = 0; k < 5; ++k) p[k] = std::pow(R, 2 - k) * psi(s, k);
    phi_[i] = p[0];
    phi_r_[i] = p[1];
    phi_rr_[i] = p[2];
    if (s <= 1.0) {
      lap_[i] = 2.0 * d;
      bilap_[i] = 0.0;
      ++regions_[0];
    } else {
      const double x = r[i];
      const double l0 = p[2] + (d - 1) * p[1] / x;
      const double l1 = p[3] + (d - 1) * (p[2] / x - p[1] / (x * x));
      const double l2 = p[4] + (d - 1) * (p[3] / x - 2.0 * p[2] / (x * x) + 2.0 * p[1] / (x * x * x));
      lap_[i] = l0;
      bilap_[i] = l2 + (d - 1) * l1 / x;
      ++regions_[s < 2.0 ? 1 : 2];
    }
    for (int k = 0; k < 5; ++k) bounds_[k] = std::max(bounds_[k], std::abs(p[k]) * std::pow(R, k - 2));
  }
}

namespace {

void require_match(const Field& u, const VirialWeights& w) {
  if (u.empty()) throw Error(ErrorCode::invalid_config, "virial diagnostics need a field");
  if (u.geometry_ptr() != w.geometry() && u.geometry().spec() != w.geometry()->spec())
    throw Error(ErrorCode::geometry_mismatch, "field and virial weights live on different grids");
}

// grad u per axis on cartesian4 grids.
std::array<Field, 4> gradient(const Field& u) {
  return {partial_derivative(u, 0), partial_derivative(u, 1), partial_derivative(u, 2), partial_derivative(u, 3)};
}

}  // namespace

double morawetz_potential(const Field& u, const VirialWeights& w) {
  require_match(u, w);
  const Geometry& g = u.geometry();
  const auto& dphi = w.phi_r();
  std::vector<double> dens(u.size());
  if (g.is_radial()) {
    const Field ur = radial_derivative(u);
    for (std::size_t i = 0; i < dens.size(); ++i) dens[i] = 2.0 * (dphi[i] * ur[i] * std::conj(u[i])).imag();
  } else {
    const auto grad = gradient(u);
    const auto r = g.radii();
    for (std::size_t i = 0; i < dens.size(); ++i) {
      const Point4 x = g.node_point(i);
      cplx acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += x[k] * grad[k][i];
      dens[i] = 2.0 * (dphi[i] / r[i] * acc * std::conj(u[i])).imag();
    }
  }
  return integrate(dens, g);
}

VirialRate morawetz_rate_decomposition(const Field& u, const VirialWeights& w) {
  require_match(u, w);
  const Geometry& g = u.geometry();
  const int d = g.dim();
  const double p = critical_exponent(d);
  const auto r = g.radii();
  const std::size_t n = u.size();
  const auto& phi_r = w.phi_r();
  const auto& phi_rr = w.phi_rr();
  const auto& lap = w.laplacian();
  const auto& bilap = w.bilaplacian();

  // |grad u|^2 and the Hessian contraction Re phi_jk u_j conj(u_k).
  std::vector<double> grad_sq(n), hess(n);
  if (g.is_radial()) {
    const Field ur = radial_derivative(u);
    for (std::size_t i = 0; i < n; ++i) {
      grad_sq[i] = std::norm(ur[i]);
      hess[i] = phi_rr[i] * grad_sq[i];
    }
  } else {
    const auto grad = gradient(u);
    for (std::size_t i = 0; i < n; ++i) {
      const Point4 x = g.node_point(i);
      cplx radial = 0.0;
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        radial += x[k] / r[i] * grad[k][i];
        total += std::norm(grad[k][i]);
      }
      grad_sq[i] = total;
      hess[i] = phi_rr[i] * std::norm(radial) + phi_r[i] / r[i] * (total - std::norm(radial));
    }
  }

  std::vector<double> a(n), b(n), c(n), e(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m2 = std::norm(u[i]);
    const double mp = std::pow(m2, 0.5 * p);
    a[i] = grad_sq[i];
    b[i] = mp;
    c[i] = 4.0 * hess[i] - 8.0 * grad_sq[i];
    e[i] = -((4.0 / d) * lap[i] - 8.0) * mp;
    f[i] = -bilap[i] * m2;
  }
  VirialRate out;
  out.main = 16.0 / (d - 2.0) * delta(u);
  // The energy form also counts the gradient beyond the grid, where phi is
  // constant; that piece belongs to the -8 |grad u|^2 tail.
  const double kinetic = h1_inner(u, u);
  out.bulk = 8.0 * (kinetic - integrate(b, g)) - out.main;
  out.hessian_tail = integrate(c, g) - 8.0 * (kinetic - integrate(a, g));
  out.potential_tail = integrate(e, g);
  out.bilaplacian_term = integrate(f, g);
  out.error_term = out.bulk + out.hessian_tail + out.potential_tail + out.bilaplacian_term;
  return out;
}

}  // namespace critnls
