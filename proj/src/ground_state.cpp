#include "critnls/ground_state.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace critnls {

namespace {

struct Shape {
  double c;  // d(d-2)
  double m;  // (d-2)/2
};

Shape shape(int d) { return {d * (d - 2.0), 0.5 * (d - 2.0)}; }

// int_R^inf W^p r^{d-1} dr by Simpson in t = 1/r (the integrand decays like
// r^{-d-1} there, so the mapped integrand is smooth up to t = 0).
double tail_integral(double R, int d) {
  const double p = critical_exponent(d);
  const int n = 4000;
  const double tmax = 1.0 / R;
  const double h = tmax / n;
  auto g = [&](double t) {
    if (t == 0.0) return 0.0;
    const double r = 1.0 / t;
    return std::pow(ground_state_profile(r, d), p) * std::pow(r, d - 1) * r * r;
  };
  double s = g(0.0) + g(tmax);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return s * h / 3.0;
}

double full_integral(int d) {
  // int_0^inf (1 + r^2/c)^{-d} r^{d-1} dr = (c^{d/2}/2) B(d/2, d/2).
  const auto [c, m] = shape(d);
  (void)m;
  const double half = 0.5 * d;
  return 0.5 * std::pow(c, half) * std::exp(2.0 * std::lgamma(half) - std::lgamma(2.0 * half));
}

struct CacheEntry {
  std::weak_ptr<const Geometry> geometry;
  GroundStatePtr data;
};

std::mutex cache_mutex;
std::map<const Geometry*, CacheEntry> cache;

GroundStatePtr build(const GeometryPtr& geom, double tail) {
  const int d = geom->dim();
  const double m = 0.5 * (d - 2);
  Field w = Field::from_radial(geom, [d](double r) { return ground_state_profile(r, d); });
  Field w1 = Field::from_radial(
      geom, [d, m](double r) { return m * ground_state_profile(r, d) + r * ground_state_dr(r, d); });
  std::vector<Field> dw;
  if (!geom->is_radial()) {
    for (int j = 0; j < 4; ++j) {
      dw.push_back(Field::from_points(geom, [j](const Point4& x) {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
        return r > 0.0 ? ground_state_dr(r, 4) * x[j] / r : 0.0;
      }));
    }
  }
  auto data = std::make_shared<GroundStateData>(GroundStateData{geom, d, std::move(w), std::move(w1), std::move(dw)});
  data->tail_fraction = tail;
  const double p = critical_exponent(d);
  data->h1_sq = h1_inner(data->W, data->W);
  data->critical_power = std::pow(lp_norm(data->W, p), p);
  data->energy = 0.5 * data->h1_sq - (d - 2.0) / (2.0 * d) * data->critical_power;
  data->sharp_const = lp_norm(data->W, p) / std::sqrt(data->h1_sq);
  const double q = 2.0 * (d + 2.0) / (d - 2.0);
  data->scattering_density = std::pow(lp_norm(data->W, q), q);
  data->pohozaev_defect = std::abs(data->h1_sq - data->critical_power) / data->h1_sq;
  return data;
}

// The functionals compare against the discrete W of the same grid, which is
// meaningful even when the grid truncates part of the W mass.
GroundStatePtr grid_ground_state(const Field& f) { return ground_state(f.geometry_ptr(), {1.0}); }

}  // namespace

double ground_state_profile(double r, int d) {
  const auto [c, m] = shape(d);
  return std::pow(1.0 + r * r / c, -m);
}

double ground_state_dr(double r, int d) {
  const auto [c, m] = shape(d);
  const double s = 1.0 + r * r / c;
  return -m * std::pow(s, -m - 1.0) * 2.0 * r / c;
}

double ground_state_drr(double r, int d) {
  const auto [c, m] = shape(d);
  const double s = 1.0 + r * r / c;
  return -(2.0 * m / c) * std::pow(s, -m - 2.0) * (s - 2.0 * (m + 1.0) * r * r / c);
}

double ground_state_drrr(double r, int d) {
  const auto [c, m] = shape(d);
  const double s = 1.0 + r * r / c;
  const double g1 = -(2.0 * r / c) * (m + 1.0) * std::pow(s, -m - 3.0) * (3.0 * s - 2.0 * (m + 2.0) * r * r / c);
  return -(2.0 * m / c) * g1;
}

GroundStatePtr ground_state(const GeometryPtr& geom, const GroundStateOptions& options) {
  if (!geom) throw Error(ErrorCode::invalid_config, "ground_state needs a geometry");
  // Mass of W^p beyond the inscribed ball of the grid.
  const double tail = tail_integral(geom->extent(), geom->dim()) / full_integral(geom->dim());
  double limit = options.max_tail_fraction;
  if (limit < 0.0) limit = geom->is_radial() ? 1e-6 : 0.1;
  if (tail > limit)
    throw Error(ErrorCode::resolution_loss,
                "grid " + geom->spec() + " leaves a fraction " + format_double(tail) + " of the W mass outside",
                {tail});

  std::lock_guard<std::mutex> lock(cache_mutex);
  for (auto it = cache.begin(); it != cache.end();) {
    if (it->second.geometry.expired()) {
      it = cache.erase(it);
    } else {
      ++it;
    }
  }
  auto it = cache.find(geom.get());
  if (it != cache.end()) return it->second.data;
  auto data = build(geom, tail);
  cache[geom.get()] = {geom, data};
  return data;
}

Field ground_state_orbit_point(const GeometryPtr& geom, double theta, double lambda, const Point4& x0) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_config, "scale must be positive");
  const int d = geom->dim();
  const bool shifted = x0[0] != 0.0 || x0[1] != 0.0 || x0[2] != 0.0 || x0[3] != 0.0;
  if (geom->is_radial() && shifted)
    throw Error(ErrorCode::unsupported_on_backend, "translations need a cartesian4 geometry");
  const cplx factor = std::polar(std::pow(lambda, -0.5 * (d - 2)), theta);
  if (!shifted)
    return Field::from_radial(geom, [&](double r) { return factor * ground_state_profile(r / lambda, d); });
  return Field::from_points(geom, [&](const Point4& x) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += (x[k] - x0[k]) * (x[k] - x0[k]);
    return factor * ground_state_profile(std::sqrt(s) / lambda, 4);
  });
}

double energy(const Field& u) {
  const int d = u.geometry().dim();
  const double p = critical_exponent(d);
  return 0.5 * h1_inner(u, u) - (d - 2.0) / (2.0 * d) * std::pow(lp_norm(u, p), p);
}

double delta(const Field& u) { return grid_ground_state(u)->h1_sq - h1_inner(u, u); }

double sobolev_defect(const Field& f) {
  const double h1 = h1_norm(f);
  if (h1 == 0.0) throw Error(ErrorCode::undefined_ratio, "sobolev_defect of the zero field");
  const auto gs = grid_ground_state(f);
  return gs->sharp_const * h1 - lp_norm(f, critical_exponent(f.geometry().dim()));
}

TrappingReport trapping_check(const Field& f) {
  const auto gs = grid_ground_state(f);
  const double k = h1_inner(f, f);
  if (k > gs->h1_sq * (1.0 + 1e-12))
    throw Error(ErrorCode::out_of_regime, "trapping_check needs ||f||_H1 <= ||W||_H1", {k, gs->h1_sq});
  TrappingReport rep;
  rep.constant = gs->dim;
  rep.energy = energy(f);
  rep.kinetic_ratio = k / gs->h1_sq;
  rep.energy_ratio = rep.energy / gs->energy;
  rep.energy_per_kinetic = k > 0.0 ? rep.energy / k : 0.0;
  const double tol = 1e-10;
  rep.ordered = rep.kinetic_ratio <= rep.energy_ratio + tol;
  rep.bracketed = k == 0.0 || (rep.energy_per_kinetic >= 1.0 / rep.constant - tol &&
                               rep.energy_per_kinetic <= rep.constant + tol);
  return rep;
}

}  // namespace critnls
