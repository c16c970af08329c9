#include <algorithm>
#include <cmath>

#include "critnls/experiments.hpp"

namespace critnls {

namespace {

// Evolves both ways until dispersal and fills the scattering sizes.
void scatter_both_ways(const Field& u0, const EvolveConfig& base, LogLawSample& s) {
  EvolveConfig cfg = base;
  cfg.direction = Direction::forward;
  const auto fwd = evolve(u0, cfg);
  cfg.direction = Direction::backward;
  const auto bwd = evolve(u0, cfg);
  s.s_forward = fwd.s_cum.back();
  s.s_backward = bwd.s_cum.back();
  s.s_total = s.s_forward + s.s_backward;
  s.forward_end = to_string(fwd.termination);
  s.backward_end = to_string(bwd.termination);
  if (fwd.termination != Termination::dispersed || bwd.termination != Termination::dispersed) {
    s.valid = false;
    s.note = "no dispersal in both directions";
  }
}

// Energy trim and the subcritical checks; returns false with a note when the
// sample is rejected.
bool prepare(const Field& u, double target, const GroundStateData& gs, LogLawSample& s, Field& out) {
  try {
    s.scale = energy_trim_scale(u, target);
  } catch (const Error& e) {
    s.note = e.what();
    return false;
  }
  out = s.scale * u;
  const double e = energy(out);
  s.energy_gap = e - gs.energy;
  s.kinetic_ratio = h1_inner(out, out) / gs.h1_sq;
  if (!(e <= target)) {
    s.note = "energy above E(W) - eps^2";
    return false;
  }
  if (!(s.kinetic_ratio < 1.0)) {
    s.note = "kinetic energy not below the ground state";
    return false;
  }
  return true;
}

double slope_of(const std::vector<LogLawSample>& v, double* intercept) {
  double mx = 0.0, my = 0.0;
  std::size_t n = 0;
  for (const auto& s : v)
    if (s.valid) {
      mx += std::abs(std::log(s.eps));
      my += s.s_total;
      ++n;
    }
  if (n < 2) return 0.0;
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : v)
    if (s.valid) {
      const double x = std::abs(std::log(s.eps)) - mx;
      sxx += x * x;
      sxy += x * (s.s_total - my);
    }
  if (!(sxx > 0.0)) return 0.0;
  if (intercept) *intercept = my - sxy / sxx * mx;
  return sxy / sxx;
}

}  // namespace

LogLawReport log_law_scan(const std::vector<double>& eps_list, const LogLawOptions& options) {
  if (!options.geometry) throw Error(ErrorCode::invalid_config, "log-law scan needs a geometry");
  if (!options.geometry->is_radial() || options.geometry->dim() != 4)
    throw Error(ErrorCode::unsupported_on_backend, "log-law scan runs on 4d radial grids");
  for (double e : eps_list)
    if (!(e > 0.0 && e < 1.0)) throw Error(ErrorCode::invalid_config, "eps values must lie in (0, 1)");
  if (options.control && !(options.control_fraction > 0.0 && options.control_fraction <= 1.0))
    throw Error(ErrorCode::invalid_config, "control fraction must lie in (0, 1]");
  const auto g = options.geometry;
  const auto gs = ground_state(g);
  const auto spec = unstable_eigenpair(g);
  const auto series = profile_recursion(-1.0, options.order, *spec);

  LogLawReport rep;
  rep.lambda1 = spec->lambda1;
  rep.int_w6 = gs->scattering_density;
  rep.target = 2.0 / rep.lambda1 * rep.int_w6;

  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (double e : eps) {
    LogLawSample s;
    s.eps = e;
    s.t0 = std::abs(std::log(e)) / rep.lambda1;
    const double target = gs->energy - e * e;
    Field u0;
    bool ok = false;
    try {
      ok = prepare(assemble(series, s.t0), target, *gs, s, u0);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::out_of_regime) throw;
      s.note = err.what();
    }
    if (ok) {
      s.valid = true;
      scatter_both_ways(u0, options.evolve, s);
    }
    rep.samples.push_back(s);

    if (options.control) {
      LogLawSample c;
      c.eps = e;
      const double w = options.control_width;
      const Field gauss = Field::from_radial(g, [w](double r) { return std::exp(-r * r / (2.0 * w * w)); });
      Field v0;
      if (prepare(gauss, options.control_fraction * target, *gs, c, v0)) {
        c.valid = true;
        scatter_both_ways(v0, options.evolve, c);
      }
      rep.control.push_back(c);
    }
  }

  rep.valid_samples = std::count_if(rep.samples.begin(), rep.samples.end(), [](const auto& s) { return s.valid; });
  if (rep.valid_samples < 4)
    throw Error(ErrorCode::scan_failure, "only " + std::to_string(rep.valid_samples) + " valid samples",
                {static_cast<double>(rep.valid_samples)});
  rep.slope = slope_of(rep.samples, &rep.intercept);
  rep.monotone = true;
  double prev = -1.0;
  for (const auto& s : rep.samples) {
    if (!s.valid) continue;
    rep.monotone = rep.monotone && s.s_total >= prev;
    prev = s.s_total;
  }
  if (options.control) {
    rep.control_slope = slope_of(rep.control, nullptr);
    double lo = 1e300, hi = -1e300;
    for (const auto& c : rep.control)
      if (c.valid) {
        lo = std::min(lo, c.s_total);
        hi = std::max(hi, c.s_total);
      }
    rep.control_spread = hi >= lo ? hi - lo : 0.0;
  }
  return rep;
}

}  // namespace critnls
