#include "critnls/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "detail/propagator.hpp"

namespace critnls {

namespace {

using detail::LinearPropagator;

const double kW1 = 1.0 / (2.0 - std::cbrt(2.0));
const double kW0 = -std::cbrt(2.0) / (2.0 - std::cbrt(2.0));

struct StepKit {
  // Linear substeps for the Yoshida composition and the Strang step.
  std::vector<LinearPropagator> props;
};

class Stepper {
 public:
  Stepper(GeometryPtr g, const EvolveConfig& cfg) : geom_(std::move(g)), cfg_(cfg) {}

  // Advances u by dt with the main scheme; `low` receives the embedded
  // lower-order result.
  void step(std::vector<cplx>& u, std::vector<cplx>& low, double dt) {
    const StepKit& kit = kit_for(dt);
    low = u;
    if (cfg_.scheme == "strang2") {
      // Main: two half steps. Embedded: one full Strang step.
      strang(low, kit.props[0], dt);
      strang(u, kit.props[1], 0.5 * dt);
      strang(u, kit.props[1], 0.5 * dt);
      return;
    }
    strang(low, kit.props[0], dt);
    kit.props[1].apply(u);
    nonlinear(u, kW1 * dt);
    kit.props[2].apply(u);
    nonlinear(u, kW0 * dt);
    kit.props[2].apply(u);
    nonlinear(u, kW1 * dt);
    kit.props[1].apply(u);
  }

 private:
  static void nonlinear(std::vector<cplx>& u, double tau) {
    for (auto& x : u) x *= std::polar(1.0, std::norm(x) * tau);
  }
  static void strang(std::vector<cplx>& u, const LinearPropagator& half, double tau) {
    half.apply(u);
    nonlinear(u, tau);
    half.apply(u);
  }

  const StepKit& kit_for(double dt) {
    auto it = kits_.find(dt);
    if (it != kits_.end()) return it->second;
    if (kits_.size() > 64) kits_.clear();
    StepKit kit;
    const int m = cfg_.pade_order;
    kit.props.emplace_back(geom_, 0.5 * dt, m);
    if (cfg_.scheme == "strang2") {
      kit.props.emplace_back(geom_, 0.25 * dt, m);
    } else {
      kit.props.emplace_back(geom_, 0.5 * kW1 * dt, m);
      kit.props.emplace_back(geom_, 0.5 * (kW1 + kW0) * dt, m);
    }
    return kits_.emplace(dt, std::move(kit)).first->second;
  }

  GeometryPtr geom_;
  const EvolveConfig& cfg_;
  std::map<double, StepKit> kits_;
};

std::vector<double> sponge_profile(const Geometry& g, const SpongeConfig& s) {
  std::vector<double> sigma(g.size(), 0.0);
  if (!s.enabled) return sigma;
  const double r0 = s.r_start_fraction * g.extent();
  const double width = g.extent() - r0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double r = g.radii()[i];
    if (r > r0) sigma[i] = s.strength * std::pow(std::min(1.0, (r - r0) / width), 3);
  }
  return sigma;
}

void validate(const EvolveConfig& cfg) {
  if (cfg.scheme != "yoshida4" && cfg.scheme != "strang2")
    throw Error(ErrorCode::invalid_config, "unknown scheme '" + cfg.scheme + "'");
  if (!(cfg.dt_min > 0.0 && cfg.dt_min <= cfg.dt_init && cfg.dt_init <= cfg.dt_max))
    throw Error(ErrorCode::invalid_config, "need 0 < dt_min <= dt_init <= dt_max");
  if (!(cfg.tolerance > 0.0) || !(cfg.t_end >= 0.0) || !(cfg.blowup_factor > 0.0) || !(cfg.dispersal_fraction > 0.0))
    throw Error(ErrorCode::invalid_config, "tolerance, t_end and stop thresholds must be positive");
  if (cfg.sponge.enabled && !(cfg.sponge.strength > 0.0 && cfg.sponge.r_start_fraction > 0.0 &&
                              cfg.sponge.r_start_fraction < 1.0))
    throw Error(ErrorCode::invalid_config, "sponge needs strength > 0 and 0 < r_start_fraction < 1");
  if (cfg.pade_order < 1 || cfg.pade_order > 12) throw Error(ErrorCode::invalid_config, "pade_order must be in [1, 12]");
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::reached_end: return "reached-end";
    case Termination::blowup_threshold: return "blowup-threshold";
    case Termination::dispersed: return "dispersed";
    case Termination::max_steps: return "max-steps";
    case Termination::numerical_blowup: return "numerical-blowup";
  }
  return "unknown";
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::scattering_like: return "scattering-like";
    case Regime::converging_to_W: return "converging-to-W";
    case Regime::blowup_like: return "blowup-like";
    case Regime::undetermined: return "undetermined";
  }
  return "unknown";
}

TrajectoryRecord evolve(const Field& u0, const EvolveConfig& cfg, const StepObserver& observer) {
  validate(cfg);
  const GeometryPtr geom = u0.geometry_ptr();
  if (geom->dim() != 4) throw Error(ErrorCode::invalid_config, "evolve is implemented for d = 4");
  if (!u0.all_finite()) throw Error(ErrorCode::numerical_input, "initial field has non-finite values");
  const auto gs = ground_state(geom, {1.0});
  const bool backward = cfg.direction == Direction::backward;
  const double sign = backward ? -1.0 : 1.0;
  auto physical = [&](const Field& v) { return backward ? v.conj() : v; };

  TrajectoryRecord rec;
  rec.geometry = geom;
  rec.direction = cfg.direction;

  Field u = backward ? u0.conj() : u0;
  std::vector<cplx> work(u.values().begin(), u.values().end());
  std::vector<cplx> low;
  const std::vector<double> sigma = sponge_profile(*geom, cfg.sponge);
  const double mass0 = l2_inner(u, u);

  double s_cum = 0.0, flux = 0.0;
  auto record = [&](double t, double dt) {
    const double k = h1_inner(u, u);
    const double l4 = std::pow(lp_norm(u, 4.0), 4.0);
    const double l6 = std::pow(lp_norm(u, 6.0), 6.0);
    if (!rec.t.empty()) s_cum += 0.5 * (rec.l6.back() + l6) * dt;
    rec.t.push_back(sign * t);
    rec.kinetic.push_back(k);
    rec.energy.push_back(0.5 * k - 0.25 * l4);
    rec.delta.push_back(gs->h1_sq - k);
    rec.l4.push_back(l4);
    rec.l6.push_back(l6);
    rec.s_cum.push_back(s_cum);
    rec.flux.push_back(flux);
    rec.dt.push_back(dt);
    if (flux <= 1e-12 * mass0) {
      const double e0 = rec.energy.front();
      rec.energy_drift = std::max(rec.energy_drift, std::abs(rec.energy.back() - e0) / std::max(std::abs(e0), 1e-300));
    }
  };
  std::vector<double> pending = cfg.snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next_snap = 0;
  auto maybe_snapshot = [&](double t) {
    while (next_snap < pending.size() && pending[next_snap] <= t + 1e-12) {
      rec.snapshots.push_back({sign * t, physical(u)});
      ++next_snap;
    }
  };

  record(0.0, 0.0);
  double peak_l4 = rec.l4.front();
  maybe_snapshot(0.0);
  if (observer) observer(0.0, physical(u));

  int level = std::max(0, static_cast<int>(std::ceil(std::log2(cfg.dt_max / cfg.dt_init) - 1e-12)));
  int calm = 0;
  double t = 0.0;
  long steps = 0;
  auto sponge_half = [&](double dt) {
    if (!cfg.sponge.enabled) return;
    double removed = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (sigma[i] == 0.0) continue;
      const double f = std::exp(-sigma[i] * 0.5 * dt);
      removed += geom->weight(i) * std::norm(work[i]) * (1.0 - f * f);
      work[i] *= f;
    }
    flux += removed;
  };

  Stepper stepper(geom, cfg);
  rec.termination = Termination::reached_end;
  while (t < cfg.t_end) {
    if (steps >= cfg.max_steps) {
      rec.termination = Termination::max_steps;
      break;
    }
    const double dt_level = cfg.dt_max * std::ldexp(1.0, -level);
    if (dt_level < cfg.dt_min)
      throw Error(ErrorCode::stiffness_failure, "time step fell below dt_min at t = " + format_double(sign * t),
                  {sign * t, dt_level});
    // Land on t_end exactly rather than leaving a rounding-sized last step.
    const bool last = cfg.t_end - t <= dt_level * (1.0 + 1e-9);
    const double dt = last ? cfg.t_end - t : dt_level;

    const std::vector<cplx> saved = work;
    sponge_half(dt);
    stepper.step(work, low, dt);
    Field hi(geom, work);
    if (!hi.all_finite()) {
      rec.termination = Termination::numerical_blowup;
      break;
    }
    const double nh = h1_norm(hi);
    const double err = h1_norm(hi - Field(geom, low)) / std::max(nh, 1e-300);
    if (!(err <= cfg.tolerance)) {
      work = saved;
      ++rec.rejected_steps;
      ++level;
      calm = 0;
      continue;
    }
    sponge_half(dt);
    u = Field(geom, work);
    t = last ? cfg.t_end : t + dt;
    ++steps;
    rec.error_estimate += err * nh;
    record(t, dt);
    maybe_snapshot(t);
    if (observer) observer(sign * t, physical(u));

    // Grow only after a run of steps with room for the 8x error increase.
    if (err < cfg.tolerance / 32.0) {
      if (++calm >= 5 && level > 0) {
        --level;
        calm = 0;
      }
    } else {
      calm = 0;
    }
    if (rec.kinetic.back() > cfg.blowup_factor * cfg.blowup_factor * gs->h1_sq) {
      rec.termination = Termination::blowup_threshold;
      break;
    }
    peak_l4 = std::max(peak_l4, rec.l4.back());
    if (rec.l4.back() < cfg.dispersal_fraction * peak_l4) {
      rec.termination = Termination::dispersed;
      break;
    }
  }
  rec.final_field = physical(u);
  return rec;
}

double scattering_size(const TrajectoryRecord& traj, double t_a, double t_b) {
  if (traj.t.empty()) throw Error(ErrorCode::range_error, "empty trajectory");
  std::vector<double> ts = traj.t, ys = traj.l6;
  if (traj.direction == Direction::backward) {
    std::reverse(ts.begin(), ts.end());
    std::reverse(ys.begin(), ys.end());
  }
  const double lo = ts.front(), hi = ts.back();
  const double slack = 1e-12 * std::max(1.0, hi - lo);
  if (!(t_a <= t_b) || t_a < lo - slack || t_b > hi + slack)
    throw Error(ErrorCode::range_error,
                "interval [" + format_double(t_a) + ", " + format_double(t_b) + "] outside the trajectory span", {lo, hi});
  t_a = std::clamp(t_a, lo, hi);
  t_b = std::clamp(t_b, lo, hi);
  auto value_at = [&](std::size_t i, double s) {
    const double w = (s - ts[i]) / (ts[i + 1] - ts[i]);
    return ys[i] + w * (ys[i + 1] - ys[i]);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double a = std::max(t_a, ts[i]);
    const double b = std::min(t_b, ts[i + 1]);
    if (b <= a) continue;
    total += 0.5 * (value_at(i, a) + value_at(i, b)) * (b - a);
  }
  return total;
}

Regime detect_regime(const TrajectoryRecord& traj, const RegimeOptions& options) {
  const std::size_t n = traj.size();
  if (n < options.min_samples) return Regime::undetermined;
  if (traj.termination == Termination::dispersed && traj.delta.back() > 0.0) return Regime::scattering_like;

  if (traj.termination == Termination::blowup_threshold) {
    const std::size_t from = n - std::max<std::size_t>(2, n / 10);
    bool monotone = true;
    for (std::size_t i = from + 1; i < n; ++i) monotone = monotone && traj.kinetic[i] >= traj.kinetic[i - 1];
    if (monotone) return Regime::blowup_like;
    return Regime::undetermined;
  }

  // Exponential decay of delta over the second half.
  const auto gs = ground_state(traj.geometry, {1.0});
  const std::size_t from = n / 2;
  const double s0 = traj.delta[from] > 0.0 ? 1.0 : -1.0;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t m = 0;
  for (std::size_t i = from; i < n; ++i) {
    const double d = traj.delta[i];
    if (d * s0 <= 0.0 || std::abs(d) > options.max_delta_fraction * gs->h1_sq) return Regime::undetermined;
    const double x = std::abs(traj.t[i]);
    const double y = std::log(std::abs(d));
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
    ++m;
  }
  const double denom = m * stt - st * st;
  if (!(denom > 0.0)) return Regime::undetermined;
  const double slope = (m * sty - st * sy) / denom;
  const double icpt = (sy - slope * st) / m;
  double rss = 0.0;
  for (std::size_t i = from; i < n; ++i) {
    const double r = std::log(std::abs(traj.delta[i])) - (icpt + slope * std::abs(traj.t[i]));
    rss += r * r;
  }
  const double rms = std::sqrt(rss / m);
  if (-slope > options.min_rate && rms < options.max_fit_residual) return Regime::converging_to_W;
  return Regime::undetermined;
}

}  // namespace critnls
