#include "critnls/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace critnls {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// a with h1_inner(f, g) = Re sum_i a_i conj(g_i).
std::vector<cplx> energy_dual(const Field& f) {
  const Geometry& g = f.geometry();
  if (!g.is_radial()) {
    const Field lap = laplacian(f);
    std::vector<cplx> a(lap.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -g.cell_volume() * lap[i];
    return a;
  }
  const auto band = g.energy_band();
  const auto v = f.values();
  const std::size_t n = v.size();
  std::vector<cplx> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] += band[4 * i] * v[i];
    for (std::size_t k = 1; k < 4 && i + k < n; ++k) {
      a[i] += band[4 * i + k] * v[i + k];
      a[i + k] += band[4 * i + k] * v[i];
    }
  }
  return a;
}

double pair(const cplx& a, const cplx& f) { return a.real() * f.real() + a.imag() * f.imag(); }

// W, W'/r and (W'/r)'/r in closed form.
struct Profile {
  double w, q, qq;
};

Profile profile(double r, int d) {
  const double c = d * (d - 2.0);
  const double m = 0.5 * (d - 2.0);
  const double s = 1.0 + r * r / c;
  return {std::pow(s, -m), -(2.0 * m / c) * std::pow(s, -m - 1.0),
          (4.0 * m * (m + 1.0) / (c * c)) * std::pow(s, -m - 2.0)};
}

struct Params {
  double theta = 0.0;
  double s = 0.0;  // log lambda
  Point4 x{};
};

struct System {
  Eigen::VectorXd G;
  Eigen::MatrixXd J;
  double alpha = 0.0;
};

// G_z = (u - T W, T z)_H1 over the generators z and its Jacobian in
// (theta, log lambda, x). du is the dual of u.
System assemble_system(const Field& u, const std::vector<cplx>& du, const Params& p) {
  const Geometry& g = u.geometry();
  const int d = g.dim();
  const double mu = 0.5 * (d - 2.0);
  const bool radial = g.is_radial();
  const int m = radial ? 2 : 6;
  const double lambda = std::exp(p.s);
  const cplx factor = std::polar(std::pow(lambda, -mu), p.theta);
  const cplx I(0.0, 1.0);

  const auto geom = u.geometry_ptr();
  std::vector<cplx> tw(u.size());
  std::vector<Point4> ys(radial ? 0 : u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    Point4 y{};
    if (radial) {
      y[0] = g.radii()[i] / lambda;
    } else {
      y = g.node_point(i);
      for (int k = 0; k < 4; ++k) y[k] = (y[k] - p.x[k]) / lambda;
      ys[i] = y;
    }
    const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]);
    tw[i] = factor * profile(r, d).w;
  }
  const auto dw = energy_dual(Field(geom, tw));

  System sys;
  sys.G = Eigen::VectorXd::Zero(m);
  sys.J = Eigen::MatrixXd::Zero(m, m);
  double tw_sq = 0.0, e_tw = 0.0;
  std::array<cplx, 6> z{}, lz{};
  std::array<std::array<cplx, 4>, 6> dz{};
  for (std::size_t i = 0; i < u.size(); ++i) {
    Point4 y{};
    if (radial)
      y[0] = g.radii()[i] / lambda;
    else
      y = ys[i];
    const double r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    const auto [w, q, qq] = profile(std::sqrt(r2), d);
    const double w1 = mu * w + r2 * q;
    z[0] = I * w;
    z[1] = w1;
    lz[0] = I * w1;
    lz[1] = mu * w1 + ((mu + 2.0) * q + r2 * qq) * r2;
    if (!radial) {
      for (int j = 0; j < 4; ++j) {
        z[2 + j] = q * y[j];
        lz[2 + j] = ((mu + 1.0) * q + qq * r2) * y[j];
        for (int k = 0; k < 4; ++k) dz[2 + j][k] = qq * y[k] * y[j] + (j == k ? q : 0.0);
        dz[0][j] = I * q * y[j];
        dz[1][j] = ((mu + 2.0) * q + r2 * qq) * y[j];
      }
    }
    const cplx e = du[i] - dw[i];
    for (int a = 0; a < m; ++a) {
      const cplx tz = factor * z[a];
      sys.G[a] += pair(e, tz);
      sys.J(a, 0) += pair(du[i], I * tz);
      sys.J(a, 1) -= pair(du[i], factor * lz[a]);
      if (!radial)
        for (int k = 0; k < 4; ++k) sys.J(a, 2 + k) -= pair(du[i], factor * dz[a][k]) / lambda;
    }
    tw_sq += pair(dw[i], tw[i]);
    e_tw += pair(e, tw[i]);
  }
  sys.alpha = e_tw / tw_sq;
  return sys;
}

Params initial_guess(const Field& u, const std::vector<cplx>& du) {
  const Geometry& g = u.geometry();
  const int d = g.dim();
  Params p;
  cplx c = 0.0;
  double peak = 0.0;
  std::size_t at = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    Point4 y{};
    if (g.is_radial())
      y[0] = g.radii()[i];
    else
      y = g.node_point(i);
    const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]);
    c += du[i] * ground_state_profile(r, d);
    if (std::abs(u[i]) > peak) {
      peak = std::abs(u[i]);
      at = i;
    }
  }
  p.theta = std::arg(c);
  if (peak > 0.0) p.s = -std::log(peak) / (0.5 * (d - 2.0));
  if (!g.is_radial()) {
    // |u|^4 centroid within a few widths of the peak.
    const Point4 x0 = g.node_point(at);
    const double reach = 3.0 * std::exp(p.s);
    Point4 acc{};
    double mass = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Point4 x = g.node_point(i);
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += (x[k] - x0[k]) * (x[k] - x0[k]);
      if (s > reach * reach) continue;
      const double w = std::norm(u[i]) * std::norm(u[i]);
      mass += w;
      for (int k = 0; k < 4; ++k) acc[k] += w * x[k];
    }
    for (int k = 0; k < 4; ++k) p.x[k] = mass > 0.0 ? acc[k] / mass : x0[k];
  }
  return p;
}

}  // namespace

ModulationState fit(const Field& u, const std::optional<ModulationState>& guess, const ModulationOptions& options) {
  if (u.empty()) throw Error(ErrorCode::invalid_config, "fit needs a field");
  if (!u.all_finite()) throw Error(ErrorCode::numerical_input, "fit of a non-finite field");
  const GroundStatePtr gs = ground_state(u.geometry_ptr(), {1.0});
  const double K = gs->h1_sq;
  const double dlt = delta(u);
  if (std::abs(dlt) >= options.delta0_fraction * K)
    throw Error(ErrorCode::out_of_regime,
                "|delta(u)| = " + format_double(std::abs(dlt)) + " is not below delta0 = " +
                    format_double(options.delta0_fraction * K),
                {dlt});

  const auto du = energy_dual(u);
  Params p;
  if (guess) {
    if (!(guess->lambda > 0.0)) throw Error(ErrorCode::invalid_config, "guess needs a positive scale");
    p.theta = guess->theta;
    p.s = std::log(guess->lambda);
    if (!u.geometry().is_radial()) p.x = guess->x;
  } else {
    p = initial_guess(u, du);
  }
  const bool radial = u.geometry().is_radial();

  System sys = assemble_system(u, du, p);
  auto worst = [&](const System& s) { return s.G.cwiseAbs().maxCoeff() / K; };
  int it = 0;
  for (; it < options.max_iterations && worst(sys) >= options.tolerance; ++it) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.J / K, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > options.min_rcond * sv(0)))
      throw Error(ErrorCode::degenerate_fit, "modulation Jacobian is near singular",
                  {sv(0), sv(sv.size() - 1)});
    const Eigen::VectorXd step = svd.solve(-sys.G / K);
    const double merit = sys.G.norm();
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 12; ++half, scale *= 0.5) {
      Params trial = p;
      trial.theta += scale * step(0);
      trial.s += scale * step(1);
      if (!radial)
        for (int k = 0; k < 4; ++k) trial.x[k] += scale * step(2 + k);
      System next = assemble_system(u, du, trial);
      if (next.G.allFinite() && next.G.norm() < merit) {
        p = trial;
        sys = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (worst(sys) >= std::max(options.tolerance, 1e-8))
    throw Error(ErrorCode::out_of_regime, "modulation Newton iteration did not converge", {worst(sys), double(it)});

  ModulationState st;
  st.theta = std::remainder(p.theta, kTwoPi);
  st.lambda = std::exp(p.s);
  st.x = p.x;
  st.alpha = sys.alpha;
  st.delta = dlt;
  st.iterations = it;
  st.converged = worst(sys) < options.tolerance;
  for (int a = 0; a < sys.G.size(); ++a) st.residuals.push_back(std::abs(sys.G[a]) / K);
  const Field tw = ground_state_orbit_point(u.geometry_ptr(), st.theta, st.lambda, radial ? Point4{} : st.x);
  st.utilde_h1 = h1_norm(axpy(u, -(1.0 + st.alpha), tw));
  return st;
}

TrackResult track(const std::vector<Snapshot>& samples, const ModulationOptions& options) {
  TrackResult out;
  std::optional<ModulationState> prev;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ModulationState st;
    try {
      st = fit(samples[i].u, prev, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::out_of_regime && e.code() != ErrorCode::degenerate_fit) throw;
      out.truncated = true;
      out.boundary = i;
      out.boundary_reason = e.what();
      break;
    }
    st.t = samples[i].t;
    if (prev) st.theta += kTwoPi * std::round((prev->theta - st.theta) / kTwoPi);
    out.states.push_back(st);
    prev = st;
  }

  const auto& s = out.states;
  if (s.size() < 2) return out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(i + 1, s.size() - 1);
    const double dt = s[b].t - s[a].t;
    ModulationVelocity v;
    v.t = s[i].t;
    v.theta = (s[b].theta - s[a].theta) / dt;
    v.log_lambda = (std::log(s[b].lambda) - std::log(s[a].lambda)) / dt;
    v.alpha = (s[b].alpha - s[a].alpha) / dt;
    double xdrift = 0.0;
    for (int k = 0; k < 4; ++k) {
      v.x[k] = (s[b].x[k] - s[a].x[k]) / dt;
      const double c = v.x[k] - v.log_lambda * s[i].x[k];
      xdrift += c * c;
    }
    const double lhs = std::sqrt(xdrift) + std::abs(v.alpha) + std::abs(v.theta) + std::abs(v.log_lambda);
    const double scale = s[i].lambda * s[i].lambda / std::abs(s[i].delta);
    v.bound_ratio = lhs * scale;
    v.scale_ratio = std::abs(v.log_lambda) * scale;
    out.bound_constant = std::max(out.bound_constant, v.bound_ratio);
    out.scale_constant = std::max(out.scale_constant, v.scale_ratio);
    out.velocities.push_back(v);
  }
  return out;
}

TrackResult track(const TrajectoryRecord& traj, const ModulationOptions& options) {
  return track(traj.snapshots, options);
}

DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& delta) {
  if (t.size() != delta.size()) throw Error(ErrorCode::invalid_config, "decay_fit needs matching t and delta");
  const std::size_t n = t.size();
  if (n < 20) throw Error(ErrorCode::degenerate_fit, "decay_fit needs at least 20 samples", {double(n)});
  const bool positive = delta[0] > 0.0;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (delta[i] == 0.0 || !std::isfinite(delta[i]) || (delta[i] > 0.0) != positive)
      throw Error(ErrorCode::degenerate_fit, "delta must be finite, nonzero and of one sign", {double(i)});
    y[i] = std::log(std::abs(delta[i]));
  }
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= n;
  ym /= n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y[i] - ym);
  }
  if (!(stt > 0.0)) throw Error(ErrorCode::degenerate_fit, "decay_fit needs distinct times");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double slope = *hi == *lo ? 0.0 : sty / stt;
  DecayFit out;
  out.rate = -slope + 0.0;
  out.amplitude = std::exp(ym - slope * tm);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (ym + slope * (t[i] - tm));
    ss += e * e;
  }
  out.residual = std::sqrt(ss / n);

  std::vector<std::string> notes;
  if (*hi - *lo < 2.0 * std::log(10.0)) notes.push_back("|delta| spans fewer than two decades");
  const double noise = std::max(3.0 * out.residual, 1e-9);
  const double dir = slope < 0.0 ? -1.0 : 1.0;
  bool monotone = slope != 0.0;
  for (std::size_t i = 1; i < n && monotone; ++i)
    if (dir * (y[i] - y[i - 1]) * (t[i] > t[i - 1] ? 1.0 : -1.0) < -noise) monotone = false;
  if (!monotone) notes.push_back("delta is not monotone beyond the fit noise");
  for (const auto& note : notes) out.warning += (out.warning.empty() ? "" : "; ") + note;
  out.reliable = notes.empty();
  return out;
}

DecayFit decay_fit(const std::vector<ModulationState>& states) {
  std::vector<double> t, d;
  for (const auto& s : states) {
    t.push_back(s.t);
    d.push_back(s.delta);
  }
  return decay_fit(t, d);
}

}  // namespace critnls
