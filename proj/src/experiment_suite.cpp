#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "critnls/virial.hpp"
#include "detail/experiments.hpp"

namespace critnls::detail {

namespace {

constexpr double kPi = std::numbers::pi;
const double kH1Sq = 32.0 * kPi * kPi / 3.0;
const double kEnergy = 8.0 * kPi * kPi / 3.0;
const double kIntW6 = 16.0 * kPi * kPi / 5.0;
constexpr double kTiny = std::numeric_limits<double>::min();

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

Line fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorCode::degenerate_fit, "line fit needs two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::degenerate_fit, "line fit needs distinct abscissae");
  return {sxy / sxx, my - sxy / sxx * mx};
}

// Smooth complex radial field: two Gaussian bumps with random weights.
Field random_smooth_field(const GeometryPtr& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double c1 = u(rng), c2 = u(rng), a1 = 0.2 + 2 * u(rng), a2 = 0.05 + u(rng), s = 4 * u(rng);
  return Field::from_radial(g, [&](double r) {
    return cplx(c1, c2) * std::exp(-a1 * r * r) + cplx(c2, -c1) * std::exp(-a2 * (r - s) * (r - s));
  });
}

std::string tag(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

EvolveConfig base_evolve(const Knobs& k) { return evolve_overrides(k.values(), EvolveConfig{}); }

std::vector<double> snapshot_grid(double t_end, double every) {
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = i * every;
    if (t > t_end + 1e-12) break;
    out.push_back(std::min(t, t_end));
  }
  return out;
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

}  // namespace

void run_ground_state_audit(const Knobs& k, std::uint64_t seed, Recorder& rec) {
  Stopwatch sw;
  const auto g = k.geometry("geometry");
  const auto gs = ground_state(g);
  rec.rel(1, "h1_sq", gs->h1_sq, kH1Sq, k.num("tol.h1_sq"), "closed form: 32 pi^2 / 3");
  rec.below(1, "pohozaev_defect", gs->pohozaev_defect, k.num("tol.pohozaev"),
            "closed form: ||W||^2 = int W^4 for the elliptic equation");
  rec.rel(1, "energy", gs->energy, kEnergy, k.num("tol.energy"), "closed form: 8 pi^2 / 3");
  rec.rel(1, "int_W6", gs->scattering_density, kIntW6, k.num("tol.int_w6"), "closed form: 16 pi^2 / 5");
  rec.below(1, "runtime_audit", sw.seconds(), k.num("budget.audit"), "budget");
  rec.info(1, "l4_quartic", gs->critical_power, "computed");
  rec.info(1, "sharp_const", gs->sharp_const, "computed");
  rec.info(1, "tail_fraction", gs->tail_fraction, "computed");
  rec.field("W", gs->W);

  sw.reset();
  std::mt19937_64 rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  double near = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < k.integer("random_fields"); ++i) {
    const Field f = random_smooth_field(g, rng);
    worst = std::min(worst, sobolev_defect(f));
    // Small perturbations of rescaled W: the defect there is set by the grid.
    const double theta = 2.0 * kPi * uni(rng), lambda = std::exp(uni(rng) - 0.5), amp = std::pow(10.0, -3.0 * uni(rng));
    near = std::min(near, sobolev_defect(axpy(ground_state_orbit_point(g, theta, lambda), amp / h1_norm(f), f)));
  }
  rec.above(2, "sobolev_defect_min", worst, -k.num("tol.sobolev_floor"), "theory: sharp Sobolev inequality");
  rec.info(2, "sobolev_defect_near_extremal_min", near, "computed: grid floor near rescaled W");
  const double lmin = std::log(k.num("orbit.lambda_min")), lmax = std::log(k.num("orbit.lambda_max"));
  double orbit = 0.0;
  for (int i = 0; i < k.integer("orbit_points"); ++i) {
    const double theta = 2.0 * kPi * uni(rng) - kPi;
    const double lambda = std::exp(lmin + (lmax - lmin) * uni(rng));
    orbit = std::max(orbit, std::abs(sobolev_defect(apply_symmetry(gs->W, theta, lambda))));
  }
  rec.below(2, "sobolev_defect_orbit_max", orbit, k.num("tol.orbit_defect"), "theory: W attains the sharp constant");
  rec.below(2, "runtime_sobolev", sw.seconds(), k.num("budget.sobolev"), "budget");
}

void run_spectrum(const Knobs& k, std::uint64_t seed, Recorder& rec) {
  Stopwatch sw;
  const auto fine = k.geometry("geometry");
  const auto coarse = k.geometry("coarse_geometry");
  const auto sf = unstable_eigenpair(fine);
  const auto sc = unstable_eigenpair(coarse);
  rec.info(3, "lambda1", sf->lambda1, "computed");
  rec.below(3, "eigen_residual", sf->eigen_residual, k.num("tol.eigen"), "definition: ||L e - lambda e|| / ||e||");
  rec.rel(3, "lambda1_agreement", sc->lambda1, sf->lambda1, k.num("tol.lambda_agreement"),
          "cross-resolution oracle: fine-grid lambda1");
  rec.below(3, "kernel_residual_iW", sf->kernel_residual_iW, k.num("tol.kernel"), "theory: L iW = 0");
  rec.below(3, "kernel_residual_W1", sf->kernel_residual_W1, k.num("tol.kernel"), "theory: L W1 = 0");
  const double af = coercivity_Aperp(fine).constant, ac = coercivity_Aperp(coarse).constant;
  const double bf = coercivity_Bperp(*sf).constant, bc = coercivity_Bperp(*sc).constant;
  rec.above(3, "coercivity_Aperp", af, kTiny, "theory: F coercive on the modulation complement");
  rec.above(3, "coercivity_Bperp", bf, kTiny, "theory: F coercive on the spectral complement");
  const double stab = k.num("tol.coercivity_stability");
  rec.rel(3, "coercivity_Aperp_stability", ac, af, stab, "cross-resolution oracle: fine-grid constant");
  rec.rel(3, "coercivity_Bperp_stability", bc, bf, stab, "cross-resolution oracle: fine-grid constant");
  rec.below(3, "runtime_spectrum", sw.seconds(), k.num("budget.spectrum"), "budget");
  rec.field("e_plus", sf->e_plus);

  sw.reset();
  const auto gs = ground_state(fine);
  rec.rel(4, "quadratic_form_W", quadratic_form(gs->W), -gs->h1_sq, k.num("tol.quadratic"),
          "closed form: F(W) = -||W||^2 by the Pohozaev identity");
  std::mt19937_64 rng(seed);
  Field dir = random_smooth_field(fine, rng);
  dir = (1.0 / h1_norm(dir)) * dir;
  const double e0 = energy(gs->W);
  std::vector<double> defects, alt;
  std::ofstream* csv = nullptr;
  std::ofstream file;
  if (rec.writing()) {
    file.open(rec.artifact("traj/quadratic_sweep.csv"));
    file << "amplitude,defect,defect_alternative\n";
    csv = &file;
  }
  for (double amp : k.list("sweep.amplitudes")) {
    const Field g = amp * dir;
    const double n2 = h1_inner(g, g);
    const double diff = energy(gs->W + g) - e0;
    defects.push_back(std::abs(diff - quadratic_form(g)) / n2);
    // Same form with W^2 |g|^2 in place of W^2 (3 (Re g)^2 + (Im g)^2).
    const double other = 0.5 * n2 - 0.5 * integrate_density(g, [&](cplx z, std::size_t i) {
      return std::norm(gs->W[i]) * std::norm(z);
    });
    alt.push_back(std::abs(diff - other) / n2);
    if (csv) *csv << format_double(amp) << "," << format_double(defects.back()) << "," << format_double(alt.back()) << "\n";
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < defects.size(); ++i) decreasing = decreasing && defects[i] < defects[i - 1];
  rec.flag(4, "sweep_defect_decreasing", decreasing, "theory: E(W + g) - E(W) - F(g) = O(||g||^3)");
  rec.below(4, "sweep_defect_ratio", defects.back() / defects.front(), k.num("tol.sweep_ratio"),
            "theory: defect / ||g||^2 -> 0");
  rec.info(4, "sweep_defect_last", defects.back(), "computed");
  rec.info(4, "sweep_alternative_last", alt.back(), "computed: alternative coefficient does not vanish");
  rec.below(4, "runtime_quadratic", sw.seconds(), k.num("budget.quadratic"), "budget");
}

void run_heteroclinic(const Knobs& k, std::uint64_t, Recorder& rec) {
  Stopwatch sw;
  const auto g = k.geometry("geometry");
  const auto spec = unstable_eigenpair(g);
  const double l1 = spec->lambda1;
  const auto orders = k.list("orders");
  int kmax = 0;
  for (double o : orders) {
    if (o != std::floor(o)) throw Error(ErrorCode::invalid_config, "orders must be integers");
    kmax = std::max(kmax, static_cast<int>(o));
  }
  const auto series = profile_recursion(-1.0, kmax, *spec);
  const double floor = pde_residual(profile_recursion(0.0, 1, *spec), 0.0);
  rec.info(5, "residual_floor", floor, "computed: elliptic residual of W on the grid");
  const double t0 = k.num("residual.t_start"), span = k.num("residual.span"), step = k.num("residual.step");
  const double keep = k.num("residual.floor_factor") * floor;
  std::ostringstream table;
  table << "k,t,residual,used\n";
  for (double o : orders) {
    const int order = static_cast<int>(o);
    OrbitSeries s = series;
    s.k = order;
    s.phi.resize(order);
    std::vector<double> ts, logs;
    for (int i = 0; i * step <= span + 1e-12; ++i) {
      const double t = t0 + i * step;
      const double r = pde_residual(s, t);
      const bool used = r > keep;
      table << order << "," << format_double(t) << "," << format_double(r) << "," << used << "\n";
      if (used) {
        ts.push_back(t);
        logs.push_back(std::log(r));
      }
    }
    if (ts.size() < 3)
      throw Error(ErrorCode::degenerate_fit, "fewer than three residual samples above the floor for k = " + tag(order));
    const Line line = fit_line(ts, logs);
    rec.rel(5, "residual_slope_k" + tag(order), line.slope, -(order + 1) * l1, k.num("tol.residual_slope"),
            "theory: residual ~ exp(-(k+1) lambda1 t), lambda1 from the eigensolver");
  }
  if (rec.writing()) std::ofstream(rec.artifact("traj/orbit_residual.csv")) << table.str();
  rec.below(5, "runtime_residual", sw.seconds(), k.num("budget.residual"), "budget");

  sw.reset();
  const int order = k.integer("k");
  const auto minus = profile_recursion(-1.0, order, *spec);
  const auto plus = profile_recursion(1.0, order, *spec);
  const double tstart = orbit_time(minus, k.num("amplitude"));
  const Field um = assemble(minus, tstart);
  const Field up = assemble(plus, tstart);
  rec.field("wminus_t0", um);
  rec.field("wplus_t0", up);
  EvolveConfig base = base_evolve(k);

  EvolveConfig fwd = base;
  fwd.t_end = k.num("forward.t_end");
  fwd.snapshot_times = snapshot_grid(fwd.t_end, k.num("snapshot_every"));
  const auto tr_fwd = evolve(um, fwd);
  rec.trajectory("wminus_forward", tr_fwd);
  const Regime reg_fwd = detect_regime(tr_fwd);
  rec.flag(7, "wminus_forward_converging", reg_fwd == Regime::converging_to_W, "theory: W- converges to W forward");
  const auto tracked = track(tr_fwd);
  if (rec.writing()) write_modulation_csv(tracked, rec.artifact("traj/wminus_forward_modulation.csv"));
  const auto fit = decay_fit(tracked.states);
  rec.rel(7, "wminus_decay_rate", fit.rate, l1, k.num("tol.rate"), "cross-module oracle: eigensolver lambda1");
  rec.info(7, "wminus_decay_fit_residual", fit.residual, fit.warning.empty() ? "computed" : "computed; " + fit.warning);

  EvolveConfig bwd = base;
  bwd.t_end = k.num("backward.t_end");
  bwd.direction = Direction::backward;
  bwd.sponge.enabled = true;
  const auto tr_bwd = evolve(um, bwd);
  rec.trajectory("wminus_backward", tr_bwd);
  rec.flag(7, "wminus_backward_scattering", detect_regime(tr_bwd) == Regime::scattering_like,
           "theory: W- scatters backward");

  EvolveConfig blow = base;
  blow.t_end = k.num("blowup.t_end");
  blow.direction = Direction::backward;
  const auto tr_blow = evolve(up, blow);
  rec.trajectory("wplus_backward", tr_blow);
  rec.flag(7, "wplus_backward_blowup", detect_regime(tr_blow) == Regime::blowup_like,
           "theory: W+ blows up backward");

  EvolveConfig pf = base;
  pf.t_end = k.num("forward.t_end");
  const auto tr_pf = evolve(up, pf);
  rec.trajectory("wplus_forward", tr_pf);
  rec.flag(7, "wplus_forward_converging", detect_regime(tr_pf) == Regime::converging_to_W,
           "theory: W+ converges to W forward");
  rec.below(7, "runtime_classification", sw.seconds(), k.num("budget.classification"), "budget");
}

namespace {

struct Bracket {
  double constant = 0.0;
  double delta_min = std::numeric_limits<double>::infinity();
  double delta_max = 0.0;
  std::size_t samples = 0;
};

// Ratios |alpha| : ||u~|| : |delta| with delta and u~ normalized by ||W||^2 and
// ||W||; C is the largest pairwise ratio or its inverse.
void add_to_bracket(Bracket& b, const ModulationState& s, double K, std::ostream* log) {
  const double d = std::abs(s.delta) / K;
  if (!(d > 0.0)) return;
  const double ra = std::abs(s.alpha) / d;
  const double ru = s.utilde_h1 / std::sqrt(K) / d;
  for (double r : {ra, ru, ru / ra}) b.constant = std::max({b.constant, r, 1.0 / r});
  b.delta_min = std::min(b.delta_min, std::abs(s.delta));
  b.delta_max = std::max(b.delta_max, std::abs(s.delta));
  ++b.samples;
  if (log)
    *log << format_double(s.delta) << "," << format_double(s.alpha) << "," << format_double(s.utilde_h1) << ","
         << format_double(ra) << "," << format_double(ru) << "\n";
}

Bracket sweep_bracket(const GeometryPtr& g, const Knobs& k, std::ostream* log) {
  const auto spec = unstable_eigenpair(g);
  const double K = ground_state(g)->h1_sq;
  ModulationOptions opts;
  opts.delta0_fraction = k.num("delta0_fraction");
  Bracket b;
  const int order = k.integer("k");
  const double amp_top = k.num("track.amplitude");
  for (double a : {-1.0, 1.0}) {
    const auto s = profile_recursion(a, order, *spec);
    // delta is linear in the amplitude to leading order.
    const double d_top = std::abs(delta(assemble(s, orbit_time(s, amp_top))));
    const double amp_lo = amp_top * k.num("sweep.delta_min") / d_top;
    const int n = k.integer("sweep.points");
    for (int i = 0; i < n; ++i) {
      const double amp = amp_lo * std::pow(amp_top / amp_lo, static_cast<double>(i) / (n - 1));
      add_to_bracket(b, fit(assemble(s, orbit_time(s, amp)), std::nullopt, opts), K, log);
    }
  }
  // Larger delta: the subcritical branch leaving W backward in time.
  const auto s = profile_recursion(-1.0, order, *spec);
  EvolveConfig cfg = evolve_overrides(k.values(), EvolveConfig{});
  // No sponge: it would strip the slowly decaying tail of W and shift delta.
  // The sweep ends at delta0, long before radiation reaches the edge.
  cfg.direction = Direction::backward;
  cfg.t_end = k.num("sweep.backward_t_end");
  for (double t : snapshot_grid(cfg.t_end, k.num("snapshot_every"))) cfg.snapshot_times.push_back(t);
  const auto traj = evolve(assemble(s, orbit_time(s, amp_top)), cfg);
  const auto tr = track(traj, opts);
  for (const auto& st : tr.states) add_to_bracket(b, st, K, log);
  return b;
}

}  // namespace

void run_delta_decay(const Knobs& k, std::uint64_t seed, Recorder& rec) {
  Stopwatch sw;
  const auto g = k.geometry("geometry");
  const auto gc = k.geometry("coarse_geometry");
  const auto gs = ground_state(g);
  const EvolveConfig base = base_evolve(k);

  EvolveConfig stat = base;
  stat.t_end = k.num("stationary.t_end");
  const auto tr = evolve(gs->W, stat);
  rec.trajectory("ground_state", tr);
  double worst = 0.0;
  for (double d : tr.delta) worst = std::max(worst, std::abs(d));
  rec.below(6, "stationary_delta_max", worst, k.num("tol.delta"), "theory: W is a stationary solution");
  rec.below(6, "stationary_energy_drift", tr.energy_drift, k.num("tol.drift"), "theory: energy conservation");
  rec.flag(6, "stationary_reached_end", tr.termination == Termination::reached_end, "theory: W is global");

  const auto spec = unstable_eigenpair(g);
  const auto series = profile_recursion(-1.0, k.integer("k"), *spec);
  const Field u0 = assemble(series, orbit_time(series, k.num("reversal.amplitude")));
  EvolveConfig rev = base;
  rev.t_end = k.num("reversal.t_end");
  const auto there = evolve(u0, rev);
  const auto back = evolve(there.final_field.conj(), rev);
  const double err = h1_norm(back.final_field - u0.conj());
  rec.below(6, "reversal_error", err, k.num("tol.reversal_factor") * there.error_estimate,
            "theory: time reversal u(t) -> conj(u(-t)); bound is a multiple of the one-way estimate");
  rec.info(6, "reversal_one_way_estimate", there.error_estimate, "computed");
  rec.below(6, "runtime_stationarity", sw.seconds(), k.num("budget.stationarity"), "budget");

  sw.reset();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double rt = 0.0;
  for (int i = 0; i < k.integer("roundtrip_points"); ++i) {
    const double theta = 2.0 * kPi * uni(rng) - kPi;
    const double lambda = std::exp(uni(rng) - 0.5);
    const auto st = fit(ground_state_orbit_point(g, theta, lambda));
    rt = std::max({rt, angle_gap(st.theta, theta), std::abs(st.lambda / lambda - 1.0), std::abs(st.alpha),
                   st.utilde_h1 / std::sqrt(gs->h1_sq)});
  }
  rec.below(8, "roundtrip_error", rt, k.num("tol.roundtrip"), "closed form: exact group orbit points");

  std::ostringstream fine_log, coarse_log;
  fine_log << "delta,alpha,utilde_h1,alpha_ratio,utilde_ratio\n";
  coarse_log << fine_log.str();
  const Bracket bf = sweep_bracket(g, k, &fine_log);
  const Bracket bc = sweep_bracket(gc, k, &coarse_log);
  if (rec.writing()) {
    std::ofstream(rec.artifact("traj/bracket_fine.csv")) << fine_log.str();
    std::ofstream(rec.artifact("traj/bracket_coarse.csv")) << coarse_log.str();
  }
  const double delta0 = k.num("delta0_fraction") * gs->h1_sq;
  rec.info(8, "bracket_constant", bf.constant, "computed");
  rec.flag(8, "bracket_finite", std::isfinite(bf.constant) && std::isfinite(bc.constant), "theory: |alpha| ~ ||u~|| ~ delta");
  rec.rel(8, "bracket_stability", bc.constant, bf.constant, k.num("tol.bracket_stability"),
          "cross-resolution oracle: fine-grid constant");
  rec.below(8, "bracket_delta_min", bf.delta_min, 1.05 * k.num("sweep.delta_min"), "sweep coverage");
  rec.above(8, "bracket_delta_coverage", bf.delta_max / delta0, k.num("tol.sweep_coverage"),
            "sweep coverage: largest delta / delta0");

  // Velocity bound along the subcritical branch converging to W.
  auto mod2 = [&](const GeometryPtr& geom, const std::string& name) {
    const auto sp = unstable_eigenpair(geom);
    const auto s = profile_recursion(-1.0, k.integer("k"), *sp);
    EvolveConfig cfg = base;
    cfg.t_end = k.num("track.t_end");
    cfg.snapshot_times = snapshot_grid(cfg.t_end, k.num("snapshot_every"));
    const auto traj = evolve(assemble(s, orbit_time(s, k.num("track.amplitude"))), cfg);
    auto res = track(traj);
    if (rec.writing()) write_modulation_csv(res, rec.artifact("traj/" + name + ".csv"));
    return std::make_pair(res, sp->lambda1);
  };
  const auto [tf, l1] = mod2(g, "track_fine");
  const auto [tc, l1c] = mod2(gc, "track_coarse");
  (void)l1c;
  rec.flag(8, "mod2_finite", std::isfinite(tf.bound_constant) && tf.bound_constant > 0.0 && !tf.truncated,
           "theory: parameter velocities bounded by delta / lambda^2");
  rec.info(8, "mod2_constant", tf.bound_constant, "computed");
  rec.rel(8, "mod2_stability", tc.bound_constant, tf.bound_constant, k.num("tol.mod2_stability"),
          "cross-resolution oracle: fine-grid constant");
  rec.below(8, "runtime_modulation", sw.seconds(), k.num("budget.modulation"), "budget");

  const auto fitres = decay_fit(tf.states);
  rec.rel(0, "decay_rate", fitres.rate, l1, k.num("tol.rate"), "cross-module oracle: eigensolver lambda1");
}

void run_virial_identity(const Knobs& k, std::uint64_t, Recorder& rec) {
  Stopwatch sw;
  const auto g = k.geometry("geometry");
  const auto gs = ground_state(g);
  const auto radii = k.list("radii");
  std::vector<VirialWeights> weights;
  for (double R : radii) weights.emplace_back(g, R);
  const double scale = 8.0 * gs->h1_sq;
  const double tol_static = k.num("tol.static");
  for (const auto& w : weights) {
    const std::string R = tag(w.radius());
    const auto d = morawetz_rate_decomposition(gs->W, w);
    rec.below(9, "M_R_W_R" + R, std::abs(morawetz_potential(gs->W, w)), tol_static, "theory: W is real");
    rec.below(9, "F_R_W_R" + R, std::abs(d.error_term) / scale, tol_static,
              "theory: F_R(W) = 0; relative to 8 ||W||^2");
  }

  const auto spec = unstable_eigenpair(g);
  const double a = k.num("a");
  if (a == 0.0) throw Error(ErrorCode::invalid_config, "a must be nonzero");
  const auto series = profile_recursion(a, k.integer("k"), *spec);
  const Field u0 = assemble(series, orbit_time(series, k.num("amplitude")));
  EvolveConfig cfg = base_evolve(k);
  cfg.t_end = k.num("t_end");
  const std::string dir = k.str("direction");
  if (dir != "forward" && dir != "backward") throw Error(ErrorCode::invalid_config, "direction must be forward or backward");
  cfg.direction = dir == "forward" ? Direction::forward : Direction::backward;
  cfg.sponge.enabled = true;

  const std::size_t nr = weights.size();
  std::vector<double> ts, deltas;
  std::vector<std::vector<double>> M(nr), rate(nr);
  auto observe = [&](double t, const Field& u) {
    ts.push_back(t);
    deltas.push_back(delta(u));
    for (std::size_t j = 0; j < nr; ++j) {
      M[j].push_back(morawetz_potential(u, weights[j]));
      rate[j].push_back(morawetz_rate_decomposition(u, weights[j]).rate());
    }
  };
  observe(0.0, u0);
  const auto traj = evolve(u0, cfg, observe);
  rec.trajectory("virial_source", traj);
  if (ts.size() < 3) throw Error(ErrorCode::degenerate_fit, "trajectory too short for finite differences");

  std::ostringstream table;
  table << "t,delta";
  for (const auto& w : weights) table << ",M_R" << tag(w.radius()) << ",rate_R" << tag(w.radius()) << ",fd_R" << tag(w.radius());
  table << "\n";
  std::vector<double> worst(nr, 0.0), peak(nr, 0.0);
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    const double h1 = ts[i] - ts[i - 1], h2 = ts[i + 1] - ts[i];
    table << format_double(ts[i]) << "," << format_double(deltas[i]);
    for (std::size_t j = 0; j < nr; ++j) {
      // Three-point derivative on a nonuniform grid.
      const double fd = -h2 / (h1 * (h1 + h2)) * M[j][i - 1] + (h2 - h1) / (h1 * h2) * M[j][i] +
                        h1 / (h2 * (h1 + h2)) * M[j][i + 1];
      worst[j] = std::max(worst[j], std::abs(fd - rate[j][i]));
      peak[j] = std::max(peak[j], std::abs(rate[j][i]));
      table << "," << format_double(M[j][i]) << "," << format_double(rate[j][i]) << "," << format_double(fd);
    }
    table << "\n";
  }
  if (rec.writing()) std::ofstream(rec.artifact("traj/virial_identity.csv")) << table.str();
  for (std::size_t j = 0; j < nr; ++j) {
    if (!(peak[j] > 0.0)) throw Error(ErrorCode::undefined_ratio, "virial rate vanishes along the trajectory");
    rec.below(9, "identity_defect_R" + tag(weights[j].radius()), worst[j] / peak[j], k.num("tol.identity"),
              "cross-module oracle: finite difference of M_R along the integrator; relative to max |rate|");
  }
  rec.below(9, "runtime_virial", sw.seconds(), k.num("budget.virial"), "budget");
}

void run_log_law(const Knobs& k, std::uint64_t, Recorder& rec) {
  Stopwatch sw;
  LogLawOptions opts;
  opts.geometry = k.geometry("geometry");
  opts.order = k.integer("k");
  opts.control = k.flag("control");
  opts.control_width = k.num("control.width");
  opts.control_fraction = k.num("control.fraction");
  opts.evolve = base_evolve(k);
  opts.evolve.t_end = k.num("t_end");
  opts.evolve.sponge.enabled = true;
  const auto eps = k.list("eps");
  const auto rep = log_law_scan(eps, opts);

  std::ostringstream table;
  table << "family,eps,abs_log_eps,t0,scale,energy_gap,kinetic_ratio,s_forward,s_backward,s_total,forward_end,"
           "backward_end,valid,note\n";
  auto rows = [&](const char* family, const std::vector<LogLawSample>& v) {
    for (const auto& s : v)
      table << family << "," << format_double(s.eps) << "," << format_double(std::abs(std::log(s.eps))) << ","
            << format_double(s.t0) << "," << format_double(s.scale) << "," << format_double(s.energy_gap) << ","
            << format_double(s.kinetic_ratio) << "," << format_double(s.s_forward) << ","
            << format_double(s.s_backward) << "," << format_double(s.s_total) << "," << s.forward_end << ","
            << s.backward_end << "," << s.valid << "," << s.note << "\n";
  };
  rows("threshold", rep.samples);
  rows("control", rep.control);
  if (rec.writing()) std::ofstream(rec.artifact("traj/log_law.csv")) << table.str();

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : rep.samples)
    if (s.valid) {
      lo = std::min(lo, s.eps);
      hi = std::max(hi, s.eps);
    }
  rec.info(10, "lambda1", rep.lambda1, "computed");
  rec.info(10, "intercept", rep.intercept, "computed");
  rec.rel(10, "log_law_slope", rep.slope, rep.target, k.num("tol.slope"),
          "theory: (2 / lambda1) int W^6 with lambda1 and int W^6 computed");
  rec.above(10, "log_law_decades", std::log10(hi / lo), k.num("min_decades"), "scan coverage");
  rec.flag(10, "log_law_monotone", rep.monotone, "brute force: S nondecreasing as eps decreases");
  if (opts.control) {
    rec.below(10, "control_slope_ratio", std::abs(rep.control_slope) / rep.target, k.num("tol.control"),
              "theory: off-threshold data have bounded S");
    rec.info(10, "control_spread", rep.control_spread, "computed");
  }
  rec.below(10, "runtime_log_law", sw.seconds(), k.num("budget.log_law"), "budget");
}

}  // namespace critnls::detail
