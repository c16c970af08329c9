#include "critnls/orbit.hpp"

#include <cmath>

#include "detail/numerics.hpp"

namespace critnls {

namespace {

// Fraction of the radial gradient energy beyond r_max / 2.
double h1_tail_fraction(const Field& f) {
  const Field d = radial_derivative(f);
  const auto& g = f.geometry();
  const double half = 0.5 * g.extent();
  double all = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = g.weight(i) * std::norm(d[i]);
    all += e;
    if (g.radii()[i] > half) tail += e;
  }
  return all > 0.0 ? tail / all : 0.0;
}

// Coefficient of order j in |W + v|^2 (W + v) beyond the linear term.
Field nonlinear_coefficient(const std::vector<Field>& phi, const Field& w, int j) {
  const std::size_t n = w.size();
  std::vector<cplx> out(n, 0.0);
  for (int p = 1; p < j; ++p) {
    const int q = j - p;
    const auto& a = phi[p - 1];
    const auto& b = phi[q - 1];
    for (std::size_t i = 0; i < n; ++i) out[i] += w[i].real() * (a[i] * b[i] + 2.0 * a[i] * std::conj(b[i]));
  }
  for (int p = 1; p < j; ++p)
    for (int q = 1; p + q < j; ++q) {
      const int r = j - p - q;
      const auto& a = phi[p - 1];
      const auto& b = phi[q - 1];
      const auto& c = phi[r - 1];
      for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i] * std::conj(c[i]);
    }
  return Field(w.geometry_ptr(), std::move(out));
}

double l2(const Field& f) { return std::sqrt(l2_inner(f, f)); }

}  // namespace

OrbitSeries profile_recursion(double a, int k, const LinearizedSpectrum& spec, const RecursionOptions& options) {
  if (k < 1) throw Error(ErrorCode::invalid_config, "orbit order must be at least 1");
  if (!spec.geometry || spec.e_plus.empty() || !(spec.lambda1 > 0.0))
    throw Error(ErrorCode::invalid_config, "profile_recursion needs a computed eigenpair");
  const GeometryPtr geom = spec.geometry;
  const auto gs = ground_state(geom, {1.0});
  const int n = geom->resolution();
  const auto band = geom->laplacian_band();

  OrbitSeries s;
  s.geometry = geom;
  s.a = a;
  s.lambda1 = spec.lambda1;
  s.k = k;
  s.regime_bound = options.regime_fraction * std::sqrt(gs->h1_sq);
  s.phi.push_back(a * spec.e_plus);
  s.solve_residuals.push_back(spec.eigen_residual);
  s.conditioning.push_back(1.0);
  s.tail_fractions.push_back(h1_tail_fraction(spec.e_plus));

  for (int j = 2; j <= k; ++j) {
    const double shift = j * spec.lambda1;
    const Field rhs = cplx(0.0, 1.0) * nonlinear_coefficient(s.phi, gs->W, j);
    if (a == 0.0) {
      s.phi.push_back(Field::zeros(geom));
      s.solve_residuals.push_back(0.0);
      s.conditioning.push_back(1.0);
      s.tail_fractions.push_back(0.0);
      continue;
    }
    // Unknowns interleaved as (Re Phi_i, Im Phi_i).
    constexpr int hw = Geometry::kBandHalfWidth;
    detail::BandLU lu(2 * n, 2 * hw + 1, 2 * hw + 1);
    for (int i = 0; i < n; ++i) {
      const double w2 = gs->W[i].real() * gs->W[i].real();
      for (int o = 0; o <= 2 * hw; ++o) {
        const int c = i - hw + o;
        if (c < 0 || c >= n) continue;
        const double aij = band[(2 * hw + 1) * static_cast<std::size_t>(i) + o];
        lu.add(2 * i, 2 * c + 1, aij);
        lu.add(2 * i + 1, 2 * c, -aij);
      }
      lu.add(2 * i, 2 * i + 1, w2);
      lu.add(2 * i, 2 * i, -shift);
      lu.add(2 * i + 1, 2 * i, -3.0 * w2);
      lu.add(2 * i + 1, 2 * i + 1, -shift);
    }
    if (lu.factor() != 0)
      throw Error(ErrorCode::shift_collision, "L - " + std::to_string(j) + " lambda1 is singular on " + geom->spec(),
                  {static_cast<double>(j), shift});
    if (lu.rcond() < options.min_rcond)
      throw Error(ErrorCode::shift_collision,
                  "L - " + std::to_string(j) + " lambda1 is numerically singular on " + geom->spec(),
                  {static_cast<double>(j), lu.rcond()});
    std::vector<double> x(2 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x[2 * i] = rhs[i].real();
      x[2 * i + 1] = rhs[i].imag();
    }
    lu.solve(x);
    std::vector<cplx> v(n);
    for (int i = 0; i < n; ++i) v[i] = cplx(x[2 * i], x[2 * i + 1]);
    Field phi(geom, std::move(v));

    const double res = l2(apply_L(phi) - shift * phi - rhs) / l2(rhs);
    if (!(res < options.max_solve_residual))
      throw Error(ErrorCode::recursion_failure, "order " + std::to_string(j) + " solve residual " + format_double(res),
                  {static_cast<double>(j), res, lu.rcond()});
    const double tail = h1_tail_fraction(phi);
    if (tail > options.max_tail_fraction)
      throw Error(ErrorCode::resolution_loss,
                  "profile of order " + std::to_string(j) + " reaches the outer half of " + geom->spec(),
                  {static_cast<double>(j), tail});
    s.phi.push_back(std::move(phi));
    s.solve_residuals.push_back(res);
    s.conditioning.push_back(lu.rcond());
    s.tail_fractions.push_back(tail);
  }
  return s;
}

Field assemble(const OrbitSeries& series, double t) {
  const double lead = std::exp(-series.lambda1 * t) * h1_norm(series.phi.front());
  if (!(lead < series.regime_bound))
    throw Error(ErrorCode::out_of_regime, "orbit series evaluated too early (t = " + format_double(t) + ")",
                {t, lead, series.regime_bound});
  Field u = ground_state(series.geometry, {1.0})->W;
  for (int j = 1; j <= series.k; ++j) u = axpy(u, std::exp(-j * series.lambda1 * t), series.phi[j - 1]);
  return u;
}

Field assemble_rate(const OrbitSeries& series, double t) {
  Field u = Field::zeros(series.geometry);
  for (int j = 1; j <= series.k; ++j)
    u = axpy(u, -j * series.lambda1 * std::exp(-j * series.lambda1 * t), series.phi[j - 1]);
  return u;
}

double pde_residual(const OrbitSeries& series, double t) {
  const Field u = assemble(series, t);
  const Field ut = assemble_rate(series, t);
  const Field lap = laplacian(u);
  std::vector<cplx> r(u.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = cplx(0.0, 1.0) * ut[i] + lap[i] + std::norm(u[i]) * u[i];
  return l2(Field(series.geometry, std::move(r)));
}

double orbit_time(const OrbitSeries& series, double amplitude) {
  if (!(amplitude > 0.0 && amplitude < 1.0)) throw Error(ErrorCode::invalid_config, "amplitude must lie in (0, 1)");
  return -std::log(amplitude) / series.lambda1;
}

}  // namespace critnls
