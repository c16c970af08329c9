#include "critnls/linearized.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "detail/operators.hpp"

namespace critnls {

using detail::Vec;

namespace {

GroundStatePtr grid_w(const GeometryPtr& g) { return ground_state(g, {1.0}); }

Vec w_squared(const GeometryPtr& g) {
  const auto gs = grid_w(g);
  Vec m(g->size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = gs->W[i].real() * gs->W[i].real();
  return m;
}

// -(A + W^2)(A + 3 W^2) on a radial grid.
detail::RowBand product_operator(const GeometryPtr& g) {
  const Vec w2 = w_squared(g);
  Vec w2x3(w2.size());
  for (std::size_t i = 0; i < w2.size(); ++i) w2x3[i] = 3.0 * w2[i];
  detail::RowBand a1 = detail::RowBand::laplacian(*g);
  detail::RowBand a3 = a1;
  a1.add_diagonal(w2);
  a3.add_diagonal(w2x3);
  detail::RowBand b = a1.times(a3);
  for (auto& x : b.a) x = -x;
  return b;
}

double coarse_eigenvalue(const GeometryPtr& fine, const EigenOptions& opt) {
  auto cg = make_geometry(GeometryKind::radial, std::min(opt.coarse_extent, fine->extent()), opt.coarse_resolution);
  const detail::RowBand b = product_operator(cg);
  const int n = b.n;
  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - b.h); j <= std::min(n - 1, i + b.h); ++j)
      dense[i + static_cast<std::size_t>(j) * n] = b.at(i, j);
  std::vector<double> wr(n), wi(n);
  int lwork = -1, info = 0, one = 1;
  double query = 0.0, dummy = 0.0;
  const char no = 'N';
  dgeev_(&no, &no, &n, dense.data(), &n, wr.data(), wi.data(), &dummy, &one, &dummy, &one, &query, &lwork, &info);
  lwork = static_cast<int>(query);
  std::vector<double> work(lwork);
  dgeev_(&no, &no, &n, dense.data(), &n, wr.data(), wi.data(), &dummy, &one, &dummy, &one, work.data(), &lwork,
         &info);
  if (info != 0) throw Error(ErrorCode::spectral_failure, "dense eigensolve failed (info " + std::to_string(info) + ")");
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    if (wr[i] > best && std::abs(wi[i]) <= 1e-8 * std::abs(wr[i])) best = wr[i];
  if (!(best > 0.0)) throw Error(ErrorCode::spectral_failure, "no positive real eigenvalue of the product operator");
  return best;
}

double weighted_norm(const Geometry& g, const Vec& x) {
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add(g.weight(i) * x[i] * x[i]);
  return std::sqrt(s.value());
}

double tail_fraction(const Field& e) {
  const Geometry& g = e.geometry();
  const double half = 0.5 * g.extent();
  double tail = 0.0, total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double c = g.weight(i) * std::norm(e[i]);
    total += c;
    if (g.radii()[i] > half) tail += c;
  }
  return total > 0.0 ? std::sqrt(tail / total) : 0.0;
}

double relative_l2(const Field& num, const Field& den) {
  const double d = lp_norm(den, 2);
  return d > 0.0 ? lp_norm(num, 2) / d : lp_norm(num, 2);
}

SpectrumPtr compute_pair(const GeometryPtr& geom, const EigenOptions& opt) {
  auto spec = std::make_shared<LinearizedSpectrum>();
  spec->geometry = geom;
  spec->coarse_estimate = coarse_eigenvalue(geom, opt);

  const detail::RowBand b = product_operator(geom);
  const auto gs = grid_w(geom);
  Vec x = detail::real_values(gs->W);
  double sigma = spec->coarse_estimate;
  detail::BandLU lu = b.to_lu(sigma);
  if (lu.factor() != 0) throw Error(ErrorCode::spectral_failure, "shifted product operator is singular");
  double row_max = 0.0;
  for (int i = 0; i < b.n; ++i) {
    double row = 0.0;
    for (int j = std::max(0, i - b.h); j <= std::min(b.n - 1, i + b.h); ++j) row += std::abs(b.at(i, j));
    row_max = std::max(row_max, row);
  }
  const double rounding_floor = 100.0 * std::numeric_limits<double>::epsilon() * row_max;
  bool refined = false;
  double mu = sigma;
  bool converged = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    lu.solve(x);
    const double nx = weighted_norm(*geom, x);
    for (auto& v : x) v /= nx;
    const Vec bx = b.apply(x);
    detail::CompensatedSum num;
    for (std::size_t i = 0; i < x.size(); ++i) num.add(geom->weight(i) * x[i] * bx[i]);
    mu = num.value();
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = bx[i] - mu * x[i];
    const double res = weighted_norm(*geom, r) / std::abs(mu);
    spec->residual_history.push_back(res);
    // Below the tolerance, or stalled at the rounding floor of the
    // product operator (entries grow like dr^-4).
    const auto& h = spec->residual_history;
    const bool stalled = h.size() >= 4 && res < rounding_floor / mu && res > 0.5 * h[h.size() - 4];
    if (res < opt.tolerance || stalled) {
      converged = true;
      break;
    }
    if (!refined && res < 1e-5) {
      // One Rayleigh-quotient shift update.
      refined = true;
      lu = b.to_lu(mu * (1.0 + 1e-9));
      if (lu.factor() != 0) throw Error(ErrorCode::spectral_failure, "refined shift is singular");
    }
  }
  if (!converged)
    throw Error(ErrorCode::spectral_failure, "inverse iteration did not converge", spec->residual_history);
  if (!(mu > 0.0)) throw Error(ErrorCode::spectral_failure, "converged to a non-positive eigenvalue", {mu});

  const double lambda = std::sqrt(mu);
  Field f = detail::from_parts(geom, x);
  Vec w2 = w_squared(geom);
  const Field lf = laplacian(f);
  Vec g(x.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -(lf[i].real() + 3.0 * w2[i] * x[i]) / lambda;
  Field e = detail::from_parts(geom, x, &g);
  const double sign = h1_inner(f, gs->W) >= 0.0 ? 1.0 : -1.0;
  e = (sign / h1_norm(e)) * e;
  spec->lambda1 = lambda;
  spec->e_plus = e;

  spec->tail_fraction = tail_fraction(e);
  if (spec->tail_fraction > opt.max_tail_fraction)
    throw Error(ErrorCode::spectral_failure,
                "eigenfunction does not decay (tail fraction " + format_double(spec->tail_fraction) + ")",
                spec->residual_history);

  spec->eigen_residual = relative_l2(apply_L(e) - lambda * e, e);
  const Field em = e.conj();
  spec->conjugate_residual = relative_l2(apply_L(em) + lambda * em, em);
  spec->kernel_residual_iW = relative_l2(apply_L(cplx(0, 1) * gs->W), gs->W);
  spec->kernel_residual_W1 = relative_l2(apply_L(gs->W1), gs->W1);
  return spec;
}

std::mutex spectrum_mutex;
std::map<const Geometry*, std::pair<std::weak_ptr<const Geometry>, SpectrumPtr>> spectrum_cache;

bool is_default(const EigenOptions& o) {
  const EigenOptions d;
  return o.coarse_extent == d.coarse_extent && o.coarse_resolution == d.coarse_resolution &&
         o.max_iterations == d.max_iterations && o.tolerance == d.tolerance &&
         o.max_tail_fraction == d.max_tail_fraction;
}

}  // namespace

Field apply_L(const Field& v) {
  const Geometry& g = v.geometry();
  if (g.dim() != 4) throw Error(ErrorCode::invalid_config, "the linearized operator is implemented for d = 4");
  const auto gs = grid_w(v.geometry_ptr());
  const Field lap = laplacian(v);
  std::vector<cplx> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w2 = gs->W[i].real() * gs->W[i].real();
    const double v1 = v[i].real(), v2 = v[i].imag();
    out[i] = cplx(lap[i].imag() + w2 * v2, -(lap[i].real() + 3.0 * w2 * v1));
  }
  return Field(v.geometry_ptr(), std::move(out), v.tag());
}

SpectrumPtr unstable_eigenpair(const GeometryPtr& geom, const EigenOptions& options) {
  if (!geom->is_radial()) throw Error(ErrorCode::unsupported_on_backend, "the eigenpair is computed on radial grids");
  if (geom->dim() != 4) throw Error(ErrorCode::invalid_config, "the linearized operator is implemented for d = 4");
  if (!is_default(options)) return compute_pair(geom, options);
  {
    std::lock_guard<std::mutex> lock(spectrum_mutex);
    auto it = spectrum_cache.find(geom.get());
    if (it != spectrum_cache.end() && !it->second.first.expired()) return it->second.second;
  }
  auto spec = compute_pair(geom, options);
  std::lock_guard<std::mutex> lock(spectrum_mutex);
  spectrum_cache[geom.get()] = {geom, spec};
  return spec;
}

double quadratic_form(const Field& a, const Field& b) {
  require_conformal(a, b);
  const auto gs = grid_w(a.geometry_ptr());
  const double pot = integrate_density(a, [&](const cplx& z, std::size_t i) {
    const double w2 = gs->W[i].real() * gs->W[i].real();
    return w2 * (3.0 * z.real() * b[i].real() + z.imag() * b[i].imag());
  });
  return 0.5 * h1_inner(a, b) - 0.5 * pot;
}

std::vector<Field> modulation_family(const GeometryPtr& geom) {
  const auto gs = grid_w(geom);
  std::vector<Field> fam{gs->W, cplx(0, 1) * gs->W, gs->W1};
  for (const Field& d : gs->dW) fam.push_back(d);
  return fam;
}

Field project_out(const Field& g, const std::vector<Field>& family) {
  const int k = static_cast<int>(family.size());
  if (k == 0) return g;
  Eigen::MatrixXd G(k, k);
  Eigen::VectorXd rhs(k);
  for (int i = 0; i < k; ++i) {
    rhs(i) = h1_inner(family[i], g);
    for (int j = i; j < k; ++j) G(i, j) = G(j, i) = h1_inner(family[i], family[j]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(k - 1) <= 1e-12 * s(0)) throw Error(ErrorCode::degenerate_basis, "projection family is degenerate");
  const Eigen::VectorXd c = svd.solve(rhs);
  Field out = g;
  for (int i = 0; i < k; ++i) out = axpy(out, -c(i), family[i]);
  return out;
}

namespace {

CoercivityResult minimize(const GeometryPtr& geom, const std::vector<Vec>& re_constraints,
                          const std::vector<Vec>& im_constraints) {
  const detail::EnergyMatrix K(geom);
  Vec m = w_squared(geom);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] *= geom->weight(i);
  const auto re = detail::constrained_rayleigh_max(K, m, re_constraints);
  const auto im = detail::constrained_rayleigh_max(K, m, im_constraints);
  CoercivityResult out;
  out.real_part = 0.5 - 1.5 * re.value;
  out.imag_part = 0.5 - 0.5 * im.value;
  out.constant = std::min(out.real_part, out.imag_part);
  out.iterations = re.iterations + im.iterations;
  return out;
}

}  // namespace

CoercivityResult coercivity_Aperp(const GeometryPtr& geom) {
  const auto gs = grid_w(geom);
  std::vector<Vec> re{detail::real_values(gs->W), detail::real_values(gs->W1)};
  for (const Field& d : gs->dW) re.push_back(detail::real_values(d));
  const std::vector<Vec> im{detail::real_values(gs->W)};
  const CoercivityResult out = minimize(geom, re, im);
  if (!(out.constant > 0.0))
    throw Error(ErrorCode::discretization_failure, "nonpositive minimum on the complement of the modulation family",
                {out.real_part, out.imag_part});
  return out;
}

CoercivityResult unconstrained_minimum(const GeometryPtr& geom) { return minimize(geom, {}, {}); }

CoercivityResult coercivity_Bperp(const LinearizedSpectrum& spec) {
  const GeometryPtr& geom = spec.geometry;
  const auto gs = grid_w(geom);
  const detail::EnergyMatrix K(geom);
  Vec m = w_squared(geom);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] *= geom->weight(i);
  // F(e_+, v) = F(e_-, v) = 0 splits into F_1(f, Re v) = 0 and F_2(g, Im v) = 0;
  // as H1-orthogonality these read against f - 3 K^{-1} M f and g - K^{-1} M g.
  const Vec f = detail::real_values(spec.e_plus);
  const Vec g = detail::imag_values(spec.e_plus);
  auto shifted = [&](const Vec& x, double c) {
    Vec mx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mx[i] = m[i] * x[i];
    Vec y = K.solve(mx);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - c * y[i];
    return y;
  };
  std::vector<Vec> re{detail::real_values(gs->W1), shifted(f, 3.0)};
  for (const Field& d : gs->dW) re.push_back(detail::real_values(d));
  const std::vector<Vec> im{detail::real_values(gs->W), shifted(g, 1.0)};
  const CoercivityResult out = minimize(geom, re, im);
  if (!(out.constant > 0.0))
    throw Error(ErrorCode::discretization_failure, "nonpositive minimum on B-perp", {out.real_part, out.imag_part});
  return out;
}

SpectralCoordinates spectral_decompose(const Field& v, const LinearizedSpectrum& spec) {
  require_conformal(v, spec.e_plus);
  const auto gs = grid_w(v.geometry_ptr());
  const Field ep = spec.e_plus;
  const Field em = spec.e_minus();
  const Field iw = cplx(0, 1) * gs->W;
  std::vector<Field> basis{ep, em, iw, gs->W1};
  for (const Field& d : gs->dW) basis.push_back(d);
  const int k = static_cast<int>(basis.size());

  auto pairing = [&](int row, const Field& x) {
    switch (row) {
      case 0: return quadratic_form(ep, x);
      case 1: return quadratic_form(em, x);
      case 2: return h1_inner(iw, x);
      case 3: return h1_inner(gs->W1, x);
      default: return h1_inner(gs->dW[row - 4], x);
    }
  };
  Eigen::MatrixXd G(k, k);
  Eigen::VectorXd rhs(k);
  for (int r = 0; r < k; ++r) {
    rhs(r) = pairing(r, v);
    for (int c = 0; c < k; ++c) G(r, c) = pairing(r, basis[c]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(k - 1) <= 1e-10 * s(0))
    throw Error(ErrorCode::degenerate_basis, "constraint Gram matrix is singular", {s(0), s(k - 1)});
  const Eigen::VectorXd c = svd.solve(rhs);

  Field recon = Field::zeros(v.geometry_ptr());
  for (int i = 0; i < k; ++i) recon = axpy(recon, c(i), basis[i]);
  SpectralCoordinates out{c(0), c(1), c(2), c(3), {}, v - recon};
  for (int j = 0; j + 4 < k; ++j) out.gamma[j] = c(4 + j);
  const double nv = h1_norm(v);
  const double scale = nv > 0.0 ? nv : 1.0;
  out.reconstruction_error = h1_norm(v - (recon + out.v_perp)) / scale;
  double worst = 0.0;
  for (int r = 0; r < k; ++r) worst = std::max(worst, std::abs(pairing(r, out.v_perp)));
  out.constraint_residual = worst / scale;
  return out;
}

}  // namespace critnls
