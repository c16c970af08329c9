#include "critnls/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "detail/numerics.hpp"

namespace critnls {

namespace {

constexpr std::array<double, 5> kSecond = {-1.0, 16.0, -30.0, 16.0, -1.0};  // / 12 h^2
// Sixth order, radial backend.
constexpr std::array<double, 7> kSecond6 = {2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0};  // / 180 h^2
constexpr std::array<double, 7> kFirst6 = {-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0};        // / 60 h

double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace

const char* to_string(GeometryKind kind) {
  return kind == GeometryKind::radial ? "radial" : "cartesian4";
}

Geometry::Geometry(GeometryKind kind, double extent, int resolution, int dim)
    : kind_(kind), extent_(extent), n_(resolution), dim_(dim), h_(0.0) {
  if (!(extent > 0.0) || !std::isfinite(extent))
    throw Error(ErrorCode::invalid_config, "extent must be positive, got " + format_double(extent));
  if (resolution < 16)
    throw Error(ErrorCode::invalid_config, "resolution must be at least 16, got " + std::to_string(resolution));
  if (dim < 3) throw Error(ErrorCode::invalid_config, "dimension must be >= 3");
  sphere_area_ = unit_sphere_area(dim);
  if (kind == GeometryKind::radial) {
    build_radial();
    return;
  }
  if (dim != 4) throw Error(ErrorCode::invalid_config, "cartesian4 geometry requires d = 4");
  if (resolution > 96) throw Error(ErrorCode::invalid_config, "cartesian4 resolution above 96 per axis is not supported");
  h_ = 2.0 * extent / resolution;
  cell_volume_ = h_ * h_ * h_ * h_;
  const std::size_t total = static_cast<std::size_t>(n_) * n_ * n_ * n_;
  radii_.resize(total);
  std::vector<double> sq(n_);
  for (int k = 0; k < n_; ++k) sq[k] = axis_coordinate(k) * axis_coordinate(k);
  std::size_t idx = 0;
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c)
        for (int e = 0; e < n_; ++e) radii_[idx++] = std::sqrt(sq[a] + sq[b] + sq[c] + sq[e]);
}

void Geometry::build_radial() {
  h_ = extent_ / n_;
  radii_.resize(n_);
  weights_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    radii_[i] = (i + 0.5) * h_;
    weights_[i] = sphere_area_ * std::pow(radii_[i], dim_ - 1) * h_;
  }
  if ((dim_ == 2 || dim_ == 4) && n_ >= 2) {
    // Euler-Maclaurin end term of the midpoint rule at r = 0 for
    // r^{d-1} g(r): B_d(1/2) (d-1)!/d! h^d g(0), with g(0) = (9 g_0 - g_1)/8.
    // For larger even d the term is below rounding on usable grids.
    const double b_half = dim_ == 2 ? -1.0 / 24.0 : 7.0 / 240.0;
    const double c = sphere_area_ * b_half / dim_ * std::pow(h_, dim_);
    weights_[0] += 9.0 / 8.0 * c;
    weights_[1] -= 1.0 / 8.0 * c;
  }

  constexpr int hw = kBandHalfWidth;
  constexpr std::size_t stride = 2 * hw + 1;
  lap_band_.assign(stride * n_, 0.0);
  der_band_.assign(stride * n_, 0.0);
  const double inv180h2 = 1.0 / (180.0 * h_ * h_);
  const double inv60h = 1.0 / (60.0 * h_);
  for (int i = 0; i < n_; ++i) {
    for (int o = -hw; o <= hw; ++o) {
      const double lap = kSecond6[o + hw] * inv180h2 + (dim_ - 1) / radii_[i] * kFirst6[o + hw] * inv60h;
      const double der = kFirst6[o + hw] * inv60h;
      const int j = i + o;
      const std::size_t row = stride * static_cast<std::size_t>(i) + hw - i;
      if (j < 0) {
        lap_band_[row + (-j - 1)] += lap;
        der_band_[row + (-j - 1)] += der;
      } else if (j >= n_) {
        const auto [ca, cb] = exterior_weights((j + 0.5) * h_);
        lap_band_[row + n_ - 2] += ca * lap;
        der_band_[row + n_ - 2] += ca * der;
        lap_band_[row + n_ - 1] += cb * lap;
        der_band_[row + n_ - 1] += cb * der;
      } else {
        lap_band_[row + j] += lap;
        der_band_[row + j] += der;
      }
    }
  }
  build_energy();
}

void Geometry::build_energy() {
  // Gradient at face k (r = k dr) from nodes k-2 .. k+1, ghosts folded in.
  const double inv24h = 1.0 / (24.0 * h_);
  constexpr std::array<double, 4> stag = {1.0, -27.0, 27.0, -1.0};
  energy_band_.assign(4 * static_cast<std::size_t>(n_), 0.0);
  std::array<double, 8> row{};
  for (int k = 0; k <= n_; ++k) {
    row.fill(0.0);
    const int lo = std::max(0, k - 4);  // column of row[0]
    for (int o = 0; o < 4; ++o) {
      const int j = k - 2 + o;
      const double c = stag[o] * inv24h;
      if (j < 0) {
        row[-j - 1 - lo] += c;
      } else if (j >= n_) {
        const auto [ca, cb] = exterior_weights((j + 0.5) * h_);
        row[n_ - 2 - lo] += ca * c;
        row[n_ - 1 - lo] += cb * c;
      } else {
        row[j - lo] += c;
      }
    }
    double q = 1.0;
    const int from_end = std::min(k, n_ - k);
    if (from_end == 0) q = 3.0 / 8.0;
    if (from_end == 1) q = 7.0 / 6.0;
    if (from_end == 2) q = 23.0 / 24.0;
    const double om = q * sphere_area_ * std::pow(k * h_, dim_ - 1) * h_;
    for (int a = 0; a < 8; ++a) {
      if (row[a] == 0.0) continue;
      for (int b = a; b < 8 && b - a < 4; ++b) {
        const int i = lo + a;
        if (i + (b - a) >= n_) break;
        energy_band_[4 * static_cast<std::size_t>(i) + (b - a)] += om * row[a] * row[b];
      }
    }
  }

  // Exterior: int_R^inf |phi'|^2 r^{d-1} dr for phi = (r^2 + c)^{-(d-2)/2},
  // Simpson in t = 1/r, normalized by phi at the last node.
  const double c = dim_ * (dim_ - 2.0);
  const double m = 0.5 * (dim_ - 2);
  auto phi = [&](double r) { return std::pow(r * r + c, -m); };
  auto integrand = [&](double t) {
    if (t == 0.0) return 0.0;
    const double r = 1.0 / t;
    const double dphi = -2.0 * m * r * std::pow(r * r + c, -m - 1.0);
    return dphi * dphi * std::pow(r, dim_ - 1) * r * r;
  };
  const int ns = 2000;
  const double tmax = 1.0 / extent_;
  const double ht = tmax / ns;
  double s = integrand(0.0) + integrand(tmax);
  for (int i = 1; i < ns; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(i * ht);
  const double pb = phi(radii_[n_ - 1]);
  energy_band_[4 * static_cast<std::size_t>(n_ - 1)] += sphere_area_ * s * ht / 3.0 / (pb * pb);
}

std::pair<double, double> Geometry::exterior_weights(double r) const {
  const double c = dim_ * (dim_ - 2.0);
  const double rb = radii_[n_ - 1];
  return {0.0, std::pow((rb * rb + c) / (r * r + c), 0.5 * (dim_ - 2))};
}

Point4 Geometry::node_point(std::size_t i) const {
  if (is_radial()) return {radii_[i], 0.0, 0.0, 0.0};
  Point4 p;
  for (int axis = 3; axis >= 0; --axis) {
    p[axis] = axis_coordinate(static_cast<int>(i % n_));
    i /= n_;
  }
  return p;
}

std::string Geometry::spec() const {
  if (is_radial())
    return "radial:r_max=" + format_double(extent_) + ",n=" + std::to_string(n_) + ",d=" + std::to_string(dim_);
  return "cartesian4:L=" + format_double(extent_) + ",n=" + std::to_string(n_);
}

GeometryPtr make_geometry(GeometryKind kind, double extent, int resolution, int d) {
  return std::make_shared<const Geometry>(kind, extent, resolution, d);
}

GeometryPtr parse_geometry(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw Error(ErrorCode::invalid_config, "geometry spec needs '<kind>:key=value,...': " + std::string(spec));
  const std::string kind(spec.substr(0, colon));
  double extent = -1.0;
  int n = -1;
  int d = 4;
  std::stringstream ss{std::string(spec.substr(colon + 1))};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::invalid_config, "bad geometry item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "r_max" || key == "L" || key == "extent") {
        extent = std::stod(value);
      } else if (key == "n") {
        n = std::stoi(value);
      } else if (key == "d") {
        d = std::stoi(value);
      } else {
        throw Error(ErrorCode::invalid_config, "unknown geometry key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::invalid_config, "bad geometry value '" + item + "'");
    }
  }
  if (kind == "radial") return make_geometry(GeometryKind::radial, extent, n, d);
  if (kind == "cartesian4") return make_geometry(GeometryKind::cartesian4, extent, n, d);
  throw Error(ErrorCode::invalid_config, "unknown geometry kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Field

Field::Field(GeometryPtr geometry, std::vector<cplx> values, SymmetryTag tag)
    : geometry_(std::move(geometry)), values_(std::move(values)), tag_(tag) {
  if (!geometry_) throw Error(ErrorCode::invalid_config, "field without geometry");
  if (values_.size() != geometry_->size())
    throw Error(ErrorCode::geometry_mismatch, "sample count " + std::to_string(values_.size()) +
                                                  " does not match geometry node count " +
                                                  std::to_string(geometry_->size()));
}

Field Field::zeros(GeometryPtr geometry) {
  std::vector<cplx> v(geometry->size());
  return Field(std::move(geometry), std::move(v), SymmetryTag::radial_symmetric);
}

Field Field::real_part() const {
  std::vector<cplx> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[i].real();
  return Field(geometry_, std::move(v), tag_);
}

Field Field::imag_part() const {
  std::vector<cplx> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[i].imag();
  return Field(geometry_, std::move(v), tag_);
}

Field Field::conj() const {
  std::vector<cplx> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::conj(values_[i]);
  return Field(geometry_, std::move(v), tag_);
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

void require_conformal(const Field& a, const Field& b) {
  if (a.geometry_ptr() == b.geometry_ptr()) return;
  const Geometry& ga = a.geometry();
  const Geometry& gb = b.geometry();
  if (ga.kind() != gb.kind() || ga.resolution() != gb.resolution() || ga.extent() != gb.extent() ||
      ga.dim() != gb.dim())
    throw Error(ErrorCode::geometry_mismatch, ga.spec() + " vs " + gb.spec());
}

namespace {

SymmetryTag combine(SymmetryTag a, SymmetryTag b) {
  return (a == SymmetryTag::radial_symmetric && b == SymmetryTag::radial_symmetric) ? a : SymmetryTag::general;
}

}  // namespace

Field operator+(const Field& a, const Field& b) { return axpy(a, 1.0, b); }
Field operator-(const Field& a, const Field& b) { return axpy(a, -1.0, b); }

Field axpy(const Field& a, cplx s, const Field& b) {
  require_conformal(a, b);
  std::vector<cplx> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + s * b[i];
  return Field(a.geometry_ptr(), std::move(v), combine(a.tag(), b.tag()));
}

Field operator*(cplx s, const Field& a) {
  std::vector<cplx> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * a[i];
  return Field(a.geometry_ptr(), std::move(v), a.tag());
}

Field pointwise(const Field& a, const Field& b) {
  require_conformal(a, b);
  std::vector<cplx> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * b[i];
  return Field(a.geometry_ptr(), std::move(v), combine(a.tag(), b.tag()));
}

// ---------------------------------------------------------------------------
// Quadrature and norms

double integrate(std::span<const double> f, const Geometry& geom) {
  if (f.size() != geom.size())
    throw Error(ErrorCode::geometry_mismatch, "integrand has " + std::to_string(f.size()) + " samples, geometry " +
                                                  std::to_string(geom.size()));
  detail::CompensatedSum sum;
  if (geom.is_radial()) {
    const auto w = geom.radial_weights();
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!std::isfinite(f[i])) throw Error(ErrorCode::numerical_input, "non-finite sample at node " + std::to_string(i));
      sum.add(w[i] * f[i]);
    }
    return sum.value();
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw Error(ErrorCode::numerical_input, "non-finite sample at node " + std::to_string(i));
    sum.add(f[i]);
  }
  return sum.value() * geom.cell_volume();
}

double l2_inner(const Field& f, const Field& g) {
  require_conformal(f, g);
  return integrate_density(f, [&](const cplx& z, std::size_t i) { return (z * std::conj(g[i])).real(); });
}

double lp_norm(const Field& f, double p) {
  if (!(p >= 1.0)) throw Error(ErrorCode::invalid_config, "lp_norm needs p >= 1");
  const double s = integrate_density(f, [p](const cplx& z, std::size_t) { return std::pow(std::abs(z), p); });
  return std::pow(s, 1.0 / p);
}

namespace {

void apply_radial_band(std::span<const double> band, std::span<const cplx> in, std::span<cplx> out) {
  constexpr int hw = Geometry::kBandHalfWidth;
  const int n = static_cast<int>(in.size());
  for (int i = 0; i < n; ++i) {
    cplx acc = 0.0;
    const double* row = band.data() + (2 * hw + 1) * static_cast<std::size_t>(i);
    for (int j = std::max(0, i - hw); j <= std::min(n - 1, i + hw); ++j) acc += row[j - i + hw] * in[j];
    out[i] = acc;
  }
}

void apply_cartesian_laplacian(const Geometry& g, std::span<const cplx> in, std::span<cplx> out) {
  const int n = g.resolution();
  const double c = 1.0 / (12.0 * g.spacing() * g.spacing());
  std::array<std::size_t, 4> stride{static_cast<std::size_t>(n) * n * n, static_cast<std::size_t>(n) * n,
                                    static_cast<std::size_t>(n), 1};
  std::size_t idx = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int cc = 0; cc < n; ++cc)
        for (int e = 0; e < n; ++e, ++idx) {
          const std::array<int, 4> coord{a, b, cc, e};
          cplx acc = -120.0 * in[idx];
          for (int ax = 0; ax < 4; ++ax) {
            const int k = coord[ax];
            const std::size_t s = stride[ax];
            if (k >= 1) acc += 16.0 * in[idx - s];
            if (k >= 2) acc -= in[idx - 2 * s];
            if (k + 1 < n) acc += 16.0 * in[idx + s];
            if (k + 2 < n) acc -= in[idx + 2 * s];
          }
          out[idx] = c * acc;
        }
}

}  // namespace

Field laplacian(const Field& f) {
  std::vector<cplx> out(f.size());
  const Geometry& g = f.geometry();
  if (g.is_radial()) {
    apply_radial_band(g.laplacian_band(), f.values(), out);
  } else {
    apply_cartesian_laplacian(g, f.values(), out);
  }
  return Field(f.geometry_ptr(), std::move(out), f.tag());
}

Field radial_derivative(const Field& f) {
  const Geometry& g = f.geometry();
  if (!g.is_radial()) throw Error(ErrorCode::unsupported_on_backend, "radial_derivative needs a radial geometry");
  std::vector<cplx> out(f.size());
  apply_radial_band(g.derivative_band(), f.values(), out);
  return Field(f.geometry_ptr(), std::move(out), f.tag());
}

Field partial_derivative(const Field& f, int axis) {
  const Geometry& g = f.geometry();
  if (g.is_radial()) throw Error(ErrorCode::unsupported_on_backend, "partial_derivative needs a cartesian4 geometry");
  if (axis < 0 || axis > 3) throw Error(ErrorCode::invalid_config, "axis must be in [0, 4)");
  const int n = g.resolution();
  std::size_t stride = 1;
  for (int k = 3; k > axis; --k) stride *= static_cast<std::size_t>(n);
  const double c = 1.0 / (12.0 * g.spacing());
  std::vector<cplx> out(f.size());
  const auto in = f.values();
  for (std::size_t idx = 0; idx < in.size(); ++idx) {
    const int k = static_cast<int>((idx / stride) % n);
    cplx acc = 0.0;
    if (k >= 1) acc -= 8.0 * in[idx - stride];
    if (k >= 2) acc += in[idx - 2 * stride];
    if (k + 1 < n) acc += 8.0 * in[idx + stride];
    if (k + 2 < n) acc -= in[idx + 2 * stride];
    out[idx] = c * acc;
  }
  return Field(f.geometry_ptr(), std::move(out));
}

double h1_inner(const Field& f, const Field& g) {
  require_conformal(f, g);
  if (f.geometry().kind() == GeometryKind::cartesian4) return -l2_inner(laplacian(f), g);
  const auto band = f.geometry().energy_band();
  const auto a = f.values();
  const auto b = g.values();
  const std::size_t n = a.size();
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) {
    s.add(band[4 * i] * (a[i].real() * b[i].real() + a[i].imag() * b[i].imag()));
    for (std::size_t k = 1; k < 4 && i + k < n; ++k) {
      const double kij = band[4 * i + k];
      s.add(kij * (a[i].real() * b[i + k].real() + a[i].imag() * b[i + k].imag() + a[i + k].real() * b[i].real() +
                   a[i + k].imag() * b[i].imag()));
    }
  }
  return s.value();
}

double h1_norm(const Field& f) { return std::sqrt(std::max(0.0, h1_inner(f, f))); }

// ---------------------------------------------------------------------------
// Symmetry group action

namespace {

// Value of a radial sample array at radius rho with even reflection through
// the origin and harmonic decay past the last node.
cplx radial_sample(std::span<const cplx> v, const Geometry& g, int j) {
  const int n = g.resolution();
  if (j < 0) j = -j - 1;
  if (j < n) return v[j];
  const auto [ca, cb] = g.exterior_weights((j + 0.5) * g.spacing());
  return ca * v[n - 2] + cb * v[n - 1];
}

cplx radial_interpolate(std::span<const cplx> v, const Geometry& g, double rho) {
  const int n = g.resolution();
  const double h = g.spacing();
  const double s = rho / h - 0.5;
  if (s > n + 1.0) {
    const auto [ca, cb] = g.exterior_weights(rho);
    return ca * v[n - 2] + cb * v[n - 1];
  }
  double base = std::floor(s);
  double t = s - base;
  if (t < 1e-12) {
    t = 0.0;
  } else if (t > 1.0 - 1e-12) {
    t = 0.0;
    base += 1.0;
  }
  const int j = static_cast<int>(base);
  if (t == 0.0) return radial_sample(v, g, j);
  // 4-point Lagrange weights on nodes j-1, j, j+1, j+2.
  const double w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return w0 * radial_sample(v, g, j - 1) + w1 * radial_sample(v, g, j) + w2 * radial_sample(v, g, j + 1) +
         w3 * radial_sample(v, g, j + 2);
}

cplx cartesian_interpolate(std::span<const cplx> v, const Geometry& g, const Point4& p) {
  const int n = g.resolution();
  std::array<int, 4> base{};
  std::array<double, 4> frac{};
  for (int ax = 0; ax < 4; ++ax) {
    const double s = (p[ax] + g.extent()) / g.spacing() - 0.5;
    const double b = std::floor(s);
    base[ax] = static_cast<int>(b);
    frac[ax] = s - b;
    if (base[ax] < -1 || base[ax] > n - 1) return 0.0;
  }
  cplx acc = 0.0;
  for (int corner = 0; corner < 16; ++corner) {
    double w = 1.0;
    std::array<int, 4> idx{};
    bool inside = true;
    for (int ax = 0; ax < 4; ++ax) {
      const int bit = (corner >> ax) & 1;
      idx[ax] = base[ax] + bit;
      w *= bit ? frac[ax] : 1.0 - frac[ax];
      if (idx[ax] < 0 || idx[ax] >= n) inside = false;
    }
    if (inside && w != 0.0) acc += w * v[g.flat_index(idx[0], idx[1], idx[2], idx[3])];
  }
  return acc;
}

}  // namespace

Field apply_symmetry(const Field& f, double theta, double lambda, const Point4& x0, const SymmetryOptions& options) {
  const Geometry& g = f.geometry();
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorCode::invalid_config, "symmetry scale must be positive");
  const bool shifted = x0[0] != 0.0 || x0[1] != 0.0 || x0[2] != 0.0 || x0[3] != 0.0;
  if (g.is_radial() && shifted)
    throw Error(ErrorCode::unsupported_on_backend, "translations need a cartesian4 geometry");
  if (theta == 0.0 && lambda == 1.0 && !shifted) return f;

  const cplx factor = std::polar(std::pow(lambda, -0.5 * (g.dim() - 2)), theta);
  std::vector<cplx> out(f.size());
  const auto in = f.values();
  if (g.is_radial()) {
    const auto r = g.radii();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * radial_interpolate(in, g, r[i] / lambda);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      Point4 p = g.node_point(i);
      for (int ax = 0; ax < 4; ++ax) p[ax] = (p[ax] - x0[ax]) / lambda;
      out[i] = factor * cartesian_interpolate(in, g, p);
    }
  }
  Field result(f.geometry_ptr(), std::move(out), shifted ? SymmetryTag::general : f.tag());

  const double before = h1_norm(f);
  if (before > 0.0) {
    const double loss = std::abs(h1_norm(result) - before) / before;
    if (loss > options.max_norm_loss)
      throw Error(ErrorCode::resolution_loss,
                  "transformed field lost " + format_double(loss) + " of its H^1 norm (lambda=" +
                      format_double(lambda) + ")",
                  {loss});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Snapshots

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_snapshot(const Field& f, std::ostream& out) {
  const Geometry& g = f.geometry();
  out << "# critnls-field kind=" << to_string(g.kind()) << " n=" << g.resolution()
      << " extent=" << format_double(g.extent()) << '\n';
  for (std::size_t i = 0; i < f.size(); ++i)
    out << i << ',' << format_double(f[i].real()) << ',' << format_double(f[i].imag()) << '\n';
}

void write_snapshot(const Field& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  write_snapshot(f, out);
}

namespace {

// Values that underflow read as zero instead of throwing like stod.
double read_double(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ptr != end || (ec != std::errc() && ec != std::errc::result_out_of_range))
    throw Error(ErrorCode::io_error, "bad number '" + text + "' in snapshot");
  return v;
}

}  // namespace

Field read_snapshot(std::istream& in, int d) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# critnls-field", 0) != 0)
    throw Error(ErrorCode::io_error, "missing critnls-field header");
  std::string kind;
  int n = -1;
  double extent = -1.0;
  std::stringstream hs(header.substr(15));
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "kind") kind = value;
    if (key == "n") n = std::stoi(value);
    if (key == "extent") extent = read_double(value);
  }
  GeometryPtr g;
  if (kind == "radial") {
    g = make_geometry(GeometryKind::radial, extent, n, d);
  } else if (kind == "cartesian4") {
    g = make_geometry(GeometryKind::cartesian4, extent, n, 4);
  } else {
    throw Error(ErrorCode::io_error, "unknown field kind '" + kind + "'");
  }
  std::vector<cplx> v(g->size());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ','))
      throw Error(ErrorCode::io_error, "bad snapshot row '" + line + "'");
    const std::size_t idx = std::stoull(a);
    if (idx >= v.size()) throw Error(ErrorCode::io_error, "snapshot index out of range");
    v[idx] = cplx(read_double(b), read_double(c));
    ++rows;
  }
  if (rows != v.size()) throw Error(ErrorCode::io_error, "snapshot has " + std::to_string(rows) + " rows, expected " +
                                                            std::to_string(v.size()));
  return Field(std::move(g), std::move(v));
}

Field read_snapshot(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path);
  return read_snapshot(in, d);
}

}  // namespace critnls
