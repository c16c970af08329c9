#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "critnls/error.hpp"

namespace critnls {

using cplx = std::complex<double>;
using Point4 = std::array<double, 4>;

enum class GeometryKind { radial, cartesian4 };

const char* to_string(GeometryKind kind);

/// Discretization of R^d.
///
/// radial: staggered uniform grid r_i = (i + 1/2) dr, dr = r_max / n. The
///   Laplacian is the 6th-order 7-point stencil for d^2/dr^2 + (d-1)/r d/dr,
///   closed at r = 0 by even reflection and at r_max by continuing the field
///   with the ground-state tail profile (r^2 + d(d-2))^{-(d-2)/2}, which is
///   harmonic to leading order and exact for W. Quadrature is the
///   midpoint rule with weight |S^{d-1}| r^{d-1} dr, 4th order for smooth even
///   integrands.
/// cartesian4: cell-centred box [-L, L]^4 with n nodes per axis, spacing
///   2L/n, 4th-order stencil per axis, homogeneous Dirichlet outside.
class Geometry {
 public:
  Geometry(GeometryKind kind, double extent, int resolution, int dim);

  GeometryKind kind() const noexcept { return kind_; }
  bool is_radial() const noexcept { return kind_ == GeometryKind::radial; }
  int dim() const noexcept { return dim_; }
  int resolution() const noexcept { return n_; }
  double extent() const noexcept { return extent_; }
  double spacing() const noexcept { return h_; }
  std::size_t size() const noexcept { return radii_.size(); }

  /// |x| at every node.
  std::span<const double> radii() const noexcept { return radii_; }
  double weight(std::size_t i) const noexcept { return is_radial() ? weights_[i] : cell_volume_; }
  /// Radial quadrature weights; empty on cartesian4 (use cell_volume()).
  std::span<const double> radial_weights() const noexcept { return weights_; }
  double cell_volume() const noexcept { return cell_volume_; }

  /// Cartesian node coordinate along one axis, index k in [0, n).
  double axis_coordinate(int k) const noexcept { return -extent_ + (k + 0.5) * h_; }
  Point4 node_point(std::size_t i) const;
  std::size_t flat_index(int i0, int i1, int i2, int i3) const noexcept {
    return ((static_cast<std::size_t>(i0) * n_ + i1) * n_ + i2) * n_ + i3;
  }

  /// Surface area of the unit (d-1)-sphere.
  double sphere_area() const noexcept { return sphere_area_; }

  /// Radial Laplacian as a band of half width kBandHalfWidth: entry
  /// (2 kBandHalfWidth + 1) * i + k multiplies column i - kBandHalfWidth + k.
  /// Ghost nodes are already folded in.
  static constexpr int kBandHalfWidth = 3;
  std::span<const double> laplacian_band() const noexcept { return lap_band_; }
  /// Radial first derivative with the same ghost closure, same layout.
  std::span<const double> derivative_band() const noexcept { return der_band_; }
  /// Weights (c_{n-2}, c_{n-1}) giving the exterior continuation at radius
  /// r >= r_max from the last two nodes.
  std::pair<double, double> exterior_weights(double r) const;
  /// Radial energy matrix K, symmetric positive definite, in upper band
  /// storage: entry 4*i + k is K(i, i + k). x^T K y is a 4th-order
  /// quadrature of int grad x . grad y over R^d: staggered 4-point gradients
  /// at r = k dr with Gregory end weights, plus the exact energy of the
  /// exterior continuation.
  std::span<const double> energy_band() const noexcept { return energy_band_; }

  /// Round-trippable description, e.g. "radial:r_max=200,n=4096,d=4".
  std::string spec() const;

 private:
  void build_radial();
  void build_energy();

  GeometryKind kind_;
  double extent_;
  int n_;
  int dim_;
  double h_;
  double cell_volume_ = 0.0;
  double sphere_area_ = 0.0;
  std::vector<double> radii_;
  std::vector<double> weights_;
  std::vector<double> lap_band_;
  std::vector<double> der_band_;
  std::vector<double> energy_band_;
};

using GeometryPtr = std::shared_ptr<const Geometry>;

GeometryPtr make_geometry(GeometryKind kind, double extent, int resolution, int d = 4);

/// Parses "radial:r_max=200,n=4096[,d=4]" or "cartesian4:L=16,n=32".
GeometryPtr parse_geometry(std::string_view spec);

enum class SymmetryTag { general, radial_symmetric };

/// Complex samples conformal to a geometry. Values are immutable after
/// construction; arithmetic produces new fields.
class Field {
 public:
  /// Empty placeholder without a geometry.
  Field() = default;
  Field(GeometryPtr geometry, std::vector<cplx> values, SymmetryTag tag = SymmetryTag::general);

  static Field zeros(GeometryPtr geometry);
  /// Samples a radial profile f(|x|) on any backend.
  template <class Profile>
  static Field from_radial(GeometryPtr geometry, Profile&& profile) {
    std::vector<cplx> v(geometry->size());
    const auto r = geometry->radii();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = profile(r[i]);
    return Field(std::move(geometry), std::move(v), SymmetryTag::radial_symmetric);
  }
  /// Samples f(x) on a cartesian4 grid (or f((r,0,0,0)) on a radial one).
  template <class Function>
  static Field from_points(GeometryPtr geometry, Function&& fn) {
    std::vector<cplx> v(geometry->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(geometry->node_point(i));
    return Field(std::move(geometry), std::move(v));
  }

  bool empty() const noexcept { return !geometry_; }
  const Geometry& geometry() const noexcept { return *geometry_; }
  const GeometryPtr& geometry_ptr() const noexcept { return geometry_; }
  std::span<const cplx> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const cplx& operator[](std::size_t i) const noexcept { return values_[i]; }
  SymmetryTag tag() const noexcept { return tag_; }

  Field real_part() const;
  Field imag_part() const;
  Field conj() const;
  bool all_finite() const;

 private:
  GeometryPtr geometry_;
  std::vector<cplx> values_;
  SymmetryTag tag_ = SymmetryTag::general;
};

void require_conformal(const Field& a, const Field& b);

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(cplx s, const Field& a);
inline Field operator*(double s, const Field& a) { return cplx(s, 0.0) * a; }
/// Pointwise product.
Field pointwise(const Field& a, const Field& b);
/// a + s * b without intermediate allocation.
Field axpy(const Field& a, cplx s, const Field& b);

/// Quadrature of real samples over R^d.
double integrate(std::span<const double> f, const Geometry& geom);
/// Integral of a pointwise function of each sample.
template <class Density>
double integrate_density(const Field& f, Density&& density) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = density(f[i], i);
  return integrate(v, f.geometry());
}

/// Re <f, g>_{L^2}.
double l2_inner(const Field& f, const Field& g);
double lp_norm(const Field& f, double p);
/// Re int grad f . conj(grad g). Radial: the positive definite form of
/// Geometry::energy_band(), which agrees with -<Lap f, g> to O(dr^4) for
/// smooth fields. cartesian4: -Re <Lap f, g>.
double h1_inner(const Field& f, const Field& g);
double h1_norm(const Field& f);

Field laplacian(const Field& f);
/// d/dr on radial geometries.
Field radial_derivative(const Field& f);
/// d/dx_axis on cartesian4 geometries.
Field partial_derivative(const Field& f, int axis);

struct SymmetryOptions {
  /// Relative change of the H^1 norm above which the transform is rejected.
  double max_norm_loss = 0.05;
};

/// e^{i theta} lambda^{-(d-2)/2} f((x - x0) / lambda), interpolated onto the
/// same grid (cubic on radial, quadrilinear on cartesian4).
Field apply_symmetry(const Field& f, double theta, double lambda, const Point4& x0 = {},
                     const SymmetryOptions& options = {});

/// Snapshot format: "# critnls-field kind=<k> n=<n> extent=<e>" then
/// "index,re,im" rows.
void write_snapshot(const Field& f, std::ostream& out);
void write_snapshot(const Field& f, const std::string& path);
Field read_snapshot(std::istream& in, int d = 4);
Field read_snapshot(const std::string& path, int d = 4);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace critnls
