#pragma once

#include <functional>
#include <vector>

#include "critnls/ground_state.hpp"
#include "detail/numerics.hpp"

namespace critnls::detail {

using Vec = std::vector<double>;

/// Row-banded matrix: row i holds 2h+1 entries for columns i-h .. i+h.
struct RowBand {
  int n = 0;
  int h = 0;
  Vec a;

  RowBand() = default;
  RowBand(int n_, int h_) : n(n_), h(h_), a(static_cast<std::size_t>(n_) * (2 * h_ + 1), 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * (2 * h + 1) + (j - i + h)]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * (2 * h + 1) + (j - i + h)]; }

  static RowBand laplacian(const Geometry& g);
  void add_diagonal(const Vec& d);
  Vec apply(const Vec& x) const;
  /// this * other.
  RowBand times(const RowBand& other) const;
  BandLU to_lu(double shift = 0.0) const;
};

/// Real symmetric energy form K (x^T K y = (x, y)_H1) with solves.
class EnergyMatrix {
 public:
  explicit EnergyMatrix(GeometryPtr geom);
  Vec apply(const Vec& x) const;
  Vec solve(const Vec& b) const;
  double inner(const Vec& x, const Vec& y) const;
  std::size_t size() const noexcept { return n_; }

 private:
  GeometryPtr geom_;
  std::size_t n_;
  BandCholesky chol_;
};

Vec real_values(const Field& f);
Vec imag_values(const Field& f);
Field from_parts(const GeometryPtr& g, const Vec& re, const Vec* im = nullptr);
double dot(const Vec& a, const Vec& b);

/// Largest eigenvalue of K^{-1} M restricted to the K-orthogonal complement
/// of `constraints`, with M = diag(m). Lanczos with full reorthogonalization.
struct RayleighMax {
  double value = 0.0;
  int iterations = 0;
};
RayleighMax constrained_rayleigh_max(const EnergyMatrix& K, const Vec& m, const std::vector<Vec>& constraints,
                                     unsigned seed = 12345);

}  // namespace critnls::detail
