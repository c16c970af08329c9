#pragma once

#include <array>
#include <vector>

#include "critnls/ground_state.hpp"

namespace critnls {

/// Truncated virial weight phi_R(x) = R^2 psi(|x|/R) with psi(s) = s^2 on
/// [0, 1], a polynomial on [1, 2] and constant on [2, inf). The polynomial
/// matches the first eight derivatives at both joints, so every quantity in
/// the Morawetz identity is continuous.
class VirialWeights {
 public:
  VirialWeights(GeometryPtr geometry, double R);

  /// k-th derivative of psi, k = 0..4.
  static double psi(double s, int k);
  /// Value psi takes on the plateau.
  static double plateau();

  const GeometryPtr& geometry() const noexcept { return geometry_; }
  double radius() const noexcept { return R_; }

  /// Radial profile samples at every node: phi, phi', phi'', Lap phi and
  /// Lap Lap phi.
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& phi_r() const noexcept { return phi_r_; }
  const std::vector<double>& phi_rr() const noexcept { return phi_rr_; }
  const std::vector<double>& laplacian() const noexcept { return lap_; }
  const std::vector<double>& bilaplacian() const noexcept { return bilap_; }

  /// max |phi^(k)| R^{k-2} over the grid for k = 0..4.
  const std::array<double, 5>& bound_constants() const noexcept { return bounds_; }
  /// Node counts in |x| < R, R <= |x| < 2R and |x| >= 2R.
  const std::array<std::size_t, 3>& region_counts() const noexcept { return regions_; }

 private:
  GeometryPtr geometry_;
  double R_;
  std::vector<double> phi_, phi_r_, phi_rr_, lap_, bilap_;
  std::array<double, 5> bounds_{};
  std::array<std::size_t, 3> regions_{};
};

/// 2 Im int grad phi_R . grad u conj(u).
double morawetz_potential(const Field& u, const VirialWeights& w);

/// dM_R/dt = main + error_term for solutions of the critical NLS, with
/// main = 16/(d-2) delta(u) (8 delta at d = 4). error_term is the sum of
/// the parts below. Radial geometries accept any d; cartesian4 is d = 4.
struct VirialRate {
  double main = 0.0;
  double error_term = 0.0;
  /// 8 (||u||_H1^2 - int |u|^p) - main = 32 (E(u) - E(W)) at d = 4: vanishes
  /// at the threshold energy.
  double bulk = 0.0;
  /// int_{|x|>=R} (4 Re phi_jk u_j conj(u_k) - 8 |grad u|^2), including the
  /// gradient energy beyond the grid.
  double hessian_tail = 0.0;
  /// -int_{|x|>=R} ((4/d) Lap phi - 8) |u|^p.
  double potential_tail = 0.0;
  /// -int Lap Lap phi |u|^2, supported on the annulus.
  double bilaplacian_term = 0.0;
  /// main + error_term = 4 Re int phi_jk u_j conj(u_k) - int Lap Lap phi |u|^2
  ///   - (4/d) int Lap phi |u|^p.
  double rate() const noexcept { return main + error_term; }
};

VirialRate morawetz_rate_decomposition(const Field& u, const VirialWeights& w);

}  // namespace critnls
