#pragma once

#include <memory>
#include <vector>

#include "critnls/geometry.hpp"

namespace critnls {

/// Closed-form ground state W_d(r) = (1 + r^2/(d(d-2)))^{-(d-2)/2} and its
/// radial derivatives.
double ground_state_profile(double r, int d = 4);
double ground_state_dr(double r, int d = 4);
double ground_state_drr(double r, int d = 4);
double ground_state_drrr(double r, int d = 4);

/// Critical exponent 2d/(d-2).
inline double critical_exponent(int d) { return 2.0 * d / (d - 2.0); }

struct GroundStateData {
  GeometryPtr geometry;
  int dim = 4;
  Field W;
  /// Scaling generator ((d-2)/2) W + x . grad W (W + x . grad W at d = 4).
  Field W1;
  /// d_j W, j = 0..3; empty on radial geometries.
  std::vector<Field> dW;
  double h1_sq = 0.0;
  /// int W^{2d/(d-2)}; the L^4 quartic at d = 4.
  double critical_power = 0.0;
  double energy = 0.0;
  /// Sharp Sobolev constant ||W||_{L^p} / ||W||_{H^1} on this grid.
  double sharp_const = 0.0;
  /// int W^{2(d+2)/(d-2)}; int W^6 at d = 4.
  double scattering_density = 0.0;
  /// |h1_sq - critical_power| / h1_sq.
  double pohozaev_defect = 0.0;
  /// Fraction of int W^p lying beyond the grid.
  double tail_fraction = 0.0;
};

using GroundStatePtr = std::shared_ptr<const GroundStateData>;

struct GroundStateOptions {
  /// Largest admissible fraction of the W mass outside the grid; negative
  /// selects 1e-6 on radial grids and 0.1 on cartesian4 boxes.
  double max_tail_fraction = -1.0;
};

/// W and derived data on a geometry. Results are cached per geometry
/// instance (the cache holds the geometry weakly).
GroundStatePtr ground_state(const GeometryPtr& geom, const GroundStateOptions& options = {});

/// Samples e^{i theta} lambda^{-(d-2)/2} W((x - x0)/lambda) from the closed
/// form, without interpolation.
Field ground_state_orbit_point(const GeometryPtr& geom, double theta, double lambda, const Point4& x0 = {});

/// 1/2 ||u||_{H^1}^2 - (d-2)/(2d) int |u|^{2d/(d-2)}.
double energy(const Field& u);
/// ||W||_{H^1}^2 - ||u||_{H^1}^2 (signed).
double delta(const Field& u);
/// C_d ||f||_{H^1} - ||f||_{L^{2d/(d-2)}}.
double sobolev_defect(const Field& f);

struct TrappingReport {
  double kinetic_ratio = 0.0;       // ||f||^2 / ||W||^2
  double energy_ratio = 0.0;        // E(f) / E(W)
  double energy_per_kinetic = 0.0;  // E(f) / ||f||^2, 0 for f = 0
  double energy = 0.0;
  double constant = 0.0;  // C in C^{-1} ||f||^2 <= E(f) <= C ||f||^2
  bool ordered = false;   // kinetic_ratio <= energy_ratio
  bool bracketed = false;
};

/// Known constant for the energy bracket: 1/4 <= E/||f||^2 <= 1/2 below
/// the threshold at d = 4, so C = 4 (C = d at general d).
TrappingReport trapping_check(const Field& f);

}  // namespace critnls
