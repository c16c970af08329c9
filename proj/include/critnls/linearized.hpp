#pragma once

#include <array>
#include <memory>
#include <vector>

#include "critnls/ground_state.hpp"

namespace critnls {

/// L v = (Delta + W^2) v2 - i (Delta + 3 W^2) v1 for v = v1 + i v2, so that
/// perturbations of W obey d_t v + L v + R(v) = 0.
Field apply_L(const Field& v);

struct LinearizedSpectrum {
  GeometryPtr geometry;
  double lambda1 = 0.0;
  /// e_+ = f + i g with L e_+ = lambda1 e_+, ||e_+||_H1 = 1 and
  /// (Re e_+, W)_H1 > 0. e_- = conj(e_+).
  Field e_plus;
  /// ||L e_+ - lambda1 e_+||_L2 / ||e_+||_L2.
  double eigen_residual = 0.0;
  /// Same for L conj(e_+) + lambda1 conj(e_+).
  double conjugate_residual = 0.0;
  /// ||L z||_L2 / ||z||_L2 for z in {iW, W1, d_j W}.
  double kernel_residual_iW = 0.0;
  double kernel_residual_W1 = 0.0;
  std::vector<double> kernel_residual_dW;
  /// L2 fraction of e_+ beyond r_max / 2.
  double tail_fraction = 0.0;
  /// Shift used on the fine grid and the residual after each inverse step.
  double coarse_estimate = 0.0;
  std::vector<double> residual_history;

  Field e_minus() const { return e_plus.conj(); }
};

using SpectrumPtr = std::shared_ptr<const LinearizedSpectrum>;

struct EigenOptions {
  /// Coarse dense solve used to seed the shift.
  double coarse_extent = 40.0;
  int coarse_resolution = 400;
  int max_iterations = 40;
  double tolerance = 1e-10;
  double max_tail_fraction = 1e-6;
};

/// Unstable radial eigenpair of L. Cached per geometry for default options.
SpectrumPtr unstable_eigenpair(const GeometryPtr& geom, const EigenOptions& options = {});

/// F(a, b) = 1/2 (a, b)_H1 - 1/2 int W^2 (3 Re a Re b + Im a Im b).
double quadratic_form(const Field& a, const Field& b);
inline double quadratic_form(const Field& g) { return quadratic_form(g, g); }

/// The zero-direction family: {W, iW, W1} on radial grids, plus d_j W on
/// cartesian4.
std::vector<Field> modulation_family(const GeometryPtr& geom);

/// H1-orthogonal projection of g onto the complement of the real span of
/// `family`.
Field project_out(const Field& g, const std::vector<Field>& family);

struct CoercivityResult {
  double constant = 0.0;    // min F(g) / ||g||^2 over the constraint set
  double real_part = 0.0;   // minimum over purely real g
  double imag_part = 0.0;   // minimum over purely imaginary g
  int iterations = 0;
};

/// Minimum of F(g)/||g||_H1^2 over the H1-orthogonal complement of the
/// modulation family.
CoercivityResult coercivity_Aperp(const GeometryPtr& geom);
inline double coercivity_constant_Aperp(const GeometryPtr& geom) { return coercivity_Aperp(geom).constant; }
/// Same minimum without constraints (at most F(W)/||W||^2 = -1).
CoercivityResult unconstrained_minimum(const GeometryPtr& geom);
/// Minimum over B-perp: (iW, .) = (W1, .) = (d_j W, .) = F(e_+, .) =
/// F(e_-, .) = 0.
CoercivityResult coercivity_Bperp(const LinearizedSpectrum& spec);
inline double coercivity_constant_Bperp(const LinearizedSpectrum& spec) { return coercivity_Bperp(spec).constant; }

struct SpectralCoordinates {
  double alpha_plus = 0.0;
  double alpha_minus = 0.0;
  double beta = 0.0;
  double gamma0 = 0.0;
  std::array<double, 4> gamma{};
  Field v_perp;
  double reconstruction_error = 0.0;
  /// Largest |constraint pairing| of v_perp relative to ||v||_H1.
  double constraint_residual = 0.0;
};

/// v = a+ e+ + a- e- + i beta W + gamma0 W1 + sum gamma_j d_j W + v_perp.
SpectralCoordinates spectral_decompose(const Field& v, const LinearizedSpectrum& spec);

}  // namespace critnls
