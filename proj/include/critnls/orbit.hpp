#pragma once

#include <vector>

#include "critnls/linearized.hpp"

namespace critnls {

/// Truncated expansion W_k^a(t) = W + sum_{j<=k} e^{-j lambda1 t} Phi_j of the
/// orbits leaving W along e_+ (a < 0: the branch below ||W||, a > 0: above).
struct OrbitSeries {
  GeometryPtr geometry;
  double a = 0.0;
  double lambda1 = 0.0;
  int k = 0;
  /// phi[j - 1] = Phi_j; Phi_1 = a e_+.
  std::vector<Field> phi;
  /// Per order: relative L2 residual of the linear solve, reciprocal
  /// condition estimate of the banded system, H1 tail fraction beyond r_max/2.
  std::vector<double> solve_residuals;
  std::vector<double> conditioning;
  std::vector<double> tail_fractions;
  /// assemble() requires e^{-lambda1 t} ||Phi_1||_H1 below this bound.
  double regime_bound = 0.0;
};

struct RecursionOptions {
  double max_solve_residual = 1e-8;
  double min_rcond = 1e-13;
  double max_tail_fraction = 1e-6;
  /// Regime bound as a multiple of ||W||_H1.
  double regime_fraction = 0.1;
};

/// Solves (L - j lambda1) Phi_j = i N_j for j = 2..k, where N_j is the
/// order-j coefficient of |W + v|^2 (W + v) - W^3 - (linear part) under
/// v = sum e^{-j lambda1 t} Phi_j.
OrbitSeries profile_recursion(double a, int k, const LinearizedSpectrum& spec, const RecursionOptions& options = {});

Field assemble(const OrbitSeries& series, double t);
/// d/dt of assemble(series, t).
Field assemble_rate(const OrbitSeries& series, double t);
/// ||(i d_t + Delta) W_k + |W_k|^2 W_k||_L2 with d_t taken from the series.
double pde_residual(const OrbitSeries& series, double t);
/// Time at which e^{-lambda1 t} = amplitude.
double orbit_time(const OrbitSeries& series, double amplitude = 1e-2);

}  // namespace critnls
