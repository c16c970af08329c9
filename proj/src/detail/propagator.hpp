#pragma once

#include <Eigen/Dense>
#include <vector>

#include "critnls/geometry.hpp"
#include "detail/numerics.hpp"

namespace critnls::detail {

/// Approximates exp(i tau Lap) on a geometry. Radial: diagonal Pade (m, m)
/// in product form, one complex banded solve per pole; the factor has modulus
/// one on the imaginary axis. cartesian4: exact, as a product of dense 1D
/// propagators along the four axes.
class LinearPropagator {
 public:
  LinearPropagator(GeometryPtr geom, double tau, int pade_order = 6);
  void apply(std::vector<cplx>& u) const;
  double tau() const noexcept { return tau_; }

 private:
  GeometryPtr geom_;
  double tau_;
  std::vector<cplx> poles_;
  // Unpivoted band LU of (i tau A - q) per pole: lower_[k] holds the
  // multipliers (hw per row), upper_[k] the diagonal and hw superdiagonals.
  std::vector<std::vector<cplx>> lower_;
  std::vector<std::vector<cplx>> upper_;
  std::vector<ComplexBandLU> pivoted_;  // used when the unpivoted factor breaks down
  double sign_ = 1.0;
  Eigen::MatrixXcd axis_;
};

}  // namespace critnls::detail
