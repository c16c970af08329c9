#include "detail/propagator.hpp"

#include <algorithm>
#include <cmath>

namespace critnls::detail {

namespace {

// Roots of the denominator of the (m, m) Pade approximant of e^z.
std::vector<cplx> pade_poles(int m) {
  std::vector<double> c(m + 1);  // coefficient of z^j
  double fact2m = std::tgamma(2.0 * m + 1.0);
  for (int j = 0; j <= m; ++j)
    c[j] = std::tgamma(2.0 * m - j + 1.0) * std::tgamma(m + 1.0) /
           (fact2m * std::tgamma(j + 1.0) * std::tgamma(m - j + 1.0)) * (j % 2 ? -1.0 : 1.0);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < m; ++i) comp(i, m - 1) = -c[i] / c[m];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<cplx> out(m);
  for (int i = 0; i < m; ++i) out[i] = es.eigenvalues()(i);
  return out;
}

}  // namespace

LinearPropagator::LinearPropagator(GeometryPtr geom, double tau, int pade_order)
    : geom_(std::move(geom)), tau_(tau) {
  if (geom_->is_radial()) {
    poles_ = pade_poles(pade_order);
    sign_ = pade_order % 2 ? -1.0 : 1.0;
    const int n = geom_->resolution();
    const auto band = geom_->laplacian_band();
    constexpr int hw = Geometry::kBandHalfWidth;
    constexpr int w = 2 * hw + 1;
    for (const cplx q : poles_) {
      // Dense band rows, column j at offset j - i + hw.
      std::vector<cplx> m(static_cast<std::size_t>(n) * w, 0.0);
      double scale = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < w; ++k) {
          const int j = i - hw + k;
          if (j >= 0 && j < n) m[static_cast<std::size_t>(i) * w + k] = cplx(0.0, tau) * band[static_cast<std::size_t>(i) * w + k];
        }
        m[static_cast<std::size_t>(i) * w + hw] -= q;
        for (int k = 0; k < w; ++k) scale = std::max(scale, std::abs(m[static_cast<std::size_t>(i) * w + k]));
      }
      auto at = [&](int i, int j) -> cplx& { return m[static_cast<std::size_t>(i) * w + (j - i + hw)]; };
      std::vector<cplx> lo(static_cast<std::size_t>(n) * hw, 0.0);
      bool ok = true;
      for (int kcol = 0; kcol < n && ok; ++kcol) {
        const cplx piv = at(kcol, kcol);
        if (!(std::abs(piv) > 1e-8 * scale)) {
          ok = false;
          break;
        }
        for (int i = kcol + 1; i <= std::min(n - 1, kcol + hw); ++i) {
          const cplx l = at(i, kcol) / piv;
          lo[static_cast<std::size_t>(i) * hw + (i - kcol - 1)] = l;
          for (int j = kcol + 1; j <= std::min(n - 1, kcol + hw); ++j) at(i, j) -= l * at(kcol, j);
        }
      }
      if (ok) {
        std::vector<cplx> up(static_cast<std::size_t>(n) * (hw + 1), 0.0);
        // Slot 0 keeps the reciprocal pivot.
        for (int i = 0; i < n; ++i) {
          up[static_cast<std::size_t>(i) * (hw + 1)] = 1.0 / at(i, i);
          for (int k = 1; k <= hw && i + k < n; ++k) up[static_cast<std::size_t>(i) * (hw + 1) + k] = at(i, i + k);
        }
        lower_.push_back(std::move(lo));
        upper_.push_back(std::move(up));
        continue;
      }
      lower_.clear();
      upper_.clear();
      break;
    }
    if (lower_.size() != poles_.size()) {
      for (const cplx q : poles_) {
        ComplexBandLU lu(n, hw, hw);
        for (int i = 0; i < n; ++i) {
          for (int k = 0; k < w; ++k) {
            const int j = i - hw + k;
            if (j >= 0 && j < n) lu.add(i, j, cplx(0.0, tau) * band[static_cast<std::size_t>(i) * w + k]);
          }
          lu.add(i, i, -q);
        }
        if (lu.factor() != 0) throw Error(ErrorCode::discretization_failure, "singular Pade factor");
        pivoted_.push_back(std::move(lu));
      }
    }
    return;
  }
  const int n = geom_->resolution();
  const double h = geom_->spacing();
  const double s[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) {
      const int j = i - 2 + k;
      if (j >= 0 && j < n) d(i, j) = s[k] / (12.0 * h * h);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
  const Eigen::MatrixXd& v = es.eigenvectors();
  Eigen::VectorXcd ph(n);
  for (int i = 0; i < n; ++i) ph(i) = std::polar(1.0, tau * es.eigenvalues()(i));
  axis_ = v.cast<cplx>() * ph.asDiagonal() * v.transpose().cast<cplx>();
}

void LinearPropagator::apply(std::vector<cplx>& u) const {
  if (geom_->is_radial()) {
    constexpr int hw = Geometry::kBandHalfWidth;
    const int n = static_cast<int>(u.size());
    std::vector<cplx> y;
    for (std::size_t k = 0; k < poles_.size(); ++k) {
      y = u;
      if (!pivoted_.empty()) {
        pivoted_[k].solve(y);
      } else {
        const cplx* lo = lower_[k].data();
        const cplx* up = upper_[k].data();
        for (int i = 1; i < n; ++i) {
          cplx acc = y[i];
          for (int d = 1; d <= std::min(hw, i); ++d) acc -= lo[static_cast<std::size_t>(i) * hw + d - 1] * y[i - d];
          y[i] = acc;
        }
        for (int i = n - 1; i >= 0; --i) {
          const cplx* row = up + static_cast<std::size_t>(i) * (hw + 1);
          cplx acc = y[i];
          for (int d = 1; d <= hw && i + d < n; ++d) acc -= row[d] * y[i + d];
          y[i] = acc * row[0];
        }
      }
      const cplx two_q = 2.0 * poles_[k];
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += two_q * y[i];
    }
    if (sign_ < 0.0)
      for (auto& x : u) x = -x;
    return;
  }
  const int n = geom_->resolution();
  Eigen::VectorXcd line(n), out(n);
  for (int axis = 0; axis < 4; ++axis) {
    std::size_t stride = 1;
    for (int k = axis; k < 3; ++k) stride *= n;
    for (std::size_t base = 0; base < u.size(); ++base) {
      if ((base / stride) % n != 0) continue;
      for (int k = 0; k < n; ++k) line(k) = u[base + k * stride];
      out.noalias() = axis_ * line;
      for (int k = 0; k < n; ++k) u[base + k * stride] = out(k);
    }
  }
}

}  // namespace critnls::detail
