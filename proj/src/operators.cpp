#include "detail/operators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace critnls::detail {

RowBand RowBand::laplacian(const Geometry& g) {
  constexpr int hw = Geometry::kBandHalfWidth;
  const int n = g.resolution();
  RowBand b(n, hw);
  const auto band = g.laplacian_band();
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - hw); j <= std::min(n - 1, i + hw); ++j)
      b.at(i, j) = band[(2 * hw + 1) * static_cast<std::size_t>(i) + (j - i + hw)];
  return b;
}

void RowBand::add_diagonal(const Vec& d) {
  for (int i = 0; i < n; ++i) at(i, i) += d[i];
}

Vec RowBand::apply(const Vec& x) const {
  Vec y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h); ++j) s += at(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

RowBand RowBand::times(const RowBand& o) const {
  RowBand r(n, h + o.h);
  for (int i = 0; i < n; ++i)
    for (int k = std::max(0, i - h); k <= std::min(n - 1, i + h); ++k) {
      const double a = at(i, k);
      if (a == 0.0) continue;
      for (int j = std::max(0, k - o.h); j <= std::min(n - 1, k + o.h); ++j) r.at(i, j) += a * o.at(k, j);
    }
  return r;
}

BandLU RowBand::to_lu(double shift) const {
  BandLU lu(n, h, h);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h); ++j)
      lu.set(i, j, at(i, j) - (i == j ? shift : 0.0));
  return lu;
}

// ---------------------------------------------------------------------------

EnergyMatrix::EnergyMatrix(GeometryPtr geom) : geom_(std::move(geom)), n_(geom_->size()) {
  if (!geom_->is_radial()) return;
  const int n = geom_->resolution();
  const auto band = geom_->energy_band();
  chol_ = BandCholesky(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = i; j <= std::min(n - 1, i + 3); ++j) chol_.set(i, j, band[4 * i + (j - i)]);
  if (chol_.factor() != 0)
    throw Error(ErrorCode::discretization_failure, "energy form is not positive definite on " + geom_->spec());
}

Vec EnergyMatrix::apply(const Vec& x) const {
  Vec y(n_, 0.0);
  if (geom_->is_radial()) {
    const auto band = geom_->energy_band();
    for (std::size_t i = 0; i < n_; ++i) {
      y[i] += band[4 * i] * x[i];
      for (std::size_t k = 1; k < 4 && i + k < n_; ++k) {
        y[i] += band[4 * i + k] * x[i + k];
        y[i + k] += band[4 * i + k] * x[i];
      }
    }
    return y;
  }
  const Field lf = laplacian(from_parts(geom_, x));
  const double vol = geom_->cell_volume();
  for (std::size_t i = 0; i < n_; ++i) y[i] = -vol * lf[i].real();
  return y;
}

Vec EnergyMatrix::solve(const Vec& b) const {
  if (geom_->is_radial()) {
    Vec x = b;
    chol_.solve(x);
    return x;
  }
  // Conjugate gradients on the cartesian Dirichlet form.
  Vec x(n_, 0.0), r = b, p = b;
  double rr = dot(r, r);
  const double stop = 1e-26 * std::max(rr, 1e-300);
  for (int it = 0; it < 5000 && rr > stop; ++it) {
    const Vec ap = apply(p);
    const double a = rr / dot(p, ap);
    for (std::size_t i = 0; i < n_; ++i) {
      x[i] += a * p[i];
      r[i] -= a * ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n_; ++i) p[i] = r[i] + beta * p[i];
  }
  return x;
}

double EnergyMatrix::inner(const Vec& x, const Vec& y) const { return dot(x, apply(y)); }

Vec real_values(const Field& f) {
  Vec v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i].real();
  return v;
}

Vec imag_values(const Field& f) {
  Vec v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i].imag();
  return v;
}

Field from_parts(const GeometryPtr& g, const Vec& re, const Vec* im) {
  std::vector<cplx> v(re.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(re[i], im ? (*im)[i] : 0.0);
  return Field(g, std::move(v));
}

double dot(const Vec& a, const Vec& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

RayleighMax constrained_rayleigh_max(const EnergyMatrix& K, const Vec& m, const std::vector<Vec>& constraints,
                                     unsigned seed) {
  const std::size_t n = K.size();
  std::vector<Vec> U, KU;
  auto project = [&](Vec& y) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < U.size(); ++k) {
        const double c = dot(KU[k], y);
        for (std::size_t i = 0; i < n; ++i) y[i] -= c * U[k][i];
      }
  };
  for (const Vec& c : constraints) {
    Vec u = c;
    project(u);
    Vec ku = K.apply(u);
    const double nrm = std::sqrt(dot(u, ku));
    if (!(nrm > 1e-12 * std::sqrt(K.inner(c, c))))
      throw Error(ErrorCode::degenerate_basis, "linearly dependent constraints");
    for (std::size_t i = 0; i < n; ++i) {
      u[i] /= nrm;
      ku[i] /= nrm;
    }
    U.push_back(std::move(u));
    KU.push_back(std::move(ku));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec q(n);
  for (auto& x : q) x = normal(rng);
  // Smooth the start vector so that it carries energy on resolved scales.
  q = K.solve(q);
  project(q);
  {
    const double nq = std::sqrt(K.inner(q, q));
    for (auto& x : q) x /= nq;
  }

  std::vector<Vec> Q, KQ;
  std::vector<double> alpha, beta;
  double theta_prev = 0.0;
  RayleighMax out;
  const int max_it = static_cast<int>(std::min<std::size_t>(120, n));
  for (int j = 0; j < max_it; ++j) {
    KQ.push_back(K.apply(q));
    Q.push_back(q);
    Vec mq(n);
    for (std::size_t i = 0; i < n; ++i) mq[i] = m[i] * q[i];
    Vec z = K.solve(mq);
    project(z);
    const double a = dot(q, mq);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < Q.size(); ++k) {
        const double c = dot(KQ[k], z);
        for (std::size_t i = 0; i < n; ++i) z[i] -= c * Q[k][i];
      }
    const double b = std::sqrt(std::max(0.0, K.inner(z, z)));

    const int s = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(s, s);
    for (int i = 0; i < s; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < s) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    const double theta = es.eigenvalues()(s - 1);
    out.value = theta;
    out.iterations = s;
    if (j > 4 && std::abs(theta - theta_prev) <= 1e-14 * std::abs(theta)) break;
    if (b <= 1e-14 * std::abs(theta)) break;
    theta_prev = theta;
    beta.push_back(b);
    for (std::size_t i = 0; i < n; ++i) q[i] = z[i] / b;
  }
  return out;
}

}  // namespace critnls::detail
