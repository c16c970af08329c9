#include "detail/numerics.hpp"

#include <algorithm>

namespace critnls::detail {

int BandLU::factor() {
  ipiv_.assign(n_, 0);
  // 1-norm of the original matrix for the condition estimate.
  double anorm = 0.0;
  for (int j = 0; j < n_; ++j) {
    double col = 0.0;
    for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i)
      col += std::abs(ab_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j]);
    anorm = std::max(anorm, col);
  }
  int info = 0;
  dgbtrf_(&n_, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
  if (info != 0) {
    rcond_ = 0.0;
    return info;
  }
  std::vector<double> work(3 * static_cast<std::size_t>(n_));
  std::vector<int> iwork(n_);
  const char norm = '1';
  dgbcon_(&norm, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &anorm, &rcond_, work.data(), iwork.data(),
          &info);
  return info;
}

void BandLU::solve(std::vector<double>& b) const {
  const char trans = 'N';
  const int nrhs = 1;
  int info = 0;
  dgbtrs_(&trans, &n_, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), b.data(), &n_, &info);
}

int ComplexBandLU::factor() {
  ipiv_.assign(n_, 0);
  int info = 0;
  zgbtrf_(&n_, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
  return info;
}

void ComplexBandLU::solve(std::vector<std::complex<double>>& b) const {
  const char trans = 'N';
  const int nrhs = 1;
  int info = 0;
  zgbtrs_(&trans, &n_, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), b.data(), &n_, &info);
}

int BandCholesky::factor() {
  const char uplo = 'U';
  int info = 0;
  dpbtrf_(&uplo, &n_, &kd_, ab_.data(), &ldab_, &info);
  return info;
}

void BandCholesky::solve(std::vector<double>& b) const {
  const char uplo = 'U';
  const int nrhs = 1;
  int info = 0;
  dpbtrs_(&uplo, &n_, &kd_, &nrhs, ab_.data(), &ldab_, b.data(), &n_, &info);
}

}  // namespace critnls::detail
