#pragma once

#include <cmath>
#include <complex>
#include <vector>

extern "C" {
// Fortran LAPACK entry points shipped by OpenBLAS.
void dgeev_(const char* jobvl, const char* jobvr, const int* n, double* a, const int* lda, double* wr, double* wi,
            double* vl, const int* ldvl, double* vr, const int* ldvr, double* work, const int* lwork, int* info);
void dgbtrf_(const int* m, const int* n, const int* kl, const int* ku, double* ab, const int* ldab, int* ipiv,
             int* info);
void dgbtrs_(const char* trans, const int* n, const int* kl, const int* ku, const int* nrhs, const double* ab,
             const int* ldab, const int* ipiv, double* b, const int* ldb, int* info);
void dgbcon_(const char* norm, const int* n, const int* kl, const int* ku, const double* ab, const int* ldab,
             const int* ipiv, const double* anorm, double* rcond, double* work, int* iwork, int* info);
void dpbtrf_(const char* uplo, const int* n, const int* kd, double* ab, const int* ldab, int* info);
void dpbtrs_(const char* uplo, const int* n, const int* kd, const int* nrhs, const double* ab, const int* ldab,
             double* b, const int* ldb, int* info);
void zgbtrf_(const int* m, const int* n, const int* kl, const int* ku, std::complex<double>* ab, const int* ldab,
             int* ipiv, int* info);
void zgbtrs_(const char* trans, const int* n, const int* kl, const int* ku, const int* nrhs,
             const std::complex<double>* ab, const int* ldab, const int* ipiv, std::complex<double>* b, const int* ldb,
             int* info);
void dgesv_(const int* n, const int* nrhs, double* a, const int* lda, int* ipiv, double* b, const int* ldb,
            int* info);
void dsyev_(const char* jobz, const char* uplo, const int* n, double* a, const int* lda, double* w, double* work,
            const int* lwork, int* info);
}

namespace critnls::detail {

/// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// General banded matrix in LAPACK band storage, factorized in place by
/// dgbtrf. Row-band input layout matches Geometry::laplacian_band().
class BandLU {
 public:
  BandLU() = default;
  /// entries(i, k) multiplies column i - kl + k, k in [0, kl + ku].
  BandLU(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0) {}

  void set(int i, int j, double v) { ab_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j] = v; }
  void add(int i, int j, double v) { ab_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j] += v; }
  int size() const noexcept { return n_; }

  /// Returns the LAPACK info code; on success rcond() holds the 1-norm
  /// reciprocal condition estimate.
  int factor();
  double rcond() const noexcept { return rcond_; }
  void solve(std::vector<double>& b) const;

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
  double rcond_ = 0.0;
};

/// Complex general band, zgbtrf / zgbtrs.
class ComplexBandLU {
 public:
  ComplexBandLU() = default;
  ComplexBandLU(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0) {}
  void add(int i, int j, std::complex<double> v) { ab_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j] += v; }
  int factor();
  void solve(std::vector<std::complex<double>>& b) const;

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<std::complex<double>> ab_;
  std::vector<int> ipiv_;
};

/// Symmetric positive definite band (upper storage) via dpbtrf.
class BandCholesky {
 public:
  BandCholesky() = default;
  BandCholesky(int n, int kd) : n_(n), kd_(kd), ldab_(kd + 1), ab_(ldab_ * n, 0.0) {}
  /// Sets entry (i, j) with i <= j <= i + kd.
  void set(int i, int j, double v) { ab_[static_cast<std::size_t>(j) * ldab_ + kd_ + i - j] = v; }
  int factor();
  void solve(std::vector<double>& b) const;

 private:
  int n_ = 0, kd_ = 0, ldab_ = 0;
  std::vector<double> ab_;
};

}  // namespace critnls::detail
