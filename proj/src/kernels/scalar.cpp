#include "kernels/tables.hpp"

namespace phonoflux::kernels::scalar {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy2(std::size_t n, double a, const double* x, double b, const double* z, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i] + b * z[i];
}

void axpyz(std::size_t n, double a, const double* x, const double* y, double* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = y[i] + a * x[i];
}

void scaled_hadamard(std::size_t n, double a, const double* w, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * (w[i] * x[i]);
}

void transpose_combine(std::size_t n, double a, double b, const double* x, double* y) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      y[r * n + c] += a * x[r * n + c] + b * x[c * n + r];
    }
  }
}

void lindblad_diag(std::size_t n, double s, const double* kr, const double* dd, const double* dp,
                   const double* re, const double* im, double* out_re, double* out_im) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w = dd[i] + s * dp[i];
    out_re[i] = kr[i] * re[i] + w * im[i];
    out_im[i] = kr[i] * im[i] - w * re[i];
  }
}

void zgemm(std::size_t m, std::size_t k, std::size_t n, const double* a_re, const double* a_im,
           const double* b_re, const double* b_im, double* c_re, double* c_im) {
  for (std::size_t i = 0; i < m; ++i) {
    double* cr = c_re + i * n;
    double* ci = c_im + i * n;
    for (std::size_t j = 0; j < n; ++j) cr[j] = ci[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double ar = a_re[i * k + p];
      const double ai = a_im[i * k + p];
      const double* br = b_re + p * n;
      const double* bi = b_im + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        cr[j] += ar * br[j] - ai * bi[j];
        ci[j] += ar * bi[j] + ai * br[j];
      }
    }
  }
}

}  // namespace phonoflux::kernels::scalar

namespace phonoflux::kernels {

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",
                                 scalar::axpy,
                                 scalar::axpy2,
                                 scalar::axpyz,
                                 scalar::scaled_hadamard,
                                 scalar::transpose_combine,
                                 scalar::lindblad_diag,
                                 scalar::zgemm};
  return table;
}

}  // namespace phonoflux::kernels
