// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "kernels/tables.hpp"

namespace phonoflux::kernels::avx2 {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy2(std::size_t n, double a, const double* x, double b, const double* z, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(z + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i] + b * z[i];
}

void axpyz(std::size_t n, double a, const double* x, const double* y, double* z) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(z + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) z[i] = y[i] + a * x[i];
}

void scaled_hadamard(std::size_t n, double a, const double* w, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, wx, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * (w[i] * x[i]);
}

// 4x4 tiles: the transposed operand is loaded as four rows and shuffled.
void transpose_combine(std::size_t n, double a, double b, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const std::size_t nt = n - n % 4;
  for (std::size_t r = 0; r < nt; r += 4) {
    for (std::size_t c = 0; c < nt; c += 4) {
      const __m256d t0 = _mm256_loadu_pd(x + (c + 0) * n + r);
      const __m256d t1 = _mm256_loadu_pd(x + (c + 1) * n + r);
      const __m256d t2 = _mm256_loadu_pd(x + (c + 2) * n + r);
      const __m256d t3 = _mm256_loadu_pd(x + (c + 3) * n + r);
      const __m256d u0 = _mm256_unpacklo_pd(t0, t1);
      const __m256d u1 = _mm256_unpackhi_pd(t0, t1);
      const __m256d u2 = _mm256_unpacklo_pd(t2, t3);
      const __m256d u3 = _mm256_unpackhi_pd(t2, t3);
      const __m256d col[4] = {_mm256_permute2f128_pd(u0, u2, 0x20),
                              _mm256_permute2f128_pd(u1, u3, 0x20),
                              _mm256_permute2f128_pd(u0, u2, 0x31),
                              _mm256_permute2f128_pd(u1, u3, 0x31)};
      for (std::size_t k = 0; k < 4; ++k) {
        double* yp = y + (r + k) * n + c;
        __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + (r + k) * n + c), _mm256_loadu_pd(yp));
        acc = _mm256_fmadd_pd(vb, col[k], acc);
        _mm256_storeu_pd(yp, acc);
      }
    }
  }
  // Ragged edges.
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c0 = r < nt ? nt : 0;
    for (std::size_t c = c0; c < n; ++c) {
      y[r * n + c] += a * x[r * n + c] + b * x[c * n + r];
    }
  }
}

void lindblad_diag(std::size_t n, double s, const double* kr, const double* dd, const double* dp,
                   const double* re, const double* im, double* out_re, double* out_im) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w = _mm256_fmadd_pd(vs, _mm256_loadu_pd(dp + i), _mm256_loadu_pd(dd + i));
    const __m256d k = _mm256_loadu_pd(kr + i);
    const __m256d vr = _mm256_loadu_pd(re + i);
    const __m256d vi = _mm256_loadu_pd(im + i);
    _mm256_storeu_pd(out_re + i, _mm256_fmadd_pd(k, vr, _mm256_mul_pd(w, vi)));
    _mm256_storeu_pd(out_im + i, _mm256_fnmadd_pd(w, vr, _mm256_mul_pd(k, vi)));
  }
  for (; i < n; ++i) {
    const double w = dd[i] + s * dp[i];
    out_re[i] = kr[i] * re[i] + w * im[i];
    out_im[i] = kr[i] * im[i] - w * re[i];
  }
}

// One output row at a time, eight columns held in registers across the
// inner dimension.
void zgemm(std::size_t m, std::size_t k, std::size_t n, const double* a_re, const double* a_im,
           const double* b_re, const double* b_im, double* c_re, double* c_im) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar_row = a_re + i * k;
    const double* ai_row = a_im + i * k;
    double* cr = c_re + i * n;
    double* ci = c_im + i * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d r0 = _mm256_setzero_pd(), r1 = _mm256_setzero_pd();
      __m256d i0 = _mm256_setzero_pd(), i1 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d ar = _mm256_set1_pd(ar_row[p]);
        const __m256d ai = _mm256_set1_pd(ai_row[p]);
        const double* br = b_re + p * n + j;
        const double* bi = b_im + p * n + j;
        const __m256d br0 = _mm256_loadu_pd(br), br1 = _mm256_loadu_pd(br + 4);
        const __m256d bi0 = _mm256_loadu_pd(bi), bi1 = _mm256_loadu_pd(bi + 4);
        r0 = _mm256_fnmadd_pd(ai, bi0, _mm256_fmadd_pd(ar, br0, r0));
        r1 = _mm256_fnmadd_pd(ai, bi1, _mm256_fmadd_pd(ar, br1, r1));
        i0 = _mm256_fmadd_pd(ai, br0, _mm256_fmadd_pd(ar, bi0, i0));
        i1 = _mm256_fmadd_pd(ai, br1, _mm256_fmadd_pd(ar, bi1, i1));
      }
      _mm256_storeu_pd(cr + j, r0);
      _mm256_storeu_pd(cr + j + 4, r1);
      _mm256_storeu_pd(ci + j, i0);
      _mm256_storeu_pd(ci + j + 4, i1);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d r0 = _mm256_setzero_pd(), i0 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d ar = _mm256_set1_pd(ar_row[p]);
        const __m256d ai = _mm256_set1_pd(ai_row[p]);
        const __m256d br0 = _mm256_loadu_pd(b_re + p * n + j);
        const __m256d bi0 = _mm256_loadu_pd(b_im + p * n + j);
        r0 = _mm256_fnmadd_pd(ai, bi0, _mm256_fmadd_pd(ar, br0, r0));
        i0 = _mm256_fmadd_pd(ai, br0, _mm256_fmadd_pd(ar, bi0, i0));
      }
      _mm256_storeu_pd(cr + j, r0);
      _mm256_storeu_pd(ci + j, i0);
    }
    for (; j < n; ++j) {
      double sr = 0.0, si = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        sr += ar_row[p] * b_re[p * n + j] - ai_row[p] * b_im[p * n + j];
        si += ar_row[p] * b_im[p * n + j] + ai_row[p] * b_re[p * n + j];
      }
      cr[j] = sr;
      ci[j] = si;
    }
  }
}

}  // namespace
}  // namespace phonoflux::kernels::avx2

namespace phonoflux::kernels {

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2",
                                 avx2::axpy,
                                 avx2::axpy2,
                                 avx2::axpyz,
                                 avx2::scaled_hadamard,
                                 avx2::transpose_combine,
                                 avx2::lindblad_diag,
                                 avx2::zgemm};
  return table;
}

}  // namespace phonoflux::kernels
