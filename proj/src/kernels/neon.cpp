// AArch64 Advanced SIMD variants (two doubles per register).

#include <arm_neon.h>

#include "kernels/tables.hpp"

namespace phonoflux::kernels::neon {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy2(std::size_t n, double a, const double* x, double b, const double* z, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i));
    vst1q_f64(y + i, vfmaq_f64(acc, vb, vld1q_f64(z + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i] + b * z[i];
}

void axpyz(std::size_t n, double a, const double* x, const double* y, double* z) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(z + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) z[i] = y[i] + a * x[i];
}

void scaled_hadamard(std::size_t n, double a, const double* w, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t wx = vmulq_f64(vld1q_f64(w + i), vld1q_f64(x + i));
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, wx));
  }
  for (; i < n; ++i) y[i] += a * (w[i] * x[i]);
}

void transpose_combine(std::size_t n, double a, double b, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  const std::size_t nt = n - n % 2;
  for (std::size_t r = 0; r < nt; r += 2) {
    for (std::size_t c = 0; c < nt; c += 2) {
      const float64x2_t t0 = vld1q_f64(x + c * n + r);
      const float64x2_t t1 = vld1q_f64(x + (c + 1) * n + r);
      const float64x2_t col0 = vzip1q_f64(t0, t1);
      const float64x2_t col1 = vzip2q_f64(t0, t1);
      double* y0 = y + r * n + c;
      double* y1 = y + (r + 1) * n + c;
      vst1q_f64(y0, vfmaq_f64(vfmaq_f64(vld1q_f64(y0), va, vld1q_f64(x + r * n + c)), vb, col0));
      vst1q_f64(y1,
                vfmaq_f64(vfmaq_f64(vld1q_f64(y1), va, vld1q_f64(x + (r + 1) * n + c)), vb, col1));
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c0 = r < nt ? nt : 0;
    for (std::size_t c = c0; c < n; ++c) {
      y[r * n + c] += a * x[r * n + c] + b * x[c * n + r];
    }
  }
}

void lindblad_diag(std::size_t n, double s, const double* kr, const double* dd, const double* dp,
                   const double* re, const double* im, double* out_re, double* out_im) {
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t w = vfmaq_f64(vld1q_f64(dd + i), vs, vld1q_f64(dp + i));
    const float64x2_t k = vld1q_f64(kr + i);
    const float64x2_t vr = vld1q_f64(re + i);
    const float64x2_t vi = vld1q_f64(im + i);
    vst1q_f64(out_re + i, vfmaq_f64(vmulq_f64(w, vi), k, vr));
    vst1q_f64(out_im + i, vfmsq_f64(vmulq_f64(k, vi), w, vr));
  }
  for (; i < n; ++i) {
    const double w = dd[i] + s * dp[i];
    out_re[i] = kr[i] * re[i] + w * im[i];
    out_im[i] = kr[i] * im[i] - w * re[i];
  }
}

void zgemm(std::size_t m, std::size_t k, std::size_t n, const double* a_re, const double* a_im,
           const double* b_re, const double* b_im, double* c_re, double* c_im) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar_row = a_re + i * k;
    const double* ai_row = a_im + i * k;
    double* cr = c_re + i * n;
    double* ci = c_im + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      float64x2_t r0 = vdupq_n_f64(0.0), r1 = vdupq_n_f64(0.0);
      float64x2_t i0 = vdupq_n_f64(0.0), i1 = vdupq_n_f64(0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t ar = vdupq_n_f64(ar_row[p]);
        const float64x2_t ai = vdupq_n_f64(ai_row[p]);
        const double* br = b_re + p * n + j;
        const double* bi = b_im + p * n + j;
        const float64x2_t br0 = vld1q_f64(br), br1 = vld1q_f64(br + 2);
        const float64x2_t bi0 = vld1q_f64(bi), bi1 = vld1q_f64(bi + 2);
        r0 = vfmsq_f64(vfmaq_f64(r0, ar, br0), ai, bi0);
        r1 = vfmsq_f64(vfmaq_f64(r1, ar, br1), ai, bi1);
        i0 = vfmaq_f64(vfmaq_f64(i0, ar, bi0), ai, br0);
        i1 = vfmaq_f64(vfmaq_f64(i1, ar, bi1), ai, br1);
      }
      vst1q_f64(cr + j, r0);
      vst1q_f64(cr + j + 2, r1);
      vst1q_f64(ci + j, i0);
      vst1q_f64(ci + j + 2, i1);
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
}  // namespace phonoflux::kernels::neon

namespace phonoflux::kernels {

const KernelTable& neon_table() {
  static const KernelTable table{"neon",
                                 neon::axpy,
                                 neon::axpy2,
                                 neon::axpyz,
                                 neon::scaled_hadamard,
                                 neon::transpose_combine,
                                 neon::lindblad_diag,
                                 neon::zgemm};
  return table;
}

}  // namespace phonoflux::kernels
