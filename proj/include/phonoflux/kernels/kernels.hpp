#pragma once

// Inner loops of the structured Lindblad right-hand side.  Every kernel has a
// scalar reference version; vector variants must agree with it to rounding.
//
// All arrays are plain double buffers.  Complex matrices are passed as
// separate real/imaginary planes.

#include <cstddef>
#include <string>
#include <vector>

namespace phonoflux::kernels {

struct KernelTable {
  const char* name;

  // y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // y += a * x + b * z
  void (*axpy2)(std::size_t n, double a, const double* x, double b, const double* z, double* y);
  // z = y + a * x
  void (*axpyz)(std::size_t n, double a, const double* x, const double* y, double* z);
  // y += a * (w .* x)
  void (*scaled_hadamard)(std::size_t n, double a, const double* w, const double* x, double* y);
  // Square row-major n x n: y[r][c] += a * x[r][c] + b * x[c][r]
  void (*transpose_combine)(std::size_t n, double a, double b, const double* x, double* y);
  // Diagonal Lindblad part, assigning (not accumulating) the outputs:
  //   w = dd + s * dp
  //   out_re = kr .* re + w .* im
  //   out_im = kr .* im - w .* re
  void (*lindblad_diag)(std::size_t n, double s, const double* kr, const double* dd,
                        const double* dp, const double* re, const double* im, double* out_re,
                        double* out_im);
  // Complex product C = A * B on row-major planes; A is m x k, B is k x n.
  // C must not alias A or B.
  void (*zgemm)(std::size_t m, std::size_t k, std::size_t n, const double* a_re,
                const double* a_im, const double* b_re, const double* b_im, double* c_re,
                double* c_im);
};

const KernelTable& scalar_kernels();

/// Null when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Best available table.  Setting PHONOFLUX_KERNELS=scalar in the environment
/// forces the reference path.
const KernelTable& active_kernels();

std::vector<const KernelTable*> available_kernels();

}  // namespace phonoflux::kernels
