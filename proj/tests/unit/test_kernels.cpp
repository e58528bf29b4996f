#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "phonoflux/kernels/kernels.hpp"

using namespace phonoflux::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar table is always available and first") {
  const auto all = available_kernels();
  REQUIRE(!all.empty());
  CHECK(all.front() == &scalar_kernels());
  bool active_listed = false;
  for (const auto* k : all) active_listed = active_listed || k == &active_kernels();
  CHECK(active_listed);
  MESSAGE("active kernels: " << active_kernels().name);
}

TEST_CASE("vector variants match the scalar reference") {
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(42);
  for (const KernelTable* k : available_kernels()) {
    CAPTURE(k->name);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 17u, 60u, 61u}) {
      CAPTURE(n);
      const auto x = rand_vec(n, rng), z = rand_vec(n, rng), w = rand_vec(n, rng), y0 = rand_vec(n, rng);
      auto y1 = y0, y2 = y0;

      ref.axpy(n, 0.37, x.data(), y1.data());
      k->axpy(n, 0.37, x.data(), y2.data());
      CHECK(max_abs_diff(y1, y2) < 1e-14);

      y1 = y0, y2 = y0;
      ref.axpy2(n, 0.3, x.data(), -1.1, z.data(), y1.data());
      k->axpy2(n, 0.3, x.data(), -1.1, z.data(), y2.data());
      CHECK(max_abs_diff(y1, y2) < 1e-14);

      std::vector<double> o1(n), o2(n);
      ref.axpyz(n, 2.5, x.data(), y0.data(), o1.data());
      k->axpyz(n, 2.5, x.data(), y0.data(), o2.data());
      CHECK(max_abs_diff(o1, o2) < 1e-14);

      y1 = y0, y2 = y0;
      ref.scaled_hadamard(n, -0.8, w.data(), x.data(), y1.data());
      k->scaled_hadamard(n, -0.8, w.data(), x.data(), y2.data());
      CHECK(max_abs_diff(y1, y2) < 1e-14);

      const auto kr = rand_vec(n, rng), dd = rand_vec(n, rng), dp = rand_vec(n, rng);
      std::vector<double> r1(n), i1(n), r2(n), i2(n);
      ref.lindblad_diag(n, 0.6, kr.data(), dd.data(), dp.data(), x.data(), z.data(), r1.data(), i1.data());
      k->lindblad_diag(n, 0.6, kr.data(), dd.data(), dp.data(), x.data(), z.data(), r2.data(), i2.data());
      CHECK(max_abs_diff(r1, r2) < 1e-14);
      CHECK(max_abs_diff(i1, i2) < 1e-14);
    }
    for (std::size_t n : {1u, 2u, 5u, 8u, 13u}) {
      const auto x = rand_vec(n * n, rng), y0 = rand_vec(n * n, rng);
      auto y1 = y0, y2 = y0;
      ref.transpose_combine(n, 0.5, -0.25, x.data(), y1.data());
      k->transpose_combine(n, 0.5, -0.25, x.data(), y2.data());
      CHECK(max_abs_diff(y1, y2) < 1e-14);
    }
  }
}

TEST_CASE("zgemm matches a naive complex product") {
  std::mt19937_64 rng(9);
  for (const KernelTable* k : available_kernels()) {
    CAPTURE(k->name);
    for (auto [m, kk, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {3, 5, 2}, {6, 6, 6},
                           {7, 9, 11}, {60, 60, 60}}) {
      const auto ar = rand_vec(m * kk, rng), ai = rand_vec(m * kk, rng);
      const auto br = rand_vec(kk * n, rng), bi = rand_vec(kk * n, rng);
      std::vector<double> cr(m * n), ci(m * n), er(m * n, 0.0), ei(m * n, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t l = 0; l < kk; ++l) {
            er[i * n + j] += ar[i * kk + l] * br[l * n + j] - ai[i * kk + l] * bi[l * n + j];
            ei[i * n + j] += ar[i * kk + l] * bi[l * n + j] + ai[i * kk + l] * br[l * n + j];
          }
      k->zgemm(m, kk, n, ar.data(), ai.data(), br.data(), bi.data(), cr.data(), ci.data());
      CHECK(max_abs_diff(cr, er) < 1e-12 * double(kk));
      CHECK(max_abs_diff(ci, ei) < 1e-12 * double(kk));
    }
  }
}

}
