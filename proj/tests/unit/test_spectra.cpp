#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "phonoflux/core.hpp"
#include "phonoflux/spectra.hpp"

using namespace phonoflux;

namespace {

// w(z) = (i/pi) int exp(-t^2) / (z - t) dt for Im z > 0, plain trapezoid.
Complex faddeeva_quadrature(Complex z) {
  const double h = 1e-3;
  Complex s = 0.0;
  for (double t = -12.0; t <= 12.0; t += h) s += std::exp(-t * t) / (z - t);
  return Complex(0, 1) / constants::kPi * s * h;
}

// (G * L)(x) by direct quadrature on a fine grid.
double voigt_convolution(double x, double sigma, double gamma) {
  const double h = 2e-4;
  double s = 0.0;
  for (double u = -12 * sigma; u <= 12 * sigma; u += h) {
    const double g = std::exp(-u * u / (2 * sigma * sigma)) / (sigma * std::sqrt(constants::kTwoPi));
    const double d = x - u;
    s += g * gamma / (constants::kPi * (d * d + gamma * gamma));
  }
  return s * h;
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("faddeeva function") {
  for (double y : {0.2, 1.0, 3.0}) {
    const Complex w = faddeeva(Complex(0, y));
    CHECK(w.real() == doctest::Approx(std::exp(y * y) * std::erfc(y)).epsilon(1e-10));
    CHECK(std::abs(w.imag()) < 1e-12);
  }
  for (Complex z : {Complex(0.5, 0.5), Complex(-2.0, 1.0), Complex(4.0, 0.3), Complex(10.0, 2.0)}) {
    CHECK(std::abs(faddeeva(z) - faddeeva_quadrature(z)) < 1e-8);
  }
  CHECK(std::abs(faddeeva(Complex(1.5, 0.0)).real() - std::exp(-2.25)) < 1e-12);
  CHECK_THROWS_AS(faddeeva(Complex(0, -1)), DomainError);
}

TEST_CASE("voigt profile limits and convolution") {
  for (double x : {0.0, 0.3, 2.0}) {
    CHECK(voigt_profile(x, 0.0, 0.4) == doctest::Approx(0.4 / (constants::kPi * (x * x + 0.16))).epsilon(1e-14));
    CHECK(voigt_profile(x, 0.4, 0.0) ==
          doctest::Approx(std::exp(-x * x / 0.32) / (0.4 * std::sqrt(constants::kTwoPi))).epsilon(1e-14));
    CHECK(voigt_profile(x, 1e-9, 0.4) == doctest::Approx(voigt_profile(x, 0.0, 0.4)).epsilon(1e-6));
    CHECK(voigt_profile(x, 0.4, 1e-9) == doctest::Approx(voigt_profile(x, 0.4, 0.0)).epsilon(1e-6));
  }
  CHECK(std::abs(voigt_profile(0.0, 1.0, 1.0) - voigt_convolution(0.0, 1.0, 1.0)) < 1e-6);
  CHECK(std::abs(voigt_profile(1.3, 0.5, 0.2) - voigt_convolution(1.3, 0.5, 0.2)) < 1e-6);
  CHECK_THROWS_AS(voigt_profile(0.0, 0.0, 0.0), DomainError);
}

TEST_CASE("voigt normalization") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double s = u(rng), g = u(rng);
    const double hw = voigt_hwhm(s, g);
    const double lim = 40 * hw;
    const int n = 400001;
    const double h = 2 * lim / (n - 1);
    double area = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = -lim + i * h;
      area += (i == 0 || i == n - 1 ? 0.5 : 1.0) * voigt_profile(x, s, g);
    }
    area *= h;
    // Tail beyond +-lim: L + (sigma^2 / 2) L'' to leading order, i.e. the
    // Lorentzian (2/pi) atan(gamma / lim) plus 2 sigma^2 gamma / (pi lim^3).
    area += 2 * std::atan(g / lim) / constants::kPi + 2 * s * s * g / (constants::kPi * lim * lim * lim);
    CHECK(std::abs(area - 1.0) < 1e-6);
  }
}

TEST_CASE("displaced thermal distribution") {
  const double tau = 0.57 / 1.57;
  for (int n = 0; n < 10; ++n) {
    CHECK(displaced_thermal_pn(0.57, 0.0, n) == doctest::Approx((1 - tau) * std::pow(tau, n)).epsilon(1e-12));
    CHECK(displaced_thermal_pn(0.0, 1.5, n) ==
          doctest::Approx(std::exp(-1.5) * std::pow(1.5, n) / std::tgamma(n + 1.0)).epsilon(1e-12));
  }

  // Oracle: D(alpha) rho_th D(alpha)^dagger in a 60-dimensional Fock space.
  const int dim = 60;
  OperatorMatrix rho = OperatorMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) rho(n, n) = (1 - tau) * std::pow(tau, n);
  const OperatorMatrix d = displacement_operator(std::sqrt(2.0), dim).op;
  const OperatorMatrix out = d * rho * d.adjoint();
  for (int n = 0; n < 10; ++n) CHECK(std::abs(displaced_thermal_pn(0.57, 2.0, n) - out(n, n).real()) < 1e-9);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double nb = u(rng), a2 = u(rng);
    const int n_max = 150;
    double total = 0.0;
    for (int n = 0; n <= n_max; ++n) total += displaced_thermal_pn(nb, a2, n);
    CHECK(std::abs(total + displaced_thermal_tail_bound(nb, a2, n_max) - 1.0) < 1e-8);
    const double tail = 1.0 - [&] {
      double s = 0.0;
      for (int n = 0; n <= 8; ++n) s += displaced_thermal_pn(nb, a2, n);
      return s;
    }();
    CHECK(tail <= displaced_thermal_tail_bound(nb, a2, 8) + 1e-12);
  }
}

TEST_CASE("synthesized spectra") {
  const auto f = grid(-40.0, 10.0, 5001);
  const SpectrumTrace one = synth_number_splitting(0.0, 2.23, {1.0}, {PeakWidths{0.3, 0.1}}, f);
  const auto it = std::max_element(one.amplitude.begin(), one.amplitude.end());
  CHECK(f[static_cast<std::size_t>(it - one.amplitude.begin())] == doctest::Approx(0.0).epsilon(1e-12));

  const auto p = PhononDistribution::model(0.57, 1.5, 10);
  const SpectrumTrace t = synth_number_splitting(0.0, 2.23, p, {PeakWidths{0.3, 0.0}}, f);
  double area = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i) area += 0.5 * (t.amplitude[i] + t.amplitude[i - 1]) * (f[i] - f[i - 1]);
  CHECK(std::abs(area - std::accumulate(p.begin(), p.end(), 0.0)) < 1e-6);
  CHECK_THROWS_AS(synth_number_splitting(0.0, 2.23, p, {PeakWidths{}}, grid(-5, 5, 101)), PreconditionViolation);
}

TEST_CASE("number-splitting fit closure") {
  const auto f = grid(-22.0, 4.0, 521);
  const auto truth = PhononDistribution::model(0.57, 1.5, 8);
  const SpectrumTrace clean = synth_number_splitting(0.0, 2.23, truth, {PeakWidths{0.3, 0.15}}, f);
  const double peak = *std::max_element(clean.amplitude.begin(), clean.amplitude.end());
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, peak / 20);
  SpectrumTrace noisy = clean;
  for (double& a : noisy.amplitude) a += g(rng);

  NumberSplittingInit init;
  init.f_eg = 0.2;
  init.two_chi = 2.1;
  init.widths = {0.25, 0.2};
  const NumberSplittingFit fit = fit_number_splitting(noisy, 8, init);
  CHECK(std::abs(fit.peaks.two_chi - 2.23) < 0.05);
  for (std::size_t n = 0; n < 6; ++n) {
    const double est = fit.peaks.peaks[n].area;
    CHECK(std::abs(est - truth[n]) < 2 * fit.peaks.peaks[n].area_err + 1e-12);
  }
  CHECK(std::abs(fit.distribution.n_bar_th - 0.57) < 2 * fit.distribution.n_bar_th_err);
  CHECK(std::abs(fit.distribution.alpha_sq - 1.5) < 2 * fit.distribution.alpha_sq_err);
}

TEST_CASE("zero drive spectrum pins alpha to zero") {
  const auto f = grid(-16.0, 4.0, 401);
  const auto truth = PhononDistribution::model(0.57, 0.0, 6);
  const SpectrumTrace clean = synth_number_splitting(0.0, 2.23, truth, {PeakWidths{0.3, 0.15}}, f);
  const double peak = *std::max_element(clean.amplitude.begin(), clean.amplitude.end());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, peak / 20);
  SpectrumTrace noisy = clean;
  for (double& a : noisy.amplitude) a += g(rng);
  NumberSplittingInit init;
  init.two_chi = 2.2;
  init.alpha_sq = 0.3;
  const NumberSplittingFit fit = fit_number_splitting(noisy, 6, init);
  CHECK(fit.distribution.alpha_fixed_zero);
  CHECK(fit.distribution.alpha_sq == 0.0);
  CHECK(std::abs(fit.distribution.n_bar_th - 0.57) < 2 * fit.distribution.n_bar_th_err + 1e-12);
  CHECK(std::abs(fit.distribution.n_bar_th - 0.57) < 0.06);
}

TEST_CASE("calibration fit") {
  std::vector<CalibrationPoint> exact;
  for (double x : {0.0, 0.5, 1.0, 2.0}) exact.push_back({x, 0.57 + 2 * x, 0.0});
  const CalibrationResult r = calibration_fit(exact);
  CHECK(r.n_bar_th == doctest::Approx(0.57).epsilon(1e-12));
  CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(calibration_fit({{0.0, 0.5, 0.1}, {0.0, 0.6, 0.1}, {0.0, 0.55, 0.1}}), DomainError);

  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  int covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<CalibrationPoint> pts;
    for (double x : {0.0, 0.3, 0.6, 1.0, 1.5, 2.0}) {
      const double s = 0.05 + 0.03 * x;
      pts.push_back({x, 0.57 + 1.2 * x + s * g(rng), s});
    }
    const CalibrationResult c = calibration_fit(pts);
    covered += std::abs(c.n_bar_th - 0.57) < 2 * c.n_bar_th_err;
  }
  CHECK(double(covered) / trials == doctest::Approx(0.954).epsilon(0.05));
}

TEST_CASE("drift alignment") {
  const auto f = grid(-20.0, 5.0, 501);
  const double h = f[1] - f[0];
  const auto p = PhononDistribution::model(0.57, 0.5, 8);
  const SpectrumTrace base = synth_number_splitting(0.0, 2.23, p, {PeakWidths{0.3, 0.15}}, f);

  DriftAlignOptions opt;
  opt.window_lo = -1.5;
  opt.window_hi = 1.5;
  for (int bin : {1, 2, 3}) {
    opt.bin = bin;
    const DriftAlignResult r = drift_align({base, base, base, base}, opt);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(r.trace.amplitude[i] == doctest::Approx(base.amplitude[i]));
  }

  // +k grid steps of drift per trace.
  std::vector<SpectrumTrace> drifted;
  for (int k = 0; k < 8; ++k) {
    SpectrumTrace t = base;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const long src = static_cast<long>(i) - 2 * k;
      t.amplitude[i] = src >= 0 ? base.amplitude[static_cast<std::size_t>(src)] : 0.0;
    }
    drifted.push_back(t);
  }
  opt.bin = 1;
  opt.window_lo = -1.0;
  opt.window_hi = 30 * h;
  const DriftAlignResult r = drift_align(drifted, opt);
  REQUIRE(r.centers.size() == 8);
  const double target = std::accumulate(r.centers.begin(), r.centers.end(), 0.0) / 8;
  double ss = 0.0;
  for (std::size_t k = 0; k < 8; ++k) ss += std::pow(r.centers[k] + r.shifts[k] * h - target, 2);
  CHECK(std::sqrt(ss / 8) < h);

  // One 10x anomaly among 20 traces.
  std::vector<SpectrumTrace> many(20, base);
  for (double& a : many[7].amplitude) a *= 10;
  opt.window_lo = -1.5;
  opt.window_hi = 1.5;
  const DriftAlignResult ra = drift_align(many, opt);
  CHECK(ra.rejected == std::vector<int>{7});
  CHECK(!ra.warnings.empty());

  // Result is independent of trace order.
  std::vector<SpectrumTrace> rev(drifted.rbegin(), drifted.rend());
  opt.window_lo = -1.0;
  opt.window_hi = 30 * h;
  const DriftAlignResult r2 = drift_align(rev, opt);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (std::isnan(r.trace.amplitude[i])) {
      CHECK(std::isnan(r2.trace.amplitude[i]));
    } else {
      CHECK(r2.trace.amplitude[i] == doctest::Approx(r.trace.amplitude[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("effective temperature") {
  const double t = effective_temperature(0.57, 690e6);
  CHECK(t == doctest::Approx(0.033).epsilon(0.03));
  CHECK(thermal_occupation(0.033, 690e6) == doctest::Approx(0.58).epsilon(0.01));
  CHECK(thermal_occupation(t, 690e6) == doctest::Approx(0.57).epsilon(1e-12));
  const double classical = 100 * constants::kPlanck * 690e6 / constants::kBoltzmann;
  CHECK(effective_temperature(100, 690e6) == doctest::Approx(classical).epsilon(0.01));
  CHECK(thermal_occupation(0.0, 690e6) == 0.0);
  CHECK_THROWS_AS(effective_temperature(0.0, 690e6), DomainError);
}

}
