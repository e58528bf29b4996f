#include <doctest.h>

#include <cmath>
#include <random>

#include "phonoflux/core.hpp"
#include "phonoflux/pulses.hpp"

using namespace phonoflux;

namespace {

// J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt; the trapezoid rule is
// spectrally accurate for this periodic integrand.
double bessel_quadrature(int n, double x) {
  const int m = 400;
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    const double t = constants::kTwoPi * i / m;
    s += std::cos(n * t - x * std::sin(t));
  }
  return s / m;
}

}  // namespace

TEST_SUITE("pulses") {

TEST_CASE("ramp envelope") {
  ModulationPulse p;
  CHECK(sin4_ramp_envelope(p, 0.5 * p.tau_r) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sin4_ramp_envelope(p, p.tau_r) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sin4_ramp_envelope(p, 0.5 * p.tau_mod) == 1.0);
  CHECK(sin4_ramp_envelope(p, p.tau_mod - 0.5 * p.tau_r) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sin4_ramp_envelope(p, -1.0) == 0.0);
  CHECK(sin4_ramp_envelope(p, p.tau_mod + 1.0) == 0.0);

  // Continuity of the derivative on a 1 ps grid around the half point.
  const double dt = 1e-3, t = 0.5 * p.tau_r;
  auto e = [&](double s) { return sin4_ramp_envelope(p, s); };
  const double left = (3 * e(t) - 4 * e(t - dt) + e(t - 2 * dt)) / (2 * dt);
  const double right = (-3 * e(t) + 4 * e(t + dt) - e(t + 2 * dt)) / (2 * dt);
  CHECK(std::abs(left - right) < 1e-6);
  for (double s : {p.tau_r, p.tau_mod - p.tau_r}) {
    const double l = (3 * e(s) - 4 * e(s - dt) + e(s - 2 * dt)) / (2 * dt);
    const double r = (-3 * e(s) + 4 * e(s + dt) - e(s + 2 * dt)) / (2 * dt);
    CHECK(std::abs(l - r) < 1e-6);
  }
  double worst = 0.0;
  for (double s = dt; s < p.tau_mod - dt; s += dt) {
    const double d1 = (sin4_ramp_envelope(p, s) - sin4_ramp_envelope(p, s - dt)) / dt;
    const double d2 = (sin4_ramp_envelope(p, s + dt) - sin4_ramp_envelope(p, s)) / dt;
    worst = std::max(worst, std::abs(d2 - d1));
  }
  // The second derivative is bounded, so adjacent slopes differ by O(dt).
  CHECK(worst < 1e-3);

  const auto samples = sample_envelope(p, 0.5);
  CHECK(samples.times.front() == 0.0);
  CHECK(samples.times.back() == doctest::Approx(p.tau_mod));
  CHECK_THROWS_AS(sample_envelope(p, 0.0), DomainError);
}

TEST_CASE("flux waveform") {
  ModulationPulse p;
  p.v0 = 0.0;
  for (double t : {5.0, 50.0, 95.0}) CHECK(flux_drive_waveform(p, t) == 0.0);
  p.v0 = 60.0;
  ModulationPulse q = p;
  q.theta = constants::kPi;
  for (double t : {3.0, 20.0, 50.0, 97.0}) {
    CHECK(flux_drive_waveform(q, t) == doctest::Approx(-flux_drive_waveform(p, t)).epsilon(1e-12));
  }
  // Flat-top peak: cos(2 pi f t) = 1 at t = k / f_mod.
  const double t_peak = std::round(50.0 * p.f_mod / 1000.0) * 1000.0 / p.f_mod;
  CHECK(flux_drive_waveform(p, t_peak) == doctest::Approx(60.0 * 1.7e-5).epsilon(1e-9));
  CHECK(60.0 * 1.7e-5 == doctest::Approx(1.02e-3));

  ModulationPulse bad;
  bad.tau_mod = 15.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("bessel functions") {
  CHECK(bessel_j1(0.0) == 0.0);
  CHECK(bessel_j0(0.0) == 1.0);
  CHECK(bessel_j1(1.8412) == doctest::Approx(bessel_quadrature(1, 1.8412)).epsilon(1e-12));
  CHECK(bessel_j1(1.8412) == doctest::Approx(0.5819).epsilon(1e-4));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    CHECK(bessel_j1(-x) == -bessel_j1(x));
    CHECK(std::abs(bessel_j0(x) - bessel_quadrature(0, x)) < 1e-10);
    CHECK(std::abs(bessel_j1(x) - bessel_quadrature(1, x)) < 1e-10);
    CHECK(std::abs(bessel_j2(x) - bessel_quadrature(2, x)) < 1e-10);
  }
}

TEST_CASE("sideband coupling") {
  CHECK(sideband_coupling_rate(13.56, 0.0, 155.6) == 0.0);
  for (double r : {0.01, 0.1, 0.19}) {
    const double eps = r * 155.6;
    CHECK(sideband_coupling_rate(13.56, eps, 155.6) == doctest::Approx(13.56 * r / 2).epsilon(0.01));
  }
  // Maximum over amplitude at the first J1 maximum.
  double best = 0, best_r = 0;
  for (double r = 1.5; r < 2.2; r += 1e-4) {
    const double g = sideband_coupling_rate(13.56, r * 155.6, 155.6);
    if (g > best) best = g, best_r = r;
  }
  CHECK(best_r == doctest::Approx(1.8412).epsilon(1e-3));
  CHECK(best == doctest::Approx(bessel_quadrature(1, 1.8412) * 13.56).epsilon(1e-6));

  ModulationPulse p;
  p.v0 = 100.0;
  CHECK(modulation_depth_mhz(p, -11.34) == doctest::Approx(1.7e-5 * 100 * 11.34 * 1000).epsilon(1e-12));
}

}
