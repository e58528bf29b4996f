#include <doctest.h>

#include <cmath>
#include <random>

#include "phonoflux/decoherence.hpp"

using namespace phonoflux;

namespace {

double thermal_rate_oracle(double kappa, double two_chi_mhz, double n) {
  const double chi = constants::kTwoPi * 0.5 * two_chi_mhz;
  const std::complex<double> a(1.0, 2 * chi / kappa);
  const std::complex<double> root = std::sqrt(a * a + std::complex<double>(0, 8 * chi * n / kappa));
  return 0.5 * kappa * (root - 1.0).real();
}

}  // namespace

TEST_SUITE("decoherence") {

TEST_CASE("thermal phonon dephasing") {
  const double kappa = 1 / 0.85;
  CHECK(thermal_dephasing_rate(kappa, -5.6, 0.0) == doctest::Approx(0.0));
  const double rate = thermal_dephasing_rate(kappa, -5.6, 0.57);
  CHECK(rate == doctest::Approx(thermal_rate_oracle(kappa, -11.2, 0.57)).epsilon(1e-12));
  CHECK(1 / rate == doctest::Approx(1.5).epsilon(0.1));
  for (double two_chi : {1.6, 1.67, 2.23, 5.0, 11.2}) {
    const double inv = 1 / thermal_dephasing_rate(kappa, 0.5 * two_chi, 0.57);
    CHECK(inv >= 1.4);
    CHECK(inv <= 1.7);
  }
}

TEST_CASE("filter functions") {
  CHECK(filter_function(0, 0.0, 1e-6) == 1.0);
  CHECK(filter_function(1, 0.0, 1e-6) == 0.0);
  const double t = 2e-6;
  for (int k = 1; k <= 4; ++k) CHECK(std::abs(filter_function(0, constants::kTwoPi * k / t, t)) < 1e-20);
  CHECK_THROWS_AS(filter_function(2, 1.0, 1.0), DomainError);
}

TEST_CASE("1/f flux-noise dephasing times") {
  OneOverFNoise noise;
  noise.validate();
  const double t1a = dephasing_time_1f(noise, 10.67, 1), t1b = dephasing_time_1f(noise, 11.34, 1);
  const double t0a = dephasing_time_1f(noise, 10.67, 0), t0b = dephasing_time_1f(noise, 11.34, 0);
  CHECK(t1a == doctest::Approx(18.0).epsilon(0.1));
  CHECK(t1b == doctest::Approx(17.0).epsilon(0.1));
  CHECK(t0a == doctest::Approx(3.6).epsilon(0.1));
  CHECK(t0b == doctest::Approx(3.4).epsilon(0.1));
  CHECK(t1a / t0a == doctest::Approx(4.9).epsilon(0.1));
  // Leading-order formula: T scales as 1 / (A |slope|).
  CHECK(dephasing_time_1f(noise, -10.67, 1) == doctest::Approx(t1a));
  OneOverFNoise twice = noise;
  twice.a_phi = 2.0;
  CHECK(dephasing_time_1f(twice, 10.67, 0) == doctest::Approx(t0a / 2));

  OneOverFNoise bad;
  bad.gamma_exp = 0.9;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("dispersive Ramsey model") {
  RamseyDispersiveParams p;
  p.amplitudes = {0.7};
  for (double t : {0.0, 0.1, 0.37}) {
    CHECK(ramsey_dispersive_model(t, p, 0) ==
          doctest::Approx(0.7 * std::exp(-t / p.t2q) * std::cos(constants::kTwoPi * p.f0 * t)));
  }

  // Spectrum of the undamped model has lines spaced by 2chi.
  RamseyDispersiveParams q;
  q.amplitudes = {1.0, 0.6, 0.3};
  q.t2q = 1e9;
  q.f0 = 4.0;
  q.two_chi = 1.67;
  const int n = 4096;
  const double dt = 0.01;
  std::vector<double> power(n / 2);
  for (int k = 0; k < n / 2; ++k) {
    std::complex<double> s = 0.0;
    for (int i = 0; i < n; ++i) {
      s += ramsey_dispersive_model(i * dt, q, 2) * std::exp(std::complex<double>(0, -constants::kTwoPi * k * i / n));
    }
    power[k] = std::norm(s);
  }
  std::vector<double> peaks;
  for (int k = 1; k + 1 < n / 2; ++k) {
    if (power[k] > power[k - 1] && power[k] > power[k + 1] && power[k] > 0.01 * n * n) peaks.push_back(k / (n * dt));
  }
  REQUIRE(peaks.size() == 3);
  const double df = 1 / (n * dt);
  CHECK(std::abs(peaks[1] - peaks[0] - 1.67) <= 1.5 * df);
  CHECK(std::abs(peaks[2] - peaks[1] - 1.67) <= 1.5 * df);

  // Fit closure.
  RamseyDispersiveParams truth;
  truth.amplitudes = {0.25, 0.12, 0.05};
  truth.t2q = 0.33;
  truth.f0 = 1.0;
  truth.two_chi = 1.67;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(0.01 * i);
    y.push_back(ramsey_dispersive_model(t.back(), truth, 2) + g(rng));
  }
  RamseyDispersiveParams init = truth;
  init.amplitudes = {0.2, 0.1, 0.1};
  init.t2q = 0.4;
  init.two_chi = 1.5;
  init.f0 = 0.9;
  const RamseyFit f = ramsey_dispersive_fit(t, y, init, 2);
  CHECK(std::abs(f.params.t2q - 0.33) < 2 * f.t2q_err);
  CHECK(std::abs(f.params.two_chi - 1.67) < 2 * f.two_chi_err);
  CHECK(f.params.t_d == truth.t_d);
}

TEST_CASE("pure dephasing") {
  CHECK(pure_dephasing(1.35, 3.57) == doctest::Approx(1 / (1 / 1.35 - 1 / 7.14)).epsilon(1e-12));
  CHECK_THROWS_AS(pure_dephasing(8.0, 3.0), DomainError);
}

TEST_CASE("stretched exponential") {
  std::vector<double> t, y;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.005);
  for (int i = 0; i < 60; ++i) {
    t.push_back(0.1 * i);
    y.push_back(0.8 * std::exp(-t.back() / 1.3) + g(rng));
  }
  const StretchedExpFit f = stretched_exp_fit(t, y, false);
  CHECK(f.n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(f.t == doctest::Approx(1.3).epsilon(0.05));
  const StretchedExpFit c = stretched_exp_fit(t, y, true);
  CHECK(c.n >= 1.0);
}

TEST_CASE("multi-exponential decay") {
  const double times[3] = {0.85, 4.11, 29.6};
  const double amp = 1.0 / 3;
  std::vector<double> t, y;
  for (int i = 0; i < 80; ++i) t.push_back(0.05 * std::pow(10.0, 3.6 * i / 79.0));
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g(0.0, 1.0 / 30);
  for (double x : t) {
    double v = 0;
    for (double tau : times) v += amp * std::exp(-x / tau);
    y.push_back(v + g(rng));
  }
  const MultiExpFit f = multi_exp_fit(t, y, 3);
  REQUIRE(f.times.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(f.times[k] - times[k]) < 2 * f.times_err[k]);
  CHECK(f.one_over_e_time > f.times[0]);
  CHECK(f.one_over_e_time < f.times[2]);

  std::vector<double> short_t(t.begin(), t.begin() + 10), short_y(y.begin(), y.begin() + 10);
  CHECK_THROWS_AS(multi_exp_fit(short_t, short_y, 3), PreconditionViolation);
}

TEST_CASE("cooperativities") {
  const Cooperativities c = cooperativities(1.67, 3.57, 0.85, 0.33, 3.93);
  CHECK(c.c_t1 == doctest::Approx(330).epsilon(0.05));
  CHECK(c.c_t2 == doctest::Approx(570).epsilon(0.05));
  const double chi = constants::kTwoPi * 1.67 / 2;
  CHECK(c.c_t1 == doctest::Approx(4 * chi * chi * 3.57 * 0.85).epsilon(1e-12));
  const Cooperativities d = cooperativities(3.34, 3.57, 0.85, 0.33, 3.93);
  CHECK(d.c_t1 == doctest::Approx(4 * c.c_t1));
  CHECK(d.c_t2 == doctest::Approx(4 * c.c_t2));
}

}
