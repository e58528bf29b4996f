#include "phonoflux/pulses.hpp"

#include <cmath>

#include "phonoflux/core.hpp"

namespace phonoflux {

void ModulationPulse::validate() const {
  if (!(v0 >= 0)) throw DomainError("pulse amplitude v0 must be nonnegative");
  if (!(tau_r > 0)) throw DomainError("ramp duration must be positive");
  if (!(tau_mod >= 2.0 * tau_r)) throw DomainError("pulse requires tau_mod >= 2 tau_r");
  if (!(f_mod > 0)) throw DomainError("modulation frequency must be positive");
  if (!(gain_k > 0)) throw DomainError("flux gain must be positive");
}

double ramp_time_constant(double tau_r) { return tau_r / (2.0 * std::asin(std::pow(2.0, -0.25))); }

namespace {

double up_ramp(double t, double tau_r, double tau_d) {
  if (t <= 0.5 * tau_r) return std::pow(std::sin(t / tau_d), 4);
  return 1.0 - std::pow(std::sin((tau_r - t) / tau_d), 4);
}

}  // namespace

double sin4_ramp_envelope(const ModulationPulse& pulse, double t) {
  if (t < 0 || t > pulse.tau_mod) return 0.0;
  const double tau_d = ramp_time_constant(pulse.tau_r);
  if (t < pulse.tau_r) return up_ramp(t, pulse.tau_r, tau_d);
  if (t > pulse.tau_mod - pulse.tau_r) return up_ramp(pulse.tau_mod - t, pulse.tau_r, tau_d);
  return 1.0;
}

double flux_drive_waveform(const ModulationPulse& pulse, double t) {
  if (pulse.v0 == 0.0) return 0.0;
  // f in MHz, t in ns
  return pulse.gain_k * pulse.v0 * sin4_ramp_envelope(pulse, t) *
         std::cos(constants::kTwoPi * pulse.f_mod * 1e-3 * t + pulse.theta);
}

EnvelopeSamples sample_envelope(const ModulationPulse& pulse, double step_ns) {
  if (!(step_ns > 0)) throw DomainError("sampling step must be positive");
  EnvelopeSamples out;
  const auto n = static_cast<long>(std::floor(pulse.tau_mod / step_ns + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * step_ns;
    out.times.push_back(t);
    out.values.push_back(sin4_ramp_envelope(pulse, t));
  }
  if (out.times.back() < pulse.tau_mod) {
    out.times.push_back(pulse.tau_mod);
    out.values.push_back(0.0);
  }
  return out;
}

namespace {

double bessel_series(int n, double x) {
  const double h = 0.5 * x;
  double term = std::pow(h, n);
  for (int i = 2; i <= n; ++i) term /= i;
  double sum = term;
  const double h2 = h * h;
  for (int k = 1; k < 200; ++k) {
    term *= -h2 / (static_cast<double>(k) * (k + n));
    sum += term;
    if (std::abs(term) < 1e-18 * std::max(1.0, std::abs(sum))) break;
  }
  return sum;
}

// Hankel asymptotic expansion, summed until the terms stop shrinking.
double bessel_asymptotic(int n, double x) {
  const double mu = 4.0 * n * n;
  double p = 0.0;
  double q = 0.0;
  double a = 1.0;  // a_k / x^k
  double last = 2.0;
  for (int k = 0; k < 60; ++k) {
    if (k > 0) {
      const double odd = 2.0 * k - 1.0;
      a *= (mu - odd * odd) / (k * 8.0 * x);
    }
    const double mag = std::abs(a);
    if (k > 1 && mag > last) break;
    last = mag;
    const int r = k % 4;
    const double sign = (r == 0 || r == 1) ? 1.0 : -1.0;
    if (k % 2 == 0) p += sign * a;
    else q += sign * a;
    if (mag < 1e-17) break;
  }
  const double chi = x - (0.5 * n + 0.25) * constants::kPi;
  return std::sqrt(2.0 / (constants::kPi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

double bessel_jn(int n, double x) {
  const double ax = std::abs(x);
  const double v = ax < 12.0 ? bessel_series(n, ax) : bessel_asymptotic(n, ax);
  return (x < 0 && n % 2 == 1) ? -v : v;
}

}  // namespace

double bessel_j0(double x) { return bessel_jn(0, x); }
double bessel_j1(double x) { return bessel_jn(1, x); }
double bessel_j2(double x) { return bessel_jn(2, x); }

double sideband_coupling_rate(double g_eg, double eps_mod, double f_mod) {
  if (!(f_mod > 0)) throw DomainError("modulation frequency must be positive");
  return g_eg * bessel_j1(eps_mod / f_mod);
}

double modulation_depth_mhz(const ModulationPulse& pulse, double slope_ghz_per_phi0) {
  return pulse.gain_k * pulse.v0 * std::abs(slope_ghz_per_phi0) * 1e3;
}

}  // namespace phonoflux
