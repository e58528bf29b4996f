#pragma once

// Flux-modulation pulses: sin^4 ramped envelope, the flux waveform, and the
// Bessel-function sideband coupling rate.  Times in ns, frequencies in MHz.

#include <vector>

namespace phonoflux {

struct ModulationPulse {
  double v0 = 0.0;        ///< mVpp
  double f_mod = 155.6;   ///< MHz
  double theta = 0.0;     ///< rad
  double tau_mod = 100.0; ///< ns
  double tau_r = 10.0;    ///< ns
  double gain_k = 1.7e-5; ///< Phi0 per mVpp

  void validate() const;
};

/// tau_d = tau_r / (2 asin(2^(-1/4))), so the ramp passes 1/2 at tau_r / 2.
double ramp_time_constant(double tau_r);

/// sin^4 up-ramp, flat top, mirrored down-ramp.  Zero outside [0, tau_mod].
double sin4_ramp_envelope(const ModulationPulse& pulse, double t_ns);

/// gain_k * v0 * envelope(t) * cos(2 pi f_mod t + theta), in Phi0.
double flux_drive_waveform(const ModulationPulse& pulse, double t_ns);

struct EnvelopeSamples {
  std::vector<double> times;   ///< ns
  std::vector<double> values;
};

EnvelopeSamples sample_envelope(const ModulationPulse& pulse, double step_ns);

double bessel_j0(double x);
double bessel_j1(double x);
double bessel_j2(double x);

/// g_eg J1(eps_mod / f_mod); the 2 pi of both angular quantities cancels.
double sideband_coupling_rate(double g_eg, double eps_mod, double f_mod);

/// eps_mod = gain_k v0 |d omega_eg / d Phi| with the slope in GHz/Phi0;
/// result in MHz.  The drive amplitude is the peak of the cosine.
double modulation_depth_mhz(const ModulationPulse& pulse, double slope_ghz_per_phi0);

}  // namespace phonoflux
