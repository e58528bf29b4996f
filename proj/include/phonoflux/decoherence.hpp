#pragma once

// Coherence-time models and fits.  Frequencies and chi values are cycles
// (MHz or GHz/Phi0); every formula applies 2 pi itself.  Times in us unless
// a name says otherwise.

#include <vector>

#include "phonoflux/fit.hpp"

namespace phonoflux {

struct OneOverFNoise {
  double a_phi = 1.0;        ///< uPhi0 / sqrt(Hz) at 1 Hz
  double gamma_exp = 1.0;    ///< only 1 is supported
  double omega_c = constants::kTwoPi / 600.0;  ///< rad/s
  double t_ref = 5e-6;       ///< s

  void validate() const;
};

struct CoherenceTimes {
  double t1q = 0.0, t1q_err = 0.0;
  double t2q = 0.0, t2q_err = 0.0;
  double t2eq = 0.0, t2eq_err = 0.0;
  std::vector<double> t1m, t1m_err;
  double t2m = 0.0, t2m_err = 0.0;
  double stretch_n = 1.0, stretch_n_err = 0.0;
};

/// Order-of-magnitude dephasing rate from thermal phonon number
/// fluctuations, (kappa/2) Re[sqrt((1 + 2i chi/kappa)^2 + 8i chi n/kappa) - 1]
/// with chi = 2 pi chi_mhz.  Valid for a single-rate mode decay and the
/// dispersive regime only.
double thermal_dephasing_rate(double kappa_per_us, double chi_mhz, double n_bar);

/// g0 = sinc^2(w t / 2) (Ramsey), g1 = sin^2(w t / 4) sinc^2(w t / 4) (echo).
double filter_function(int n_pulses, double omega, double t_s);

/// Gaussian-decay time T from chi(t) = t^2 / T^2 at leading order in 1/f
/// flux noise.  Ramsey (n_pulses = 0) uses 3/2 - gamma_E + ln(1/(omega_c t_ref)),
/// echo (n_pulses = 1) uses ln 2.  slope in GHz / Phi0.  Returns us.
double dephasing_time_1f(const OneOverFNoise& noise, double slope_ghz_per_phi0, int n_pulses);

struct RamseyDispersiveParams {
  std::vector<double> amplitudes;  ///< A_n, n = 0 .. n_max
  double t2q = 0.33;      ///< us
  double f0 = 1.0;        ///< detuning, MHz
  double two_chi = 1.67;  ///< MHz
  double t_d = 1.13 * 0.05;  ///< us
};

/// Sum_n A_n exp(-t/T2q) cos(2 pi (f0 + n two_chi) t + 2 pi two_chi n t_d).
double ramsey_dispersive_model(double t_us, const RamseyDispersiveParams& p, int n_max);

struct RamseyFit {
  RamseyDispersiveParams params;
  std::vector<double> amplitude_err;
  double t2q_err = 0.0, f0_err = 0.0, two_chi_err = 0.0;
  FitOutcome fit;
};

/// Fits A_n, T2q, f0, two_chi with t_d held at the initial value.
RamseyFit ramsey_dispersive_fit(const std::vector<double>& t_us, const std::vector<double>& y,
                                const RamseyDispersiveParams& initial, int n_max);

struct StretchedExpFit {
  double amplitude = 0.0, amplitude_err = 0.0;
  double t = 0.0, t_err = 0.0;
  double n = 1.0, n_err = 0.0;
  double offset = 0.0, offset_err = 0.0;
  FitOutcome fit;
};

/// A exp(-(t/T)^n) (+ offset).  constrained = true keeps n in [1, 2.5],
/// otherwise n in [0.5, 2.5].
StretchedExpFit stretched_exp_fit(const std::vector<double>& t_us, const std::vector<double>& y,
                                  bool constrained = true, bool fit_offset = false);

struct MultiExpFit {
  std::vector<double> times, times_err;  ///< ascending
  std::vector<double> amplitudes, amplitudes_err;
  double one_over_e_time = 0.0;
  FitOutcome fit;
  Warnings warnings;
};

/// Sum of k decaying exponentials.  Delays must span two decades.
MultiExpFit multi_exp_fit(const std::vector<double>& t_us, const std::vector<double>& y, int k = 3);

/// 1 / (1/T2 - 1/(2 T1)).
double pure_dephasing(double t2_us, double t1_us);

struct Cooperativities {
  double c_t1 = 0.0;
  double c_t2 = 0.0;
};

/// C_T1 = (2 chi)^2 T1q T1m, C_T2 = (4 chi)^2 T2q T2m, chi angular.
Cooperativities cooperativities(double two_chi_mhz, double t1q, double t1m1, double t2q, double t2m);

}  // namespace phonoflux
