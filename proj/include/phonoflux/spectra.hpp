#pragma once

// Number-splitting spectra: Voigt lineshapes, displaced-thermal phonon
// distributions, synthesis, two-stage fitting, drift alignment and the
// phonon-number calibration line.  Frequencies in MHz.

#include <optional>
#include <string>
#include <vector>

#include "phonoflux/fit.hpp"

namespace phonoflux {

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz) for Im z >= 0 (Weideman's
/// rational expansion with 32 terms).
Complex faddeeva(Complex z);

/// Unit-area convolution of a Gaussian (standard deviation sigma) and a
/// Lorentzian (half width gamma).
double voigt_profile(double x, double sigma, double gamma);

/// Half width at half maximum (Olivero-Longbothum approximation, 0.02%).
double voigt_hwhm(double sigma, double gamma);

/// P(n) of D(alpha) rho_th D(alpha)^dagger, evaluated without cancellation.
double displaced_thermal_pn(double n_bar, double alpha_sq, int n);

/// Upper bound on the probability beyond n_max (Chernoff-style bound on the
/// displaced thermal tail), used to certify normalization.
double displaced_thermal_tail_bound(double n_bar, double alpha_sq, int n_max);

struct SpectrumTrace {
  std::vector<double> freqs;      ///< MHz, strictly ascending, uniform
  std::vector<double> amplitude;
  std::optional<double> timestamp;

  void validate() const;
  double step() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

struct PeakWidths {
  double sigma = 0.2;  ///< Gaussian standard deviation, MHz
  double gamma = 0.2;  ///< Lorentzian half width, MHz
};

struct VoigtPeak {
  double center = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
  double area = 0.0;
  double area_err = 0.0;
};

struct VoigtPeakSet {
  std::vector<VoigtPeak> peaks;  ///< index n = phonon number
  double baseline = 0.0;
  double f_eg = 0.0;             ///< center of the n = 0 peak
  double f_eg_err = 0.0;
  double two_chi = 0.0;          ///< spacing, peaks at f_eg - n two_chi
  double two_chi_err = 0.0;
};

struct PhononDistribution {
  std::vector<double> p;
  std::vector<double> p_err;
  double n_bar_th = 0.0;
  double alpha_sq = 0.0;
  double n_bar_th_err = 0.0;
  double alpha_sq_err = 0.0;
  double mean_n = 0.0;      ///< n_bar_th + alpha_sq
  double mean_n_err = 0.0;
  double scale = 1.0;       ///< fitted total area
  bool alpha_fixed_zero = false;

  /// Displaced-thermal model populations for n = 0 .. count-1.
  static std::vector<double> model(double n_bar, double alpha_sq, int count);
};

/// Sum_n P(n) Voigt(f - (f_eg - n two_chi)); one width for every peak or one
/// per peak (size equal to p).
SpectrumTrace synth_number_splitting(double f_eg, double two_chi, const std::vector<double>& p,
                                     const std::vector<PeakWidths>& widths,
                                     const std::vector<double>& freqs);

struct NumberSplittingInit {
  double f_eg = 0.0;
  double two_chi = 2.0;
  PeakWidths widths;
  double n_bar = 0.5;
  double alpha_sq = 0.5;
};

struct NumberSplittingFit {
  VoigtPeakSet peaks;
  PhononDistribution distribution;
  FitOutcome stage1;
  FitOutcome stage2;
  Warnings warnings;
};

/// Stage 1: multi-Voigt least squares with a shared spacing, first with
/// shared widths and then with independent widths for every peak whose
/// area exceeds three standard errors; stage 2: the
/// peak areas fit to scale * P(n; n_bar, alpha_sq).  When alpha_sq is not
/// distinguishable from zero (below two standard errors) stage 2 is refit
/// with alpha_sq = 0 and the flag is set.  Throws
/// ValidationError with the stage name when a stage does not converge.
NumberSplittingFit fit_number_splitting(const SpectrumTrace& trace, int n_peaks,
                                        const NumberSplittingInit& init);

struct CalibrationPoint {
  double amp_sq = 0.0;
  double mean_n = 0.0;
  double sigma = 0.0;  ///< 0 means unweighted
};

struct CalibrationResult {
  double n_bar_th = 0.0;
  double slope = 0.0;
  double n_bar_th_err = 0.0;
  double slope_err = 0.0;
  FitOutcome fit;
};

/// <n> = n_bar_th + slope * amp_sq by weighted linear regression.
CalibrationResult calibration_fit(const std::vector<CalibrationPoint>& points);

struct DriftAlignOptions {
  int bin = 2;
  double window_lo = 0.0;  ///< reference-peak window (MHz), required
  double window_hi = 0.0;
  bool reject_anomalies = true;
  double mad_threshold = 5.0;
};

struct DriftAlignResult {
  SpectrumTrace trace;
  std::vector<int> rejected;      ///< input indices removed by the power screen
  std::vector<int> dropped_bins;  ///< bins without a usable reference peak
  std::vector<double> centers;    ///< fitted reference centers of kept bins
  std::vector<int> shifts;        ///< grid-step shifts applied to kept bins
  Warnings warnings;
};

/// Anomaly screen on total power, bin averaging, Gaussian fit of the
/// reference peak, integer-step alignment to the mean center, average.
DriftAlignResult drift_align(const std::vector<SpectrumTrace>& traces, const DriftAlignOptions& options);

/// T = (h f / k_B) / ln(1 + 1/n_bar), kelvin.
double effective_temperature(double n_bar, double freq_hz);
/// Inverse: Bose-Einstein occupation at temperature T.
double thermal_occupation(double temp_kelvin, double freq_hz);

}  // namespace phonoflux
