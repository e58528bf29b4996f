#include "phonoflux/spectra.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace phonoflux {

namespace {

constexpr int kWeidemanN = 32;

struct WeidemanCoefficients {
  double L = 0.0;
  std::array<double, kWeidemanN + 1> a{};  // a[1..N]
};

WeidemanCoefficients make_weideman() {
  WeidemanCoefficients c;
  const int m = 2 * kWeidemanN;
  const int m2 = 2 * m;
  c.L = std::sqrt(kWeidemanN / std::sqrt(2.0));
  // Samples of exp(-t^2)(L^2 + t^2), t = L tan(k pi / (2M)), in FFT order.
  std::vector<double> g(m2, 0.0);
  for (int i = 0; i < m2; ++i) {
    const int k = i < m ? i : i - m2;
    if (k == -m) continue;
    const double t = c.L * std::tan(k * constants::kPi / (2.0 * m));
    g[i] = std::exp(-t * t) * (c.L * c.L + t * t);
  }
  for (int j = 1; j <= kWeidemanN; ++j) {
    double s = 0.0;
    for (int i = 0; i < m2; ++i) s += g[i] * std::cos(constants::kTwoPi * i * j / m2);
    c.a[j] = s / m2;
  }
  return c;
}

const WeidemanCoefficients& weideman() {
  static const WeidemanCoefficients c = make_weideman();
  return c;
}

// w'(z) = -2 z w(z) + 2i/sqrt(pi)
Complex faddeeva_derivative(Complex z, Complex w) {
  return -2.0 * z * w + Complex(0.0, 2.0 / std::sqrt(constants::kPi));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

void check_widths(double sigma, double gamma) {
  if (!(sigma >= 0.0) || !(gamma >= 0.0)) throw DomainError("voigt: widths must be >= 0");
  if (sigma == 0.0 && gamma == 0.0) throw DomainError("voigt: degenerate profile (both widths zero)");
}

// Value and partial derivatives (x offset, sigma, gamma) of the unit-area
// Voigt profile.  Requires sigma > 0.
struct VoigtEval {
  double v, dx, dsigma, dgamma;
};

VoigtEval voigt_with_derivatives(double x, double sigma, double gamma) {
  const double s2 = sigma * std::sqrt(2.0);
  const double norm = 1.0 / (sigma * std::sqrt(constants::kTwoPi));
  const Complex z(x / s2, gamma / s2);
  const Complex w = faddeeva(z);
  const Complex dw = faddeeva_derivative(z, w);
  VoigtEval e;
  e.v = w.real() * norm;
  e.dx = (dw / s2).real() * norm;
  e.dgamma = (dw * Complex(0.0, 1.0) / s2).real() * norm;
  e.dsigma = (dw * (-z / sigma)).real() * norm - e.v / sigma;
  return e;
}

}  // namespace

Complex faddeeva(Complex z) {
  if (z.imag() < 0.0) throw DomainError("faddeeva: implemented for Im z >= 0 only");
  const auto& c = weideman();
  const Complex iz(-z.imag(), z.real());
  const Complex lmiz = c.L - iz;
  const Complex big_z = (c.L + iz) / lmiz;
  Complex p = 0.0;
  for (int j = kWeidemanN; j >= 1; --j) p = p * big_z + c.a[j];
  return 2.0 * p / (lmiz * lmiz) + (1.0 / std::sqrt(constants::kPi)) / lmiz;
}

double voigt_profile(double x, double sigma, double gamma) {
  check_widths(sigma, gamma);
  if (sigma == 0.0) return gamma / (constants::kPi * (x * x + gamma * gamma));
  if (gamma == 0.0) {
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(constants::kTwoPi));
  }
  const double s2 = sigma * std::sqrt(2.0);
  return faddeeva(Complex(x / s2, gamma / s2)).real() / (sigma * std::sqrt(constants::kTwoPi));
}

double voigt_hwhm(double sigma, double gamma) {
  check_widths(sigma, gamma);
  const double fl = 2.0 * gamma;
  const double fg = 2.0 * sigma * std::sqrt(2.0 * std::log(2.0));
  return 0.5 * (0.5346 * fl + std::sqrt(0.2166 * fl * fl + fg * fg));
}

double displaced_thermal_pn(double n_bar, double alpha_sq, int n) {
  if (!(n_bar >= 0.0) || !(alpha_sq >= 0.0)) throw DomainError("displaced_thermal_pn: n_bar, alpha_sq must be >= 0");
  if (n < 0) return 0.0;
  const double tau = n_bar / (1.0 + n_bar);
  const double one_m_tau = 1.0 / (1.0 + n_bar);
  // tau^n L_n(-x), x = alpha^2 (1-tau)^2 / tau, expanded as a positive sum
  //   sum_k C(n,k) tau^(n-k) (alpha^2 (1-tau)^2)^k / k!
  // which stays finite at tau = 0 (coherent limit).
  const double y = alpha_sq * one_m_tau * one_m_tau;
  const double log_pref = std::log(one_m_tau) - alpha_sq * one_m_tau;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    if (k < n && tau == 0.0) continue;
    if (k > 0 && y == 0.0) break;
    double lt = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - std::lgamma(k + 1.0);
    if (n - k > 0) lt += (n - k) * std::log(tau);
    if (k > 0) lt += k * std::log(y);
    sum += std::exp(lt + log_pref);
  }
  return std::clamp(sum, 0.0, 1.0);
}

double displaced_thermal_tail_bound(double n_bar, double alpha_sq, int n_max) {
  if (!(n_bar >= 0.0) || !(alpha_sq >= 0.0)) throw DomainError("displaced_thermal_tail_bound: negative input");
  // P(N > n_max) <= G(z) / z^(n_max+1) for z > 1 with the generating function
  // G(z) = exp(alpha^2 (z-1) / (1 - n_bar (z-1))) / (1 - n_bar (z-1)).
  const double z_hi = n_bar > 0.0 ? 1.0 + 1.0 / n_bar : 1e6;
  double best = 1.0;
  const int samples = 4000;
  for (int i = 1; i < samples; ++i) {
    const double z = 1.0 + (z_hi - 1.0) * i / samples;
    const double d = 1.0 - n_bar * (z - 1.0);
    if (d <= 0.0) break;
    const double log_b = alpha_sq * (z - 1.0) / d - std::log(d) - (n_max + 1.0) * std::log(z);
    best = std::min(best, std::exp(log_b));
  }
  return best;
}

std::vector<double> PhononDistribution::model(double n_bar, double alpha_sq, int count) {
  std::vector<double> p(static_cast<std::size_t>(std::max(count, 0)));
  for (int n = 0; n < count; ++n) p[n] = displaced_thermal_pn(n_bar, alpha_sq, n);
  return p;
}

void SpectrumTrace::validate() const {
  if (freqs.size() < 2) throw ValidationError("SpectrumTrace: need >= 2 grid points");
  if (amplitude.size() != freqs.size()) throw ValidationError("SpectrumTrace: amplitude and grid sizes differ");
  const double h = freqs[1] - freqs[0];
  if (!(h > 0.0)) throw ValidationError("SpectrumTrace: grid must be strictly ascending");
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    const double d = freqs[i] - freqs[i - 1];
    if (!(d > 0.0)) throw ValidationError("SpectrumTrace: grid must be strictly ascending");
    if (std::abs(d - h) > 1e-6 * std::abs(h) + 1e-9 * std::abs(freqs[i])) {
      throw ValidationError("SpectrumTrace: grid step not uniform");
    }
  }
}

SpectrumTrace synth_number_splitting(double f_eg, double two_chi, const std::vector<double>& p,
                                     const std::vector<PeakWidths>& widths,
                                     const std::vector<double>& freqs) {
  if (widths.size() != 1 && widths.size() != p.size()) {
    throw ValidationError("synth_number_splitting: need one width or one per peak");
  }
  SpectrumTrace out;
  out.freqs = freqs;
  out.amplitude.assign(freqs.size(), 0.0);
  out.validate();
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] == 0.0) continue;
    const double c = f_eg - static_cast<double>(n) * two_chi;
    if (c < freqs.front() || c > freqs.back()) {
      throw PreconditionViolation("synth_number_splitting: grid does not span peak n = " + std::to_string(n));
    }
    const PeakWidths& w = widths.size() == 1 ? widths[0] : widths[n];
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      out.amplitude[i] += p[n] * voigt_profile(freqs[i] - c, w.sigma, w.gamma);
    }
  }
  return out;
}

namespace {

// Stage 1 parameter layout: f_eg, two_chi, baseline, then (area, sigma,
// gamma) per peak.
constexpr int kStage1Shared = 3;

// width_src[n] names the peak whose (sigma, gamma) slots peak n uses; a tied
// fit points every peak at peak 0 and pins the unused slots.
RealVector multi_voigt(const RealVector& p, const RealVector& x, const std::vector<int>& width_src) {
  RealVector y = RealVector::Constant(x.size(), p(2));
  for (std::size_t n = 0; n < width_src.size(); ++n) {
    const double c = p(0) - static_cast<double>(n) * p(1);
    const double area = p(kStage1Shared + 3 * static_cast<int>(n));
    const int w = kStage1Shared + 3 * width_src[n];
    for (Eigen::Index i = 0; i < x.size(); ++i) y(i) += area * voigt_with_derivatives(x(i) - c, p(w + 1), p(w + 2)).v;
  }
  return y;
}

RealMatrix multi_voigt_jacobian(const RealVector& p, const RealVector& x, const std::vector<int>& width_src) {
  RealMatrix j = RealMatrix::Zero(x.size(), p.size());
  j.col(2).setOnes();
  for (std::size_t n = 0; n < width_src.size(); ++n) {
    const double c = p(0) - static_cast<double>(n) * p(1);
    const int o = kStage1Shared + 3 * static_cast<int>(n);
    const int w = kStage1Shared + 3 * width_src[n];
    const double area = p(o);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const VoigtEval e = voigt_with_derivatives(x(i) - c, p(w + 1), p(w + 2));
      // d/dc of V(x - c) = -dx
      j(i, 0) += -area * e.dx;
      j(i, 1) += area * e.dx * static_cast<double>(n);
      j(i, o) = e.v;
      j(i, w + 1) += area * e.dsigma;
      j(i, w + 2) += area * e.dgamma;
    }
  }
  return j;
}

struct Stage2Result {
  FitOutcome fit;
  bool ok = false;
};

// Areas fit to scale * P(n; n_bar, alpha_sq) with the full stage-1 area
// covariance (whitened by its Cholesky factor).
Stage2Result fit_areas(const RealVector& areas, const RealMatrix& cov, double n_bar0, double alpha0,
                       bool alpha_zero) {
  const int n = static_cast<int>(areas.size());
  RealMatrix c = cov;
  const double floor = 1e-12 * std::max(c.diagonal().maxCoeff(), 1e-300);
  for (int i = 0; i < n; ++i) c(i, i) = std::max(c(i, i), floor);
  Eigen::LLT<RealMatrix> llt(c);
  if (llt.info() != Eigen::Success) {
    c = c.diagonal().asDiagonal();
    llt.compute(c);
  }
  const RealMatrix l_inv = llt.matrixL().solve(RealMatrix::Identity(n, n));
  FitProblem prob;
  prob.x = RealVector::LinSpaced(n, 0.0, n - 1.0);
  prob.y = l_inv * areas;
  prob.model = [n, l_inv](const RealVector& q, const RealVector&) {
    RealVector m(n);
    for (int k = 0; k < n; ++k) m(k) = q(0) * displaced_thermal_pn(q(1), q(2), k);
    return RealVector(l_inv * m);
  };
  prob.lower = RealVector::Zero(3);
  prob.upper = RealVector::Constant(3, 1e6);
  prob.upper(1) = 100.0;
  prob.upper(2) = 400.0;
  if (alpha_zero) prob.upper(2) = 0.0;
  prob.absolute_sigma = true;
  prob.max_iterations = 500;

  const double total = std::max(areas.sum(), 1e-12);
  double mean = 0.0;
  for (int k = 0; k < n; ++k) mean += k * std::max(areas(k), 0.0);
  mean = std::max(mean / total, 1e-3);
  std::vector<std::pair<double, double>> starts{{n_bar0, alpha0}, {mean, 0.0}, {0.1 * mean, 0.9 * mean},
                                                {0.5 * mean, 0.5 * mean}};
  Stage2Result best;
  for (auto [nb, al] : starts) {
    prob.initial = RealVector(3);
    prob.initial << total, std::clamp(nb, 0.0, 100.0), alpha_zero ? 0.0 : std::clamp(al, 0.0, 400.0);
    FitOutcome f = least_squares(prob);
    if (!best.ok || f.cost < best.fit.cost) {
      best.fit = f;
      best.ok = true;
    }
  }
  return best;
}

}  // namespace

NumberSplittingFit fit_number_splitting(const SpectrumTrace& trace, int n_peaks,
                                        const NumberSplittingInit& init) {
  if (n_peaks < 2) throw PreconditionViolation("fit_number_splitting: n_peaks must be >= 2");
  trace.validate();
  if (!(init.two_chi != 0.0)) throw ValidationError("fit_number_splitting: initial two_chi must be nonzero");
  check_widths(init.widths.sigma, init.widths.gamma);
  const int m = static_cast<int>(trace.freqs.size());
  const int n_par = kStage1Shared + 3 * n_peaks;
  if (m <= n_par) throw ValidationError("fit_number_splitting: fewer grid points than parameters");

  const double h = trace.step();
  const double span = trace.freqs.back() - trace.freqs.front();
  const double w_lo = 1e-3 * h;
  const double sigma0 = std::max(init.widths.sigma, 2.0 * w_lo);
  const double gamma0 = std::max(init.widths.gamma, 2.0 * w_lo);
  const double peak0 = voigt_profile(0.0, sigma0, gamma0);

  FitProblem prob;
  prob.x = Eigen::Map<const RealVector>(trace.freqs.data(), m);
  prob.y = Eigen::Map<const RealVector>(trace.amplitude.data(), m);
  prob.initial = RealVector(n_par);
  prob.lower = RealVector(n_par);
  prob.upper = RealVector(n_par);
  const double amp_scale = std::max(prob.y.cwiseAbs().maxCoeff(), 1e-300);
  prob.initial(0) = init.f_eg;
  prob.initial(1) = init.two_chi;
  prob.initial(2) = 0.0;
  prob.lower(0) = trace.freqs.front();
  prob.upper(0) = trace.freqs.back();
  prob.lower(1) = init.two_chi > 0 ? 1e-3 * std::abs(init.two_chi) : -span;
  prob.upper(1) = init.two_chi > 0 ? span : -1e-3 * std::abs(init.two_chi);
  prob.lower(2) = -amp_scale;
  prob.upper(2) = amp_scale;
  for (int n = 0; n < n_peaks; ++n) {
    const double c = init.f_eg - n * init.two_chi;
    const auto it = std::lower_bound(trace.freqs.begin(), trace.freqs.end(), c);
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - trace.freqs.begin()), m - 1);
    const int o = kStage1Shared + 3 * n;
    prob.initial(o) = std::max(trace.amplitude[idx], 0.0) / peak0;
    prob.initial(o + 1) = sigma0;
    prob.initial(o + 2) = gamma0;
    prob.lower(o) = 0.0;
    prob.upper(o) = 1e3 * amp_scale * span;
  }
  prob.max_iterations = 500;

  // Pass 1 shares one (sigma, gamma) across all peaks.  Pass 2 frees the
  // widths of every peak whose area is at least 3 standard errors; weaker
  // peaks keep the shared widths, which they cannot constrain.
  auto set_widths = [&](const std::vector<int>& src, const RealVector& from) {
    for (int n = 0; n < n_peaks; ++n) {
      const int o = kStage1Shared + 3 * n;
      const int w = kStage1Shared + 3 * src[static_cast<std::size_t>(n)];
      for (int k = 1; k <= 2; ++k) {
        prob.initial(o + k) = from(w + k);
        if (src[static_cast<std::size_t>(n)] == n) {
          prob.lower(o + k) = w_lo;
          prob.upper(o + k) = span;
        } else {
          prob.lower(o + k) = prob.upper(o + k) = from(w + k);
        }
      }
    }
    prob.model = [src](const RealVector& p, const RealVector& x) { return multi_voigt(p, x, src); };
    prob.jacobian = [src](const RealVector& p, const RealVector& x) { return multi_voigt_jacobian(p, x, src); };
  };

  NumberSplittingFit out;
  std::vector<int> src(static_cast<std::size_t>(n_peaks), 0);
  set_widths(src, prob.initial);
  const FitOutcome tied = least_squares(prob);
  if (!tied.converged) {
    throw ValidationError("fit_number_splitting: stage 1 (multi-Voigt, shared widths) did not converge: " +
                          tied.message);
  }
  bool any_free = false;
  for (int n = 1; n < n_peaks; ++n) {
    const int o = kStage1Shared + 3 * n;
    if (tied.params(o) >= 3.0 * tied.std_errors(o)) {
      src[static_cast<std::size_t>(n)] = n;
      any_free = true;
    }
  }
  out.stage1 = tied;
  if (any_free) {
    prob.initial = tied.params;
    set_widths(src, tied.params);
    const FitOutcome indep = least_squares(prob);
    if (!indep.converged) {
      throw ValidationError("fit_number_splitting: stage 1 (multi-Voigt, independent widths) did not converge: " +
                            indep.message);
    }
    out.stage1 = indep;
  }
  for (int n = 0; n < n_peaks; ++n) {
    // Report the widths each peak actually used.
    const int o = kStage1Shared + 3 * n;
    const int w = kStage1Shared + 3 * src[static_cast<std::size_t>(n)];
    out.stage1.params(o + 1) = out.stage1.params(w + 1);
    out.stage1.params(o + 2) = out.stage1.params(w + 2);
  }
  const RealVector& p = out.stage1.params;
  const RealVector& se = out.stage1.std_errors;
  out.peaks.f_eg = p(0);
  out.peaks.two_chi = p(1);
  out.peaks.baseline = p(2);
  out.peaks.f_eg_err = se(0);
  out.peaks.two_chi_err = se(1);
  RealVector areas(n_peaks);
  RealMatrix area_cov(n_peaks, n_peaks);
  for (int n = 0; n < n_peaks; ++n) {
    const int o = kStage1Shared + 3 * n;
    VoigtPeak pk;
    pk.center = p(0) - n * p(1);
    pk.area = p(o);
    pk.sigma = p(o + 1);
    pk.gamma = p(o + 2);
    pk.area_err = se(o);
    out.peaks.peaks.push_back(pk);
    areas(n) = p(o);
    for (int k = 0; k < n_peaks; ++k) area_cov(n, k) = out.stage1.covariance(o, kStage1Shared + 3 * k);
  }

  Stage2Result s2 = fit_areas(areas, area_cov, init.n_bar, init.alpha_sq, false);
  const double a = s2.fit.params(2);
  const double a_err = s2.fit.std_errors(2);
  // At alpha = 0 the alpha^2 and n_th derivatives of p_n coincide, so a
  // singular free fit there goes to the alpha = 0 refit below.
  if (!s2.fit.converged && std::isfinite(a_err)) {
    throw ValidationError("fit_number_splitting: stage 2 (distribution) did not converge: " + s2.fit.message);
  }
  bool alpha_zero = false;
  if (!(a >= 2.0 * a_err) || !std::isfinite(a_err)) {
    Stage2Result z = fit_areas(areas, area_cov, s2.fit.params(1), 0.0, true);
    if (!z.fit.converged) {
      throw ValidationError("fit_number_splitting: stage 2 refit with alpha = 0 did not converge: " + z.fit.message);
    }
    s2 = z;
    alpha_zero = true;
    out.warnings.push_back("fit_number_splitting: alpha not distinguishable from 0; refit with alpha_sq fixed at 0");
  }
  out.stage2 = s2.fit;
  PhononDistribution& d = out.distribution;
  d.scale = s2.fit.params(0);
  d.n_bar_th = s2.fit.params(1);
  d.alpha_sq = s2.fit.params(2);
  d.n_bar_th_err = s2.fit.std_errors(1);
  d.alpha_sq_err = alpha_zero ? 0.0 : s2.fit.std_errors(2);
  d.alpha_fixed_zero = alpha_zero;
  d.mean_n = d.n_bar_th + d.alpha_sq;
  const RealMatrix& c = s2.fit.covariance;
  d.mean_n_err = alpha_zero ? d.n_bar_th_err : std::sqrt(std::max(c(1, 1) + c(2, 2) + 2.0 * c(1, 2), 0.0));
  const double scale = d.scale > 0 ? d.scale : 1.0;
  for (int n = 0; n < n_peaks; ++n) {
    d.p.push_back(std::max(areas(n), 0.0) / scale);
    d.p_err.push_back(out.peaks.peaks[n].area_err / scale);
  }
  return out;
}

CalibrationResult calibration_fit(const std::vector<CalibrationPoint>& points) {
  if (points.size() < 3) throw PreconditionViolation("calibration_fit: need >= 3 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  RealVector x(n), y(n), s(n);
  bool weighted = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = points[i].amp_sq;
    y(i) = points[i].mean_n;
    s(i) = points[i].sigma;
    if (!(s(i) > 0)) weighted = false;
  }
  CalibrationResult r;
  try {
    r.fit = weighted ? weighted_linear_fit(x, y, s) : weighted_linear_fit(x, y);
  } catch (const ValidationError& e) {
    throw DomainError(std::string("calibration_fit: ") + e.what());
  }
  r.n_bar_th = r.fit.params(0);
  r.slope = r.fit.params(1);
  r.n_bar_th_err = r.fit.std_errors(0);
  r.slope_err = r.fit.std_errors(1);
  return r;
}

namespace {

struct GaussianPeakFit {
  bool ok = false;
  double center = 0.0;
  double amplitude = 0.0;
  double noise = 0.0;
};

GaussianPeakFit fit_reference_peak(const std::vector<double>& f, const std::vector<double>& y, double lo,
                                   double hi) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] >= lo && f[i] <= hi) {
      xs.push_back(f[i]);
      ys.push_back(y[i]);
    }
  }
  GaussianPeakFit g;
  if (xs.size() < 5) return g;
  const auto imax = static_cast<std::size_t>(std::max_element(ys.begin(), ys.end()) - ys.begin());
  const double ymin = *std::min_element(ys.begin(), ys.end());
  FitProblem prob;
  prob.x = Eigen::Map<RealVector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  prob.y = Eigen::Map<RealVector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  prob.model = [](const RealVector& p, const RealVector& x) {
    RealVector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = (x(i) - p(1)) / p(2);
      out(i) = p(0) * std::exp(-0.5 * u * u) + p(3);
    }
    return out;
  };
  const double width = hi - lo;
  const double h = xs[1] - xs[0];
  prob.initial = RealVector(4);
  prob.initial << ys[imax] - ymin, xs[imax], width / 6.0, ymin;
  prob.lower = RealVector(4);
  prob.upper = RealVector(4);
  const double big = 1e3 * (std::abs(ys[imax]) + std::abs(ymin) + 1e-300);
  prob.lower << -big, lo, 0.25 * h, -big;
  prob.upper << big, hi, width, big;
  const FitOutcome fit = least_squares(prob);
  g.center = fit.params(1);
  g.amplitude = fit.params(0);
  g.noise = fit.residual_rms;
  g.ok = fit.converged && g.amplitude > 3.0 * g.noise;
  return g;
}

}  // namespace

DriftAlignResult drift_align(const std::vector<SpectrumTrace>& traces, const DriftAlignOptions& options) {
  if (traces.size() < 2) throw PreconditionViolation("drift_align: need >= 2 traces");
  if (options.bin < 1) throw ValidationError("drift_align: bin must be >= 1");
  if (!(options.window_hi > options.window_lo)) throw ValidationError("drift_align: reference window required");
  for (const auto& t : traces) {
    t.validate();
    if (t.freqs != traces[0].freqs) throw ValidationError("drift_align: traces must share one grid");
  }
  const std::vector<double>& grid = traces[0].freqs;
  const std::size_t m = grid.size();
  DriftAlignResult out;

  std::vector<int> kept;
  if (options.reject_anomalies && traces.size() >= 3) {
    std::vector<double> power(traces.size(), 0.0);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      for (double a : traces[i].amplitude) power[i] += a * a;
    }
    const double med = median_of(power);
    std::vector<double> dev(power.size());
    for (std::size_t i = 0; i < power.size(); ++i) dev[i] = std::abs(power[i] - med);
    const double mad = median_of(dev);
    for (std::size_t i = 0; i < power.size(); ++i) {
      if (dev[i] > options.mad_threshold * mad) {
        out.rejected.push_back(static_cast<int>(i));
      } else {
        kept.push_back(static_cast<int>(i));
      }
    }
    if (!out.rejected.empty()) {
      out.warnings.push_back("drift_align: rejected " + std::to_string(out.rejected.size()) +
                             " anomalous trace(s) by total power");
    }
  } else {
    kept.resize(traces.size());
    std::iota(kept.begin(), kept.end(), 0);
  }

  // Bin-average consecutive kept traces; a short trailing bin is kept.
  std::vector<std::vector<double>> bins;
  for (std::size_t b = 0; b < kept.size(); b += static_cast<std::size_t>(options.bin)) {
    const std::size_t e = std::min(kept.size(), b + static_cast<std::size_t>(options.bin));
    std::vector<double> avg(m, 0.0);
    for (std::size_t k = b; k < e; ++k) {
      for (std::size_t i = 0; i < m; ++i) avg[i] += traces[kept[k]].amplitude[i];
    }
    for (double& v : avg) v /= static_cast<double>(e - b);
    bins.push_back(std::move(avg));
  }

  std::vector<std::size_t> good;
  std::vector<double> centers;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    GaussianPeakFit g = fit_reference_peak(grid, bins[b], options.window_lo, options.window_hi);
    if (!g.ok) {
      out.dropped_bins.push_back(static_cast<int>(b));
      out.warnings.push_back("drift_align: reference peak not found in bin " + std::to_string(b) + "; bin dropped");
      continue;
    }
    good.push_back(b);
    centers.push_back(g.center);
  }
  if (good.empty()) throw ValidationError("drift_align: reference peak not found in any bin");

  // Target is the mean center, summed in sorted order so the result does not
  // depend on trace order.
  std::vector<double> sorted = centers;
  std::sort(sorted.begin(), sorted.end());
  const double target = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  const double h = grid[1] - grid[0];

  std::vector<double> sum(m, 0.0);
  std::vector<int> count(m, 0);
  for (std::size_t k = 0; k < good.size(); ++k) {
    const int s = static_cast<int>(std::lround((target - centers[k]) / h));
    out.shifts.push_back(s);
    const auto& y = bins[good[k]];
    for (std::size_t i = 0; i < m; ++i) {
      const long src = static_cast<long>(i) - s;
      if (src < 0 || src >= static_cast<long>(m)) continue;
      sum[i] += y[static_cast<std::size_t>(src)];
      ++count[i];
    }
  }
  out.centers = centers;
  out.trace.freqs = grid;
  out.trace.amplitude.resize(m);
  int edge = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (count[i] > 0) {
      out.trace.amplitude[i] = sum[i] / count[i];
    } else {
      out.trace.amplitude[i] = std::numeric_limits<double>::quiet_NaN();
      ++edge;
    }
  }
  if (edge > 0) {
    out.warnings.push_back("drift_align: " + std::to_string(edge) + " edge point(s) without data after shifting");
  }
  return out;
}

double effective_temperature(double n_bar, double freq_hz) {
  if (!(n_bar > 0.0)) throw DomainError("effective_temperature: n_bar must be > 0");
  if (!(freq_hz > 0.0)) throw DomainError("effective_temperature: frequency must be > 0");
  return constants::kPlanck * freq_hz / constants::kBoltzmann / std::log1p(1.0 / n_bar);
}

double thermal_occupation(double temp_kelvin, double freq_hz) {
  if (!(temp_kelvin >= 0.0)) throw DomainError("thermal_occupation: temperature must be >= 0");
  if (!(freq_hz > 0.0)) throw DomainError("thermal_occupation: frequency must be > 0");
  if (temp_kelvin == 0.0) return 0.0;
  return 1.0 / std::expm1(constants::kPlanck * freq_hz / (constants::kBoltzmann * temp_kelvin));
}

}  // namespace phonoflux
