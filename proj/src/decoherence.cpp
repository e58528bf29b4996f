#include "phonoflux/decoherence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace phonoflux {

namespace {

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

void check_series(const std::vector<double>& t, const std::vector<double>& y, std::size_t min_n,
                  const char* who) {
  if (t.size() != y.size()) throw ValidationError(std::string(who) + ": t and y sizes differ");
  if (t.size() < min_n) {
    throw PreconditionViolation(std::string(who) + ": need >= " + std::to_string(min_n) + " samples");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(y[i])) throw ValidationError(std::string(who) + ": non-finite sample");
  }
}

RealVector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void OneOverFNoise::validate() const {
  if (!(a_phi > 0.0)) throw DomainError("OneOverFNoise: a_phi must be > 0");
  if (gamma_exp != 1.0) throw DomainError("OneOverFNoise: only gamma_exp = 1 is supported");
  if (!(omega_c > 0.0) || !(t_ref > 0.0)) throw DomainError("OneOverFNoise: omega_c and t_ref must be > 0");
  if (omega_c * t_ref >= 1.0) throw DomainError("OneOverFNoise: omega_c * t_ref must be << 1");
}

double thermal_dephasing_rate(double kappa_per_us, double chi_mhz, double n_bar) {
  if (!(kappa_per_us > 0.0)) throw DomainError("thermal_dephasing_rate: kappa must be > 0");
  if (!(n_bar >= 0.0)) throw DomainError("thermal_dephasing_rate: n_bar must be >= 0");
  const double chi = constants::kTwoPi * chi_mhz;
  const Complex a(1.0, 2.0 * chi / kappa_per_us);
  const Complex s = std::sqrt(a * a + Complex(0.0, 8.0 * chi * n_bar / kappa_per_us));
  return std::max(0.0, 0.5 * kappa_per_us * (s.real() - 1.0));
}

double filter_function(int n_pulses, double omega, double t_s) {
  if (!(t_s > 0.0)) throw DomainError("filter_function: t must be > 0");
  if (n_pulses == 0) {
    const double s = sinc(0.5 * omega * t_s);
    return s * s;
  }
  if (n_pulses == 1) {
    const double x = 0.25 * omega * t_s;
    const double s = std::sin(x) * sinc(x);
    return s * s;
  }
  throw DomainError("filter_function: only 0 (Ramsey) and 1 (echo) pulses are supported");
}

double dephasing_time_1f(const OneOverFNoise& noise, double slope_ghz_per_phi0, int n_pulses) {
  noise.validate();
  double factor = 0.0;
  if (n_pulses == 0) {
    factor = 1.5 - constants::kEulerGamma + std::log(1.0 / (noise.omega_c * noise.t_ref));
  } else if (n_pulses == 1) {
    factor = std::log(2.0);
  } else {
    throw DomainError("dephasing_time_1f: only 0 (Ramsey) and 1 (echo) pulses are supported");
  }
  const double d_omega = constants::kTwoPi * std::abs(slope_ghz_per_phi0) * 1e9;  // rad/s per Phi0
  if (!(d_omega > 0.0)) throw DomainError("dephasing_time_1f: slope must be nonzero");
  const double rate = d_omega * noise.a_phi * 1e-6 * std::sqrt(factor);  // 1/s
  return 1e6 / rate;
}

double ramsey_dispersive_model(double t_us, const RamseyDispersiveParams& p, int n_max) {
  if (n_max < 0) throw DomainError("ramsey_dispersive_model: n_max must be >= 0");
  if (static_cast<int>(p.amplitudes.size()) < n_max + 1) {
    throw ValidationError("ramsey_dispersive_model: need n_max + 1 amplitudes");
  }
  if (!(p.t2q > 0.0)) throw DomainError("ramsey_dispersive_model: T2q must be > 0");
  const double env = std::exp(-t_us / p.t2q);
  double s = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const double phase = constants::kTwoPi * ((p.f0 + n * p.two_chi) * t_us + p.two_chi * n * p.t_d);
    s += p.amplitudes[n] * std::cos(phase);
  }
  return env * s;
}

RamseyFit ramsey_dispersive_fit(const std::vector<double>& t_us, const std::vector<double>& y,
                                const RamseyDispersiveParams& initial, int n_max) {
  check_series(t_us, y, 8, "ramsey_dispersive_fit");
  if (n_max < 0) throw DomainError("ramsey_dispersive_fit: n_max must be >= 0");
  if (static_cast<int>(initial.amplitudes.size()) < n_max + 1) {
    throw ValidationError("ramsey_dispersive_fit: need n_max + 1 initial amplitudes");
  }
  const int na = n_max + 1;
  const double t_d = initial.t_d;
  auto unpack = [na, t_d](const RealVector& q) {
    RamseyDispersiveParams p;
    p.amplitudes.assign(q.data(), q.data() + na);
    p.t2q = q(na);
    p.f0 = q(na + 1);
    p.two_chi = q(na + 2);
    p.t_d = t_d;
    return p;
  };
  FitProblem prob;
  prob.x = to_vector(t_us);
  prob.y = to_vector(y);
  prob.model = [unpack, n_max](const RealVector& q, const RealVector& x) {
    const RamseyDispersiveParams p = unpack(q);
    RealVector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = ramsey_dispersive_model(x(i), p, n_max);
    return out;
  };
  prob.initial = RealVector(na + 3);
  prob.lower = RealVector::Constant(na + 3, -1e300);
  prob.upper = RealVector::Constant(na + 3, 1e300);
  for (int n = 0; n < na; ++n) prob.initial(n) = initial.amplitudes[n];
  prob.initial(na) = initial.t2q;
  prob.initial(na + 1) = initial.f0;
  prob.initial(na + 2) = initial.two_chi;
  prob.lower(na) = 1e-6;
  prob.max_iterations = 500;

  RamseyFit r;
  r.fit = least_squares(prob);
  r.params = unpack(r.fit.params);
  for (int n = 0; n < na; ++n) r.amplitude_err.push_back(r.fit.std_errors(n));
  r.t2q_err = r.fit.std_errors(na);
  r.f0_err = r.fit.std_errors(na + 1);
  r.two_chi_err = r.fit.std_errors(na + 2);
  return r;
}

StretchedExpFit stretched_exp_fit(const std::vector<double>& t_us, const std::vector<double>& y,
                                  bool constrained, bool fit_offset) {
  check_series(t_us, y, 8, "stretched_exp_fit");
  const auto [tmin_it, tmax_it] = std::minmax_element(t_us.begin(), t_us.end());
  const double t_span = *tmax_it - *tmin_it;
  if (!(t_span > 0.0)) throw ValidationError("stretched_exp_fit: delays must not all be equal");

  FitProblem prob;
  prob.x = to_vector(t_us);
  prob.y = to_vector(y);
  prob.model = [](const RealVector& q, const RealVector& x) {
    RealVector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      out(i) = q(0) * std::exp(-std::pow(std::max(x(i), 0.0) / q(1), q(2))) + q(3);
    }
    return out;
  };
  // Initial T from the first crossing of 1/e of the largest magnitude sample.
  const std::size_t i0 = static_cast<std::size_t>(std::min_element(t_us.begin(), t_us.end()) - t_us.begin());
  const double a0 = y[i0] != 0.0 ? y[i0] : 1.0;
  double t0 = 0.5 * t_span;
  std::vector<std::size_t> order(t_us.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t_us[a] < t_us[b]; });
  for (std::size_t k : order) {
    if (y[k] / a0 < std::exp(-1.0)) {
      t0 = std::max(t_us[k], 1e-3 * t_span);
      break;
    }
  }
  const double n_lo = constrained ? 1.0 : 0.5;
  prob.initial = RealVector(4);
  prob.initial << a0, t0, std::max(n_lo, 1.0), 0.0;
  prob.lower = RealVector(4);
  prob.upper = RealVector(4);
  const double big = 1e3 * (std::abs(a0) + 1.0);
  prob.lower << -big, 1e-6 * t_span, n_lo, fit_offset ? -big : 0.0;
  prob.upper << big, 1e3 * t_span, 2.5, fit_offset ? big : 0.0;
  prob.max_iterations = 500;

  StretchedExpFit r;
  FitOutcome best;
  bool have = false;
  for (double n_start : {std::max(n_lo, 1.0), 1.5, 2.0}) {
    prob.initial(2) = n_start;
    FitOutcome f = least_squares(prob);
    if (!have || f.cost < best.cost) {
      best = f;
      have = true;
    }
  }
  r.fit = best;
  r.amplitude = best.params(0);
  r.t = best.params(1);
  r.n = best.params(2);
  r.offset = best.params(3);
  r.amplitude_err = best.std_errors(0);
  r.t_err = best.std_errors(1);
  r.n_err = best.std_errors(2);
  r.offset_err = best.std_errors(3);
  return r;
}

MultiExpFit multi_exp_fit(const std::vector<double>& t_us, const std::vector<double>& y, int k) {
  check_series(t_us, y, 8, "multi_exp_fit");
  if (k < 1) throw DomainError("multi_exp_fit: k must be >= 1");
  double tmin = 1e300, tmax = 0.0;
  for (double t : t_us) {
    if (t > 0.0) tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  if (!(tmax > 0.0) || tmax / tmin < 100.0) {
    throw PreconditionViolation("multi_exp_fit: delays must span >= 2 decades");
  }
  if (static_cast<int>(t_us.size()) <= 2 * k) throw PreconditionViolation("multi_exp_fit: too few samples for k");

  FitProblem prob;
  prob.x = to_vector(t_us);
  prob.y = to_vector(y);
  prob.model = [k](const RealVector& q, const RealVector& x) {
    RealVector out = RealVector::Zero(x.size());
    for (int c = 0; c < k; ++c) {
      for (Eigen::Index i = 0; i < x.size(); ++i) out(i) += q(2 * c) * std::exp(-x(i) / q(2 * c + 1));
    }
    return out;
  };
  prob.jacobian = [k](const RealVector& q, const RealVector& x) {
    RealMatrix j(x.size(), 2 * k);
    for (int c = 0; c < k; ++c) {
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double e = std::exp(-x(i) / q(2 * c + 1));
        j(i, 2 * c) = e;
        j(i, 2 * c + 1) = q(2 * c) * e * x(i) / (q(2 * c + 1) * q(2 * c + 1));
      }
    }
    return j;
  };
  const double y_scale = std::max(prob.y.cwiseAbs().maxCoeff(), 1e-300);
  prob.lower = RealVector(2 * k);
  prob.upper = RealVector(2 * k);
  for (int c = 0; c < k; ++c) {
    prob.lower(2 * c) = -10.0 * y_scale;
    prob.upper(2 * c) = 10.0 * y_scale;
    prob.lower(2 * c + 1) = 0.1 * tmin;
    prob.upper(2 * c + 1) = 10.0 * tmax;
  }
  prob.max_iterations = 1000;

  // Log-spaced starting time constants, a few spreads.
  FitOutcome best;
  bool have = false;
  for (double spread : {1.0, 0.5, 0.25}) {
    prob.initial = RealVector(2 * k);
    const double lo = std::log(tmin) + (1.0 - spread) * 0.5 * std::log(tmax / tmin) + 0.5;
    const double hi = std::log(tmax) - (1.0 - spread) * 0.5 * std::log(tmax / tmin) - 0.5;
    for (int c = 0; c < k; ++c) {
      const double u = k == 1 ? 0.5 : static_cast<double>(c) / (k - 1);
      prob.initial(2 * c) = y_scale / k;
      prob.initial(2 * c + 1) = std::exp(lo + u * (hi - lo));
    }
    FitOutcome f = least_squares(prob);
    if (!have || f.cost < best.cost) {
      best = f;
      have = true;
    }
  }

  MultiExpFit r;
  r.fit = best;
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return best.params(2 * a + 1) < best.params(2 * b + 1); });
  for (int c : order) {
    r.amplitudes.push_back(best.params(2 * c));
    r.amplitudes_err.push_back(best.std_errors(2 * c));
    r.times.push_back(best.params(2 * c + 1));
    r.times_err.push_back(best.std_errors(2 * c + 1));
  }
  for (int c = 1; c < k; ++c) {
    if (r.times[c] < 2.0 * r.times[c - 1]) {
      r.warnings.push_back("multi_exp_fit: components " + std::to_string(c - 1) + " and " + std::to_string(c) +
                           " have time ratio < 2 and are not identifiable");
    }
  }

  // 1/e time of the fitted model by bisection.
  auto model_at = [&](double t) {
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += r.amplitudes[c] * std::exp(-t / r.times[c]);
    return s;
  };
  const double y0 = model_at(0.0);
  const double target = y0 * std::exp(-1.0);
  double lo = 0.0, hi = r.times.back();
  while ((model_at(hi) - target) * (y0 - target) > 0.0 && hi < 1e6 * r.times.back()) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((model_at(mid) - target) * (y0 - target) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  r.one_over_e_time = 0.5 * (lo + hi);
  return r;
}

double pure_dephasing(double t2_us, double t1_us) {
  if (!(t2_us > 0.0) || !(t1_us > 0.0)) throw DomainError("pure_dephasing: times must be > 0");
  const double rate = 1.0 / t2_us - 0.5 / t1_us;
  if (!(rate > 0.0)) throw DomainError("pure_dephasing: T2 exceeds 2 T1");
  return 1.0 / rate;
}

Cooperativities cooperativities(double two_chi_mhz, double t1q, double t1m1, double t2q, double t2m) {
  if (!(t1q > 0.0) || !(t1m1 > 0.0) || !(t2q > 0.0) || !(t2m > 0.0)) {
    throw DomainError("cooperativities: times must be > 0");
  }
  const double two_chi = constants::kTwoPi * two_chi_mhz;  // rad/us
  Cooperativities c;
  c.c_t1 = two_chi * two_chi * t1q * t1m1;
  c.c_t2 = 4.0 * two_chi * two_chi * t2q * t2m;
  return c;
}

}  // namespace phonoflux
