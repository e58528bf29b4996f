#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "phonoflux/decoherence.hpp"
#include "phonoflux/dynamics.hpp"

using namespace phonoflux;

namespace {

SimulationSetup small_setup() {
  SimulationSetup s;
  s.dims = FockSpaceSpec{100, 4, 5, std::nullopt};
  s.rates.n_th_q = 0.4154;
  return s;
}

double hermiticity_of(const PlanarState& s) {
  const OperatorMatrix m = s.to_density().matrix();
  return (m - m.adjoint()).norm() / m.norm();
}

double trace_distance(const OperatorMatrix& a, const OperatorMatrix& b) {
  const auto e = hermitian_eigensystem(a - b, 1e-8);
  return 0.5 * e.values.cwiseAbs().sum();
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("collapse rates") {
  RateSet r;
  r.n_th_m = 0.0;
  CHECK(collapse_rates(r).kappa_m_up == 0.0);
  CHECK(collapse_rates(r).kappa_m_down == doctest::Approx(1 / r.t1m));
  r.n_th_m = 0.57;
  r.t1m = 0.85;
  const CollapseRates c = collapse_rates(r);
  CHECK(c.kappa_m_down == doctest::Approx((1.57 / 2.14) / 0.85).epsilon(1e-12));
  CHECK(c.kappa_m_down == doctest::Approx(0.863).epsilon(1e-3));
  CHECK(c.kappa_m_up / c.kappa_m_down == doctest::Approx(0.57 / 1.57).epsilon(1e-14));
  CHECK(c.kappa_m_up + c.kappa_m_down == doctest::Approx(1 / 0.85).epsilon(1e-14));
  CHECK(c.gamma_phi == doctest::Approx(2 / r.t_phi_q));
  r.t1q = -1;
  CHECK_THROWS_AS(collapse_rates(r), DomainError);
}

TEST_CASE("generic Lindblad: analytic decay") {
  LindbladModel m;
  m.h0 = OperatorMatrix::Zero(2, 2);
  m.h0(1, 1) = 800.0;
  OperatorMatrix lower = OperatorMatrix::Zero(2, 2);
  lower(0, 1) = 1.0;
  const double kappa = 0.7;
  m.collapse_ops = {std::sqrt(kappa) * lower};
  OperatorMatrix e = OperatorMatrix::Zero(2, 2);
  e(1, 1) = 1.0;
  const std::vector<double> t = {0.0, 0.25, 0.5, 1.0, 2.0};
  const auto tr = integrate_lindblad(m, DensityMatrix(e), t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(std::abs(tr.states[i].matrix()(1, 1).real() - std::exp(-kappa * t[i])) < 1e-6);
  }
  CHECK(tr.max_trace_error < 1e-7);
  CHECK(tr.max_hermiticity_defect < 1e-9);
}

TEST_CASE("generic Lindblad: thermal fixed point") {
  const int dim = 10;
  const double n_bar = 0.57;
  const auto l = ladder_operators(dim);
  LindbladModel m;
  m.h0 = OperatorMatrix::Zero(dim, dim);
  m.collapse_ops = {std::sqrt((1 + n_bar) / (1 + 2 * n_bar)) * l.annihilation,
                    std::sqrt(n_bar / (1 + 2 * n_bar)) * l.creation};
  IntegrationOptions opt;
  opt.max_step_us = 0.01;
  OperatorMatrix start = OperatorMatrix::Zero(dim, dim);
  start(3, 3) = 1.0;
  const auto tr = integrate_lindblad(m, DensityMatrix(start), {0.0, 40.0}, opt);
  // Oracle: Bose-Einstein state at the temperature giving n_bar at 690 MHz.
  const double f = 690e6;
  const double temp = constants::kPlanck * f / (constants::kBoltzmann * std::log1p(1 / n_bar));
  const auto th = thermal_density_matrix(f, temp, dim);
  CHECK(trace_distance(tr.states.back().matrix(), th.rho.matrix()) < 1e-6);
}

TEST_CASE("generic Lindblad: closed evolution keeps purity") {
  std::mt19937_64 rng(8);
  LindbladModel m;
  m.h0 = 10.0 * testing::random_hermitian(5, rng);
  m.drive_operator = testing::random_hermitian(5, rng);
  m.drive = [](double t) { return std::sin(30.0 * t); };
  m.drive_bound_mhz = m.drive_operator.norm();
  const OperatorMatrix v = testing::random_complex(5, 1, rng);
  const OperatorMatrix pure = v * v.adjoint() / v.squaredNorm();
  const auto tr = integrate_lindblad(m, DensityMatrix(pure), {0.0, 0.3, 0.6});
  for (const auto& s : tr.states) CHECK(std::abs(s.purity() - 1.0) < 1e-8);
}

TEST_CASE("ideal pulses and readout signal") {
  const JointSimulator sim(small_setup());
  const OperatorMatrix pi = sim.ideal_pi_pulse();
  const int d = sim.dim();
  CHECK((pi.adjoint() * pi - OperatorMatrix::Identity(d, d)).norm() < 1e-12);
  CHECK((pi * pi - OperatorMatrix::Identity(d, d)).norm() < 1e-12);
  const OperatorMatrix half = sim.ideal_half_pi_pulse();
  CHECK((half.adjoint() * half - OperatorMatrix::Identity(d, d)).norm() < 1e-12);
  CHECK(((half * half) * (half * half) - OperatorMatrix::Identity(d, d)).norm() > 1e-3);

  const DensityMatrix th = sim.thermal_state();
  const Populations p0 = sim.populations(th);
  const Populations p1 = sim.populations(JointSimulator::apply_unitary(pi, th));
  CHECK(p1.p_e() == doctest::Approx(p0.p_g()).epsilon(1e-12));
  CHECK(p1.p_g() == doctest::Approx(p0.p_e()).epsilon(1e-12));
  for (std::size_t n = 0; n < p0.phonon.size(); ++n) CHECK(p1.phonon[n] == doctest::Approx(p0.phonon[n]));

  CHECK(readout_signal(p0, p0) == 0.0);
  Populations g{{1.0, 0.0, 0.0, 0.0}, {1.0}}, e{{0.0, 1.0, 0.0, 0.0}, {1.0}};
  CHECK(readout_signal(e, g) == 2.0);
}

TEST_CASE("structured right-hand side matches the generic model") {
  const JointSimulator sim(small_setup());
  ModulationPulse pulse;
  pulse.v0 = 300.0;
  const LindbladModel model = sim.lindblad_model(pulse);
  std::mt19937_64 rng(2);
  const DensityMatrix rho = testing::random_density(sim.dim(), rng);
  const double flux = 3e-3;
  PlanarState out;
  sim.rhs(flux, PlanarState::from(rho), out);
  // Oracle: -2 pi i [H, rho] + sum D[L] rho with the dense operators (1/us).
  const OperatorMatrix h = model.h0 + flux * model.drive_operator;
  OperatorMatrix expect = Complex(0, -constants::kTwoPi) * (h * rho.matrix() - rho.matrix() * h);
  for (const auto& l : model.collapse_ops) {
    const OperatorMatrix ld = l.adjoint() * l;
    expect += l * rho.matrix() * l.adjoint() - 0.5 * (ld * rho.matrix() + rho.matrix() * ld);
  }
  CHECK((out.to_density().matrix() - expect).norm() < 1e-9 * expect.norm());
}

TEST_CASE("split-step pulse agrees with RK4 and converges") {
  const JointSimulator sim(small_setup());
  const DensityMatrix prepared = JointSimulator::apply_unitary(sim.ideal_pi_pulse(), sim.thermal_state());
  const PlanarState start = PlanarState::from(prepared);
  ModulationPulse pulse;
  pulse.v0 = 300.0;
  const PlanarState a = sim.run_pulse(pulse, start, PulseIntegrator::SplitStep, 0.1);
  const PlanarState b = sim.run_pulse(pulse, start, PulseIntegrator::SplitStep, 0.05);
  const PlanarState r = sim.run_pulse(pulse, start, PulseIntegrator::Rk4, 0.002);
  const Populations pa = sim.populations(a), pb = sim.populations(b), pr = sim.populations(r);
  for (std::size_t i = 0; i < pa.qudit.size(); ++i) {
    CHECK(std::abs(pa.qudit[i] - pb.qudit[i]) < 1e-6);
    CHECK(std::abs(pb.qudit[i] - pr.qudit[i]) < 1e-5);
  }
  for (std::size_t n = 0; n < pa.phonon.size(); ++n) {
    CHECK(std::abs(pa.phonon[n] - pb.phonon[n]) < 1e-6);
    CHECK(std::abs(pb.phonon[n] - pr.phonon[n]) < 1e-5);
  }
  for (const PlanarState* s : {&a, &b, &r}) {
    CHECK(std::abs(s->trace() - 1.0) < 1e-7);
    CHECK(hermiticity_of(*s) < 1e-9);
  }
  // A real swap happened.
  CHECK(readout_signal(pa, sim.populations(start)) > 0.3);
}

TEST_CASE("no drive and no decoherence leaves dressed populations unchanged") {
  SimulationSetup s = small_setup();
  s.rates.t1m = s.rates.t1q = s.rates.t_phi_q = 1e12;
  const JointSimulator sim(s);
  const auto map = rabi_amplitude_sweep(sim, ModulationPulse{}, {0.0}, {150.0, 155.6});
  for (const auto& p : map.points) CHECK(p.signal < 1e-6);
}

TEST_CASE("free evolution reaches the rate-set fixed point") {
  // Decoupled, so the phonon ladder is a birth-death chain whose fixed point
  // is the truncated geometric distribution, and (g, e) settle at n_th_q.
  SimulationSetup s = small_setup();
  s.mech.g = 0.0;
  const JointSimulator sim(s);
  const DensityMatrix th = sim.thermal_state();
  const PlanarState start = PlanarState::from(JointSimulator::apply_unitary(sim.ideal_pi_pulse(), th));
  const PlanarState end = sim.free_evolution(start, 20 * s.rates.t1m + 15 * s.rates.t1q);
  const Populations pe = sim.populations(end), p0 = sim.populations(start);

  const double tau = s.rates.n_th_m / (1 + s.rates.n_th_m);
  const int nm = s.dims.n_phonon;
  double z = 0.0, mean = 0.0, mean_sim = 0.0;
  for (int n = 0; n < nm; ++n) z += std::pow(tau, n);
  for (int n = 0; n < nm; ++n) {
    CHECK(std::abs(pe.phonon[n] - std::pow(tau, n) / z) < 1e-4);
    mean += n * std::pow(tau, n) / z;
    mean_sim += n * pe.phonon[n];
  }
  CHECK(std::abs(mean_sim - mean) < 1e-4);
  CHECK(pe.qudit[1] / pe.qudit[0] == doctest::Approx(s.rates.n_th_q / (1 + s.rates.n_th_q)).epsilon(1e-4));
  CHECK(std::abs(pe.qudit[2] - p0.qudit[2]) < 1e-9);
  CHECK(std::abs(end.trace() - 1.0) < 1e-7);
  CHECK(hermiticity_of(end) < 1e-9);
}

TEST_CASE("swap sequence recovers the mechanical T1") {
  SimulationSetup s = small_setup();
  s.rates.n_th_m = 0.0;
  s.rates.t1q = 1e6;
  s.rates.t_phi_q = 1e6;
  s.rates.n_th_q = 0.0;
  const JointSimulator sim(s);
  ModulationPulse pulse;
  pulse.v0 = 300.0;
  std::vector<double> delays;
  for (int i = 0; i < 12; ++i) delays.push_back(0.25 * i);
  SwapOptions opt;
  opt.phases = {0.0};
  const SwapTrace tr = swap_sequence(sim, pulse, delays, opt);
  const StretchedExpFit f = stretched_exp_fit(tr.delays_us, tr.signal, false, true);
  CHECK(f.t == doctest::Approx(s.rates.t1m).epsilon(0.15));
}

TEST_CASE("phase averaging suppresses short-delay oscillations") {
  const JointSimulator sim(small_setup());
  ModulationPulse pulse;
  pulse.v0 = 300.0;
  std::vector<double> delays;
  for (int i = 0; i <= 20; ++i) delays.push_back(0.05 * i);
  SwapOptions opt;
  opt.prep = SwapPrep::HalfPi;
  opt.recovery = SwapRecovery::HalfPi;
  const SwapTrace tr = swap_sequence(sim, pulse, delays, opt);
  auto roughness = [](const std::vector<double>& y) {
    double r = 0.0;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) r += std::pow(y[i + 1] - 2 * y[i] + y[i - 1], 2);
    return r;
  };
  std::vector<double> single, averaged;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    single.push_back(tr.asym_per_phase[i][0]);
    averaged.push_back(std::accumulate(tr.asym_per_phase[i].begin(), tr.asym_per_phase[i].end(), 0.0) /
                       double(tr.asym_per_phase[i].size()));
  }
  CHECK(roughness(averaged) < roughness(single));
}

}
