#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "phonoflux/coupled.hpp"

using namespace phonoflux;

namespace {

FockSpaceSpec small_dims() { return FockSpaceSpec{100, 5, 6, std::nullopt}; }

}  // namespace

TEST_SUITE("coupled") {

TEST_CASE("decoupled spectrum is a sum of bare energies") {
  const ModeParams m{691.75, 0.0};
  const auto j = build_joint_hamiltonian(FluxoniumParams{}, FluxBias{0.48}, m, std::nullopt, small_dims());
  const QuditSpectrum q = qudit_spectrum(FluxoniumParams{}, FluxBias{0.48}, 5, 100);
  std::vector<double> expect;
  for (int a = 0; a < 5; ++a)
    for (int n = 0; n < 6; ++n) expect.push_back(1000 * q.energies(a) + n * m.omega0);
  std::sort(expect.begin(), expect.end());
  const auto ev = symmetric_eigensystem(j.h).values;
  for (int i = 0; i < ev.size(); ++i) CHECK(ev(i) - ev(0) == doctest::Approx(expect[i] - expect[0]).epsilon(1e-10));

  const DressedSpectrum d = label_dressed_states(j);
  for (const auto& l : d.levels) CHECK(l.overlap == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dispersive_shift_exact(j) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dispersive_pair_pt(q, 0.0, m.omega0, 2).two_chi == 0.0);
}

TEST_CASE("tensor order does not change the spectrum") {
  const auto j = build_joint_hamiltonian(FluxoniumParams{}, FluxBias{0.4751}, ModeParams{}, std::nullopt,
                                         small_dims());
  const int nq = 5, nm = 6;
  // Rebuild with the phonon index slowest.
  RealMatrix h = RealMatrix::Zero(nq * nm, nq * nm);
  const RealMatrix& a = j.qudit.charge_generator;
  for (int n = 0; n < nm; ++n)
    for (int q = 0; q < nq; ++q) h(n * nq + q, n * nq + q) = 1000 * j.qudit.energies(q) + n * 691.75;
  for (int n = 0; n + 1 < nm; ++n) {
    const double s = std::sqrt(double(n + 1));
    for (int q = 0; q < nq; ++q)
      for (int r = 0; r < nq; ++r) {
        // g_m A (x) (b - b^dag): <n|b|n+1> = s, <n+1|b^dag|n> = s.
        h(n * nq + q, (n + 1) * nq + r) += 66.6 * a(q, r) * s;
        h((n + 1) * nq + q, n * nq + r) -= 66.6 * a(q, r) * s;
      }
  }
  const auto e1 = symmetric_eigensystem(j.h).values;
  const auto e2 = symmetric_eigensystem(h).values;
  CHECK((e1 - e2).norm() < 1e-9 * e1.norm());
}

TEST_CASE("avoided crossing width") {
  const FockSpaceSpec dims{100, 6, 10, std::nullopt};
  double best = 1e9;
  for (double phi = 0.4895; phi <= 0.4911; phi += 0.00002) {
    const auto j = build_joint_hamiltonian(FluxoniumParams{}, FluxBias{phi}, ModeParams{}, std::nullopt, dims);
    const auto ev = symmetric_eigensystem(j.h).values;
    best = std::min(best, ev(2) - ev(1));
  }
  CHECK(best == doctest::Approx(27.1).epsilon(0.5 / 27.1));
}

TEST_CASE("dressed labels") {
  const FluxoniumParams p;
  // Resonant mode with weak coupling: e0 and g1 share the weight equally.
  const double w_eg = 1000 * transition_frequency(p, FluxBias{0.48}, {0, 1});
  const auto jr = build_joint_hamiltonian(p, FluxBias{0.48}, ModeParams{w_eg, 2.0}, std::nullopt, small_dims());
  const DressedSpectrum dr = label_dressed_states(jr);
  int hybrid = 0;
  for (const auto& l : dr.levels) {
    if (l.hybridized) {
      ++hybrid;
      CHECK(l.overlap == doctest::Approx(0.5).epsilon(0.02));
    }
  }
  CHECK(hybrid >= 2);
  CHECK_THROWS_AS(dispersive_shift_exact(jr), ResonanceError);

  // Delta / g_eg near 9 at 0.4751.
  const auto j = build_joint_hamiltonian(p, FluxBias{0.4751}, ModeParams{}, std::nullopt, FockSpaceSpec{});
  const DressedSpectrum d = label_dressed_states(j);
  CHECK(d.find(BareLabel{1, 0}).overlap > 0.98);
  CHECK(parse_label("f2").qudit == 2);
  CHECK(parse_label("f2").phonon == 2);
  CHECK(BareLabel{1, 3}.str() == "e3");
}

TEST_CASE("dressed transitions") {
  const FluxoniumParams p;
  for (auto [phi, target] : {std::pair{0.4726, 843.0}, std::pair{0.4751, 816.0}}) {
    const auto j = build_joint_hamiltonian(p, FluxBias{phi}, ModeParams{}, std::nullopt, FockSpaceSpec{});
    const DressedSpectrum d = label_dressed_states(j);
    const auto t = transition_table(d, {{BareLabel{0, 0}, BareLabel{1, 0}},
                                        {BareLabel{0, 0}, BareLabel{0, 1}},
                                        {BareLabel{1, 0}, BareLabel{1, 1}}});
    CHECK(std::abs(t[0].frequency - target) < 2.0);
    CHECK(t[1].frequency - t[2].frequency == doctest::Approx(-dispersive_shift_exact(j)).epsilon(1e-9));
  }
}

TEST_CASE("Jaynes-Cummings branch formula") {
  CHECK(jc_qubitlike_frequency(800.0, 700.0, 0.0).value == 800.0);
  CHECK(jc_qubitlike_frequency(600.0, 700.0, 0.0).value == 600.0);
  const auto res = jc_qubitlike_frequency(700.0, 700.0, 13.0);
  CHECK(res.value == doctest::Approx(713.0));
  CHECK(res.branch_ambiguous);
  for (double d0 : {1e4, -1e4}) {
    const double g = 13.56;
    const double v = jc_qubitlike_frequency(700.0 + d0, 700.0, g).value;
    CHECK(v - (700.0 + d0) == doctest::Approx(g * g / d0).epsilon(1e-3));
  }
}

TEST_CASE("tuning fit recovers synthetic parameters") {
  const FluxoniumParams truth;
  const double w_m = 691.75, g_m = 66.6;
  std::vector<TuningPeak> peaks;
  for (int i = 0; i <= 24; ++i) {
    const double phi = 0.455 + 0.0018 * i;
    peaks.push_back({phi, jc_tuning_model(truth, w_m, g_m, phi)});
  }
  TuningFitResult init;
  init.params = FluxoniumParams{0.78, 2.68, 0.81};
  init.omega_m0 = 690.0;
  init.g_m = 60.0;
  TuningFitOptions opt;
  opt.exclude_target_crossing = false;
  const TuningFitResult r = fit_tuning_spectrum(peaks, init, opt);
  CHECK(r.converged);
  CHECK(r.residual_rms < 1e-3);
  CHECK(r.g_m == doctest::Approx(g_m).epsilon(1e-4));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto noisy = peaks;
  for (auto& pk : noisy) pk.freq_mhz += noise(rng);
  const TuningFitResult n = fit_tuning_spectrum(noisy, init, opt);
  REQUIRE(n.converged);
  const double est[5] = {n.params.e_c, n.params.e_j, n.params.e_l, n.omega_m0, n.g_m};
  const double tru[5] = {truth.e_c, truth.e_j, truth.e_l, w_m, g_m};
  for (int k = 0; k < 5; ++k) CHECK(std::abs(est[k] - tru[k]) < 2 * n.std_errors[k] + 1e-12);
  CHECK(n.g_m == doctest::Approx(66.6).epsilon(1.2 / 66.6 * 2));
}

TEST_CASE("exact dispersive shift at the measured bias points") {
  const FluxoniumParams p;
  const auto j1 = build_joint_hamiltonian(p, FluxBias{0.4751}, ModeParams{}, std::nullopt, FockSpaceSpec{});
  CHECK(std::abs(dispersive_shift_exact(j1) - 2.23) < 0.1);
  const auto j2 = build_joint_hamiltonian(p, FluxBias{0.4726}, ModeParams{}, std::nullopt, FockSpaceSpec{});
  CHECK(std::abs(dispersive_shift_exact(j2) - 1.67) < 0.1);
}

TEST_CASE("perturbative dispersive shift") {
  const FluxoniumParams p;
  // Two-level truncation near resonance reduces to 2 g_eg^2 / Delta.
  const QuditSpectrum q = qudit_spectrum(p, FluxBias{0.4751}, 6, 100);
  const double w_eg = 1000 * q.energies(1);
  const double g_m = 10.0, g_eg = g_m * q.charge_elements(0, 1);
  for (double delta : {40.0, -40.0}) {
    const double two_chi = dispersive_pair_pt(q, g_m, w_eg - delta, 1).two_chi;
    CHECK(two_chi == doctest::Approx(2 * g_eg * g_eg / delta).epsilon(0.05));
  }
  CHECK_THROWS_AS(dispersive_pair_pt(q, g_m, w_eg - 1.0, 1), ResonanceError);

  double worst_f = 0, worst_e = 0;
  for (double phi = 0.47; phi <= 0.4781; phi += 0.001) {
    const auto j = build_joint_hamiltonian(p, FluxBias{phi}, ModeParams{}, std::nullopt, FockSpaceSpec{});
    const double exact = dispersive_shift_exact(j);
    const QuditSpectrum s = qudit_spectrum(p, FluxBias{phi}, 6, 100);
    const double pf = dispersive_pair_pt(s, 66.6, 691.75, 2).two_chi;
    const double pe = dispersive_pair_pt(s, 66.6, 691.75, 1).two_chi;
    worst_f = std::max(worst_f, std::abs(pf - exact) / exact);
    worst_e = std::max(worst_e, std::abs(pe - exact) / exact);
  }
  CHECK(worst_f < 0.10);
  CHECK(worst_e > worst_f);
}

}
