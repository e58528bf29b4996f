#include <doctest.h>

#include <cmath>

#include "phonoflux/fluxonium.hpp"

using namespace phonoflux;

TEST_SUITE("fluxonium") {

TEST_CASE("harmonic limit") {
  // E_J must be positive; 1e-12 GHz is harmonic to far below the tolerance.
  const FluxoniumParams p{0.8, 1e-12, 0.9};
  const double w = std::sqrt(8 * p.e_l * p.e_c);
  const QuditSpectrum s = qudit_spectrum(p, FluxBias{0.3}, 8, 60);
  for (int k = 1; k < 8; ++k) CHECK(s.energies(k) - s.energies(k - 1) == doctest::Approx(w).epsilon(1e-9));
  const double n_zpf = std::pow(p.e_l / (32 * p.e_c), 0.25);
  CHECK(s.charge_elements(0, 1) == doctest::Approx(n_zpf).epsilon(1e-9));
  CHECK(s.charge_elements(0, 2) < 1e-9);
}

TEST_CASE("hamiltonian is hermitian and validated") {
  const OperatorMatrix h = build_fluxonium_hamiltonian(FluxoniumParams{}, FluxBias{0.47}, 40);
  CHECK(hermiticity_defect(h) < 1e-14);
  CHECK_THROWS_AS(build_fluxonium_hamiltonian(FluxoniumParams{}, FluxBias{0.47}, 10), InvalidDimension);
  CHECK_THROWS_AS(qudit_spectrum(FluxoniumParams{-1, 1, 1}, FluxBias{0.5}, 4), DomainError);
}

TEST_CASE("device parameters at half flux") {
  const FluxoniumParams p;
  const QuditSpectrum s = qudit_spectrum(p, FluxBias{0.5}, 6, 100);
  // Minimum qubit frequency lies below the mechanical mode at 691.75 MHz.
  CHECK(1000 * s.energies(1) < 691.75);
  // g_eg / g_m = 13.56 / 66.6.
  CHECK(s.charge_elements(0, 1) == doctest::Approx(13.56 / 66.6).epsilon(0.02));
  // Parity selection: g-f is forbidden, g-h near the ~0.3 design target.
  CHECK(s.charge_elements(0, 2) < 1e-8);
  CHECK(std::abs(s.charge_elements(0, 3) - 0.3) < 0.1);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(s.charge_elements(i, j) == doctest::Approx(s.charge_elements(j, i)));
}

TEST_CASE("truncation convergence") {
  const FluxoniumParams p;
  for (double phi : {0.47, 0.4751, 0.5}) {
    const double a = transition_frequency(p, FluxBias{phi}, {0, 1}, 100);
    const double b = transition_frequency(p, FluxBias{phi}, {0, 1}, 200);
    CHECK(std::abs(a - b) < 1e-6);  // GHz, i.e. 1 kHz
  }
}

TEST_CASE("tuning curve shape") {
  const FluxoniumParams p;
  for (double d : {0.001, 0.01, 0.03, 0.07}) {
    CHECK(std::abs(transition_frequency(p, FluxBias{0.5 + d}, {0, 1}) -
                   transition_frequency(p, FluxBias{0.5 - d}, {0, 1})) < 1e-6);
  }
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(0.47 + 0.001 * i);
  const auto curve = tuning_curve(p, grid, {0, 1});
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second < curve[i - 1].second);
  CHECK(curve.back().first == doctest::Approx(0.5));
}

TEST_CASE("flux slope") {
  const FluxoniumParams p;
  CHECK(std::abs(flux_slope(p, FluxBias{0.4751}).value) == doctest::Approx(10.67).epsilon(0.05));
  CHECK(std::abs(flux_slope(p, FluxBias{0.4726}).value) == doctest::Approx(11.34).epsilon(0.05));
  CHECK(std::abs(flux_slope(p, FluxBias{0.5}).value) < 1e-3);
  // Oracle: plain central difference on a wider step.
  const double h = 1e-4;
  const double fd = (transition_frequency(p, FluxBias{0.4751 + h}, {0, 1}) -
                     transition_frequency(p, FluxBias{0.4751 - h}, {0, 1})) / (2 * h);
  CHECK(flux_slope(p, FluxBias{0.4751}).value == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("voltage calibration") {
  CHECK(FluxBias::from_volts(3.0, 25.56, 3.0).phi_e_over_phi0 == doctest::Approx(0.5));
  CHECK(FluxBias::from_volts(3.0 + 25.56, 25.56, 3.0).phi_e_over_phi0 == doctest::Approx(1.5));
  CHECK_THROWS_AS(FluxBias::from_volts(0.0, 0.0, 0.0), DomainError);
}

}
