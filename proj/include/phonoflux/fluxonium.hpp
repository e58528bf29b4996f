#pragma once

// Bare fluxonium qudit: H = 4 E_C n^2 - E_J cos(phi) + E_L (phi + phi_e)^2 / 2,
// built in the harmonic basis of the (E_L, E_C) oscillator.  Energies in GHz.

#include <utility>
#include <vector>

#include "phonoflux/core.hpp"

namespace phonoflux {

struct FluxoniumParams {
  double e_c = 0.8016;  ///< GHz
  double e_j = 2.6349;  ///< GHz
  double e_l = 0.7966;  ///< GHz

  void validate() const;
};

struct FluxBias {
  double phi_e_over_phi0 = 0.5;

  /// Voltage-biased flux: 0.5 + (volts - v_half) / v_period.
  static FluxBias from_volts(double volts, double v_period, double v_half);
  double phi_e() const { return constants::kTwoPi * phi_e_over_phi0; }
};

struct FluxoniumOperators {
  RealMatrix hamiltonian;  ///< GHz, real symmetric in the harmonic basis
  RealMatrix phi;          ///< phi + phi_e, the variable the basis is built in
  RealMatrix charge_generator;  ///< n = i * charge_generator (real antisymmetric)
  RealMatrix charge_squared;    ///< n^2 projected exactly into the basis
  Warnings warnings;
};

/// Harmonic-basis operators.  With `check_convergence` the lowest six levels
/// are recomputed at 2 * n_fock and a warning is attached above a 1 kHz shift.
FluxoniumOperators fluxonium_operators(const FluxoniumParams& p, const FluxBias& flux, int n_fock,
                                       bool check_convergence = false);

/// Complex form of the same Hamiltonian (GHz).
OperatorMatrix build_fluxonium_hamiltonian(const FluxoniumParams& p, const FluxBias& flux,
                                           int n_fock, Warnings* warnings = nullptr);

struct QuditSpectrum {
  RealVector energies;         ///< GHz, ascending, ground = 0
  RealMatrix charge_elements;  ///< |<j|n|k>|
  RealMatrix charge_generator; ///< <j|n|k> = i * charge_generator(j, k), real antisymmetric
  RealMatrix phi_elements;     ///< <j|phi + phi_e|k>, real symmetric (flux-drive operator)
  RealVector charge_squared_diag;  ///< <j|n^2|j> from the full basis
  Warnings warnings;
};

/// Lowest n_levels eigenstates in the eigenbasis sign convention of
/// symmetric_eigensystem.  Requires n_levels <= n_fock / 4.
QuditSpectrum qudit_spectrum(const FluxoniumParams& p, const FluxBias& flux, int n_levels,
                             int n_fock = 100, bool check_convergence = false);

/// Transition frequency omega_k - omega_j (GHz) on each grid point (in Phi0).
std::vector<std::pair<double, double>> tuning_curve(const FluxoniumParams& p,
                                                    const std::vector<double>& flux_grid,
                                                    std::pair<int, int> transition,
                                                    int n_fock = 100);

double transition_frequency(const FluxoniumParams& p, const FluxBias& flux,
                            std::pair<int, int> transition, int n_fock = 100);

struct FluxSlope {
  double value = 0.0;  ///< GHz per Phi0 (cycles; callers apply 2 pi)
  double richardson_gap = 0.0;  ///< |D(h) - D(h/2)|
  Warnings warnings;
};

/// Central difference with step 1e-5 Phi0, Richardson-extrapolated from h and h/2.
FluxSlope flux_slope(const FluxoniumParams& p, const FluxBias& flux,
                     std::pair<int, int> transition = {0, 1}, int n_fock = 100);

}  // namespace phonoflux
