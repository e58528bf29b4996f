#pragma once

// Joint qudit-mechanics(-readout) Hamiltonian in MHz, dressed-state labels,
// Jaynes-Cummings tuning fits and dispersive shifts.
//
// Dispersive-shift sign: 2chi = omega_eg(n=1) - omega_eg(n=0), i.e. the change
// of the qubit-like transition per added phonon, equal to chi_e - chi_g of the
// perturbative expression.  Every module uses this one definition.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phonoflux/fit.hpp"
#include "phonoflux/fluxonium.hpp"

namespace phonoflux {

struct ModeParams {
  double omega0 = 691.75;  ///< MHz
  double g = 66.6;         ///< MHz, charge coupling

  void validate() const;
};

struct JointHamiltonian {
  RealMatrix h;                 ///< MHz, real symmetric, bare product basis
  FockSpaceSpec dims;
  QuditSpectrum qudit;          ///< kept qudit levels (GHz)
  RealVector bare_energies;     ///< MHz, diagonal of the uncoupled part
  Warnings warnings;

  OperatorMatrix matrix() const { return h.cast<Complex>(); }
  int qudit_index(int flat) const;
  int phonon_index(int flat) const;
  int readout_index(int flat) const;  ///< -1 without a readout mode
};

/// H = sum_j w_j |j><j| + w_m b^dag b - i g_m n (b - b^dag) [+ readout term]
/// with the qudit pre-diagonalized in n_qudit_fock and truncated to
/// n_qudit_kept levels.  Since n = i A in the qudit eigenbasis the coupling
/// becomes g_m A (x) (b - b^dag) and the matrix is real.
JointHamiltonian build_joint_hamiltonian(const FluxoniumParams& p, const FluxBias& flux,
                                         const ModeParams& mech,
                                         const std::optional<ModeParams>& readout,
                                         const FockSpaceSpec& dims,
                                         bool check_convergence = false);

/// Letter for qudit level j: g, e, f, h, then i, j, ...
std::string qudit_letter(int level);

struct BareLabel {
  int qudit = 0;
  int phonon = 0;
  int readout = -1;

  std::string str() const;
  bool operator==(const BareLabel& o) const {
    return qudit == o.qudit && phonon == o.phonon && readout == o.readout;
  }
};

/// Parse "g0", "e1", "f2", "g0,1" (readout) into a label.
BareLabel parse_label(const std::string& text);

struct DressedLevel {
  int index = 0;            ///< position in ascending energy
  double energy = 0.0;      ///< MHz, relative to the lowest level
  BareLabel label;
  double overlap = 0.0;     ///< squared amplitude on the assigned bare state
  bool hybridized = false;  ///< overlap below kHybridizationThreshold
  bool ambiguous = false;   ///< runner-up within 1e-6 of the chosen overlap
};

inline constexpr double kHybridizationThreshold = 0.6;

struct DressedSpectrum {
  std::vector<DressedLevel> levels;
  RealMatrix vectors;  ///< eigenvectors (columns) in the bare product basis
  RealVector energies; ///< MHz, absolute eigenvalues

  const DressedLevel& find(const BareLabel& label) const;  ///< LookupError if absent
  /// Column of `vectors` holding the dressed state with this label.
  int column(const BareLabel& label) const;
};

DressedSpectrum label_dressed_states(const JointHamiltonian& joint);

struct Transition {
  BareLabel from;
  BareLabel to;
  double frequency = 0.0;  ///< MHz, E(to) - E(from)
};

std::vector<Transition> transition_table(const DressedSpectrum& spectrum,
                                         const std::vector<std::pair<BareLabel, BareLabel>>& pairs);

struct JcFrequency {
  double value = 0.0;  ///< MHz
  bool branch_ambiguous = false;
};

/// (omega_eg0 + omega_m0 + sgn(delta0) sqrt(delta0^2 + 4 g_eg^2)) / 2; the
/// upper branch is taken at delta0 == 0 and flagged.
JcFrequency jc_qubitlike_frequency(double omega_eg0, double omega_m0, double g_eg);

struct TuningFitResult {
  FluxoniumParams params;
  double omega_m0 = 691.75;  ///< MHz
  double g_m = 66.6;         ///< MHz
  /// Standard errors in the order (E_C, E_J, E_L, omega_m0, g_m).
  std::vector<double> std_errors;
  double residual_rms = 0.0;  ///< MHz
  bool converged = false;
  int points_used = 0;
  int points_excluded = 0;
  std::string message;
};

struct TuningPeak {
  double phi_e_over_phi0 = 0.0;
  double freq_mhz = 0.0;
};

struct TuningFitOptions {
  int n_fock = 100;
  /// Extra crossing centers (MHz) from modes outside the model; points whose
  /// bare qubit frequency lies within exclusion_width_factor * g_eg of these
  /// or of omega_m0 are dropped before fitting.
  std::vector<double> extra_crossing_centers;
  double exclusion_width_factor = 3.0;
  bool exclude_target_crossing = true;
  int max_iterations = 100;
};

/// Least-squares fit of the two-level JC spectrum with omega_eg0(phi_e) and
/// g_eg = g_m |<g|n|e>| from the bare fluxonium model.  Each peak is matched
/// to whichever dressed branch is nearer.
TuningFitResult fit_tuning_spectrum(const std::vector<TuningPeak>& peaks,
                                    const TuningFitResult& init,
                                    const TuningFitOptions& options = {});

/// Model used by fit_tuning_spectrum, exposed for synthesis and overlays.
double jc_tuning_model(const FluxoniumParams& p, double omega_m0, double g_m, double phi_e_over_phi0,
                       int n_fock = 100);

/// 2chi from exact diagonalization (MHz).  Throws ResonanceError when any of
/// g0, g1, e0, e1 is hybridized.
double dispersive_shift_exact(const JointHamiltonian& joint);

struct PtShift {
  double chi_j = 0.0;  ///< MHz, frequency shift of the mode given qudit level j
};

/// chi_{m,j} = sum_{k != j, k <= k_max} |g_jk|^2 2 w_kj / (w_m0^2 - w_kj^2),
/// g_jk = g_m <j|n|k>.  Transitions with |w_m0 - w_kj| < min_ratio |g_jk| raise
/// ResonanceError naming the transition.
PtShift dispersive_shift_pt(const QuditSpectrum& spectrum, double g_m, double omega_m0, int j,
                            int k_max, double min_ratio = 5.0);

struct PtDispersive {
  double two_chi = 0.0;       ///< chi_e - chi_g, MHz
  double vacuum_shift = 0.0;  ///< (chi_e + chi_g) / 2, MHz
};

PtDispersive dispersive_pair_pt(const QuditSpectrum& spectrum, double g_m, double omega_m0,
                                int k_max, double min_ratio = 5.0);

}  // namespace phonoflux
