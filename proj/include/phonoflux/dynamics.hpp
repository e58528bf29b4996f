#pragma once

// Lindblad dynamics of the qudit-mechanics system under flux modulation,
// and the simulated experiments built on it (Rabi amplitude sweep, two-swap
// T1m / T2m sequences).
//
// Units: times in us for rates and delays, ns for pulses; Hamiltonians in
// MHz (cycles); collapse operators carry sqrt(rate in 1/us).

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phonoflux/coupled.hpp"
#include "phonoflux/pulses.hpp"

namespace phonoflux {

struct RateSet {
  double t1m = 0.85;     ///< us
  double n_th_m = 0.57;
  double t1q = 3.57;     ///< us
  double n_th_q = 0.0;
  double t_phi_q = 0.346;  ///< us

  void validate() const;
};

struct CollapseRates {
  double kappa_m_down = 0.0;  ///< 1/us
  double kappa_m_up = 0.0;
  double kappa_q_down = 0.0;
  double kappa_q_up = 0.0;
  double gamma_phi = 0.0;     ///< 2 / T_phi
};

/// kappa_down = ((1 + n)/(1 + 2n)) / T1, kappa_up = (n/(1 + 2n)) / T1.
CollapseRates collapse_rates(const RateSet& r);

/// sqrt(k_m_down) b, sqrt(k_m_up) b^dag, sqrt(k_q_down)|g><e|,
/// sqrt(k_q_up)|e><g|, sqrt(2/T_phi)|e><e| in the bare product basis
/// (qudit eigenbasis (x) Fock).  Readout, if present, is left untouched.
std::vector<OperatorMatrix> collapse_ops_from_rates(const RateSet& r, const FockSpaceSpec& dims);

struct LindbladModel {
  OperatorMatrix h0;              ///< MHz
  OperatorMatrix drive_operator;  ///< MHz per unit drive; empty for no drive
  std::function<double(double t_us)> drive;
  std::vector<OperatorMatrix> collapse_ops;  ///< sqrt(1/us) * operator
  /// Upper bound on |drive(t)| * ||drive_operator|| in MHz, used only for
  /// choosing the step.
  double drive_bound_mhz = 0.0;

  void validate() const;
};

struct IntegrationOptions {
  double points_per_fastest_period = 400.0;
  double max_step_us = 0.0;  ///< 0 means no extra cap
};

struct LindbladTrajectory {
  std::vector<double> times;  ///< us
  std::vector<DensityMatrix> states;
  double step_us = 0.0;
  long steps = 0;
  double max_trace_error = 0.0;
  double max_hermiticity_defect = 0.0;
};

/// Dense fixed-step RK4 in the lab frame for an arbitrary model.  Step is
/// 1/(points_per_fastest_period * f_max), f_max the spread of h0 plus the
/// drive bound.  States are Hermitian-symmetrized after every step.
LindbladTrajectory integrate_lindblad(const LindbladModel& model, const DensityMatrix& rho0,
                                      const std::vector<double>& t_grid_us,
                                      const IntegrationOptions& options = {});

/// Setup shared by all simulated experiments.
struct SimulationSetup {
  FluxoniumParams qudit;
  double flux = 0.4726;  ///< Phi_e / Phi0 static bias
  ModeParams mech;
  FockSpaceSpec dims{100, 6, 10, std::nullopt};
  RateSet rates;
  double t_eff_mk = 33.0;
  double step_ns = 0.1;  ///< split-step size target during pulses
  double free_step_ns = 0.1;  ///< split-step size during free delays

  void validate() const;
};

struct Populations {
  std::vector<double> qudit;   ///< marginal per qudit label
  std::vector<double> phonon;  ///< marginal per phonon label
  double p_g() const { return qudit.at(0); }
  double p_e() const { return qudit.at(1); }
  double asymmetry() const { return p_e() - p_g(); }
};

/// |(P(e) - P(g))_final - (P(e) - P(g))_initial|.
double readout_signal(const Populations& final_pop, const Populations& initial_pop);

/// Planar density matrix used by the structured engines.
struct PlanarState {
  int dim = 0;
  std::vector<double> re;
  std::vector<double> im;

  static PlanarState from(const DensityMatrix& rho);
  DensityMatrix to_density() const;
  double trace() const;
};

/// Which integrator advances the state through a modulation pulse.
enum class PulseIntegrator {
  SplitStep,  ///< exact-exponential (4th-order Magnus) unitary + dissipator substeps
  Rk4         ///< lab-frame RK4 on the full Lindblad right-hand side
};

class JointSimulator {
 public:
  explicit JointSimulator(const SimulationSetup& setup);

  const SimulationSetup& setup() const { return setup_; }
  const JointHamiltonian& joint() const { return joint_; }
  const DressedSpectrum& dressed() const { return dressed_; }
  const CollapseRates& rates() const { return rates_; }
  int dim() const { return dim_; }

  /// Joint Gibbs state at t_eff from the dressed energies.
  DensityMatrix thermal_state() const;
  /// Sum_n (|e n><g n| + h.c.) on dressed states, identity elsewhere.
  OperatorMatrix ideal_pi_pulse() const;
  /// exp(-i pi/4 X) on each dressed (g n, e n) pair, identity elsewhere.
  OperatorMatrix ideal_half_pi_pulse() const;
  static DensityMatrix apply_unitary(const OperatorMatrix& u, const DensityMatrix& rho);

  /// Marginals over dressed labels.
  Populations populations(const DensityMatrix& rho) const;
  Populations populations(const PlanarState& rho) const;

  /// Drive term in MHz per Phi0 of flux: E_L * 2 pi * theta in the kept basis.
  const RealMatrix& drive_operator() const { return drive_; }

  PlanarState run_pulse(const ModulationPulse& pulse, const PlanarState& rho,
                        PulseIntegrator integrator = PulseIntegrator::SplitStep,
                        double step_ns = 0.0) const;
  PlanarState free_evolution(const PlanarState& rho, double duration_us) const;

  /// Largest Bohr frequency of the static Hamiltonian plus the drive bound (MHz).
  double max_frequency_mhz(const ModulationPulse& pulse) const;

  /// Lindblad right-hand side (angular units, 1/us) at drive flux `flux_phi0`.
  void rhs(double flux_phi0, const PlanarState& rho, PlanarState& out) const;

  /// Generic model equivalent to this simulator (for cross-checks).
  LindbladModel lindblad_model(const ModulationPulse& pulse) const;

 private:
  struct Unitary;
  struct FactorTable;
  void exact_factor(double sigma, double h_us, std::vector<double>& re, std::vector<double>& im) const;
  std::unique_ptr<FactorTable> factor_table(double sigma_max, double h_ns) const;
  void table_factor(const FactorTable& t, double sigma, std::vector<double>& re, std::vector<double>& im) const;
  Unitary step_unitary(const ModulationPulse& pulse, double t0_ns, double h_ns,
                       const FactorTable* table = nullptr) const;
  void apply_step(const Unitary& u, PlanarState& rho, PlanarState& scratch) const;
  void dissipate(PlanarState& rho, double h_us) const;
  void dissipator_rhs(const PlanarState& rho, PlanarState& out, bool coherent = false,
                      double flux_phi0 = 0.0) const;
  void symmetrize(PlanarState& rho) const;

  SimulationSetup setup_;
  JointHamiltonian joint_;
  DressedSpectrum dressed_;
  CollapseRates rates_;
  int dim_ = 0;
  int nq_ = 0;
  int nm_ = 0;
  RealMatrix drive_;       // MHz per Phi0
  RealMatrix drive_qudit_; // nq x nq, MHz per Phi0
  double drive_norm_ = 0.0;  // spectral norm of drive_
  // Structured pieces of the right-hand side, angular units.
  std::vector<double> diag_energy_;  // 2 pi (h_a - h_b)
  std::vector<double> diag_drive_;   // 2 pi (p_a - p_b) per Phi0
  std::vector<double> diag_decay_;   // -(K_a + K_b) / 2
  std::vector<double> zeros_;
  std::vector<double> jump_down_;    // sqrt((m+1)(m'+1)), zero on the top level
  std::vector<double> jump_up_;      // sqrt(m m')
  RealMatrix ladder_;                // b - b^dag, nm x nm
};

/// One (v0, f_mod) grid point of a Rabi amplitude sweep.
struct RabiPoint {
  double v0 = 0.0;
  double f_mod = 0.0;
  double signal = 0.0;
  double p_g = 0.0;
  double p_e = 0.0;
  std::vector<double> p_phonon;
};

struct RabiRidge {
  std::vector<double> v0;     ///< rows with a resolvable ridge
  std::vector<double> f_mod;  ///< ridge center (MHz)
  double slope = 0.0;         ///< MHz per mVpp from a straight-line fit
  int increases = 0;          ///< consecutive increases of the center
  int decreases = 0;
  bool bends_up() const { return slope > 0 && increases >= decreases; }
};

struct RabiMap {
  std::vector<double> v0_grid;
  std::vector<double> f_mod_grid;
  std::vector<RabiPoint> points;  ///< index v0 * n_f + f
  const RabiPoint& at(std::size_t i_v0, std::size_t i_f) const {
    return points.at(i_v0 * f_mod_grid.size() + i_f);
  }
};

struct RabiSweepOptions {
  int jobs = 1;
  PulseIntegrator integrator = PulseIntegrator::SplitStep;
};

/// Thermal state -> ideal pi pulse -> modulation pulse, for every grid
/// point.  Grid points run on `jobs` threads; results are stored by index.
RabiMap rabi_amplitude_sweep(const JointSimulator& sim, const ModulationPulse& pulse_template,
                             const std::vector<double>& v0_grid,
                             const std::vector<double>& f_mod_grid,
                             const RabiSweepOptions& options = {});

/// Ridge center per amplitude row, restricted to rows up to the first
/// signal maximum (the first fringe) and above `min_signal`.
RabiRidge rabi_ridge(const RabiMap& map, double min_signal = 0.05);

struct AmplitudeCut {
  double v0_at_max_signal = 0.0;
  double max_signal = 0.0;
  double p1_at_max_signal = 0.0;
  double v0_at_max_p1 = 0.0;
  double max_p1 = 0.0;
};

/// Summary along one f_mod column.
AmplitudeCut amplitude_cut(const RabiMap& map, std::size_t i_f);

enum class SwapPrep { Pi, HalfPi };
enum class SwapRecovery { Identity, HalfPi };

struct SwapTrace {
  std::vector<double> delays_us;
  std::vector<double> phases;
  std::vector<double> p_e;        ///< phase-averaged
  std::vector<double> p_g;
  std::vector<double> signal;     ///< |<asym>_phases - asym after prep|
  std::vector<std::vector<double>> asym_per_phase;  ///< [delay][phase]
  std::vector<std::vector<double>> p_phonon;        ///< phase-averaged [delay][n]
};

struct SwapOptions {
  SwapPrep prep = SwapPrep::Pi;
  SwapRecovery recovery = SwapRecovery::Identity;
  std::vector<double> phases{0.0, constants::kPi / 2, constants::kPi, 3 * constants::kPi / 2};
  int jobs = 1;
};

/// thermal -> prep -> swap(theta = 0) -> delay -> swap(theta = phase) ->
/// recovery.  Delays must be ascending; the free evolution is shared.
SwapTrace swap_sequence(const JointSimulator& sim, const ModulationPulse& pulse,
                        const std::vector<double>& delays_us, const SwapOptions& options = {});

}  // namespace phonoflux
