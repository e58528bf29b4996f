#pragma once

// Lumped-circuit reduction: Maxwell capacitance networks with junction and
// inductor edges, conserved-charge elimination of floating islands, and the
// charging energies / coupling ratios of the remaining coordinates.
// Capacitances in fF, inductances in uH, energies in GHz.

#include <optional>
#include <string>
#include <vector>

#include "phonoflux/core.hpp"

namespace phonoflux {

enum class PotentialKind { Junction, Inductor };

struct PotentialEdge {
  int a = 0;  ///< coordinate index, 1-based; 0 is ground
  int b = 0;
  PotentialKind kind = PotentialKind::Inductor;
  double energy = 0.0;  ///< GHz (E_J or E_L)
};

class CapacitanceNetwork {
 public:
  /// Empty network with n_nodes nodes including ground (node 0).
  explicit CapacitanceNetwork(int n_nodes);

  void add_capacitor(int a, int b, double c_ff);
  void add_potential(int a, int b, PotentialKind kind, double energy_ghz);

  int coordinate_count() const { return static_cast<int>(cap_.rows()); }
  int original_node_count() const { return static_cast<int>(node_map_.rows()); }
  /// Non-ground Maxwell block over the current coordinates (fF).
  const RealMatrix& capacitance() const { return cap_; }
  /// Full Maxwell matrix including the ground row/column (only meaningful
  /// before any elimination).
  RealMatrix maxwell() const;
  const std::vector<PotentialEdge>& potentials() const { return potentials_; }
  const std::vector<std::string>& names() const { return names_; }

  /// Expression of the original node flux Phi_node in current coordinates.
  /// `floating` collects coefficients of eliminated reference fluxes; two
  /// node fluxes can only be differenced when their floating parts agree.
  RealVector node_expression(int node) const { return node_map_.row(node).transpose(); }
  const std::vector<double>& node_floating(int node) const { return floating_[node]; }

  /// Structural checks: symmetric, diagonally dominant Maxwell form,
  /// positive definite.  Throws ValidationError.
  void validate() const;

  double kinetic_energy(const RealVector& velocities) const {
    return 0.5 * velocities.dot(cap_ * velocities);
  }

 private:
  friend CapacitanceNetwork eliminate_free_node(const CapacitanceNetwork&, const std::vector<int>&);

  RealMatrix cap_;
  RealVector ground_cap_;  // capacitance to ground per coordinate, for maxwell()
  std::vector<PotentialEdge> potentials_;
  std::vector<std::string> names_;
  RealMatrix node_map_;  // original nodes x current coordinates
  std::vector<std::vector<double>> floating_;
};

/// Eliminate a floating island (coordinate indices, 1-based) through its
/// conserved charge.  The lowest index becomes the island reference: other
/// members are re-expressed relative to it, and the reference flux is
/// removed by a Schur complement (zero island charge).  Potential edges to
/// the reference become edges to ground.
CapacitanceNetwork eliminate_free_node(const CapacitanceNetwork& net, const std::vector<int>& subgraph);

/// Every connected component of the potential-edge graph that does not
/// contain ground is an island.  Returns them as 1-based coordinate lists.
std::vector<std::vector<int>> find_free_islands(const CapacitanceNetwork& net);

struct CoordinateDef {
  std::string name;
  int node_a = 0;  ///< original node numbers
  int node_b = 0;
};

struct ReducedCircuit {
  std::vector<std::string> coordinates;
  RealMatrix inv_cap;            ///< 1/fF
  RealVector charging_energy;    ///< GHz, e^2/2h (C^-1)_ii
  RealVector inductive_energy;   ///< GHz per coordinate (0 when none)
  RealVector junction_energy;    ///< GHz per coordinate (0 when none)
  double e_c = 0.0;              ///< charging energy of the first coordinate
  double beta_qm = 0.0;          ///< first-second coordinate ratio
  double beta_qr = 0.0;          ///< first-third coordinate ratio (0 if absent)

  double beta(int i, int j) const;
  /// sqrt(8 E_C E_L) for a coordinate with only inductive potential (GHz);
  /// nullopt otherwise.
  std::optional<double> harmonic_frequency(int i) const;
  /// g_i = 2 beta_{0i} sqrt(f_i E_C) in the units of f_i (E_C converted).
  double coupling(int i, double mode_freq_mhz) const;
};

/// Legendre transform onto user-defined coordinates theta_i = Phi_a - Phi_b.
/// The number of definitions must equal the coordinate count.
ReducedCircuit reduce_to_dynamical(const CapacitanceNetwork& net,
                                   const std::vector<CoordinateDef>& coordinate_defs);

/// e^2 / (2 h C) in GHz for C in fF.
double charging_energy_ghz(double capacitance_ff);

/// Upper bound on the qubit-mode exchange rate for any charge element:
/// g_eg <= beta sqrt(f_m f_eg) / 2 (all frequencies in one unit).
double coupling_bound(double beta, double f_m, double f_eg);

/// beta = sqrt((8/pi^2) K^2 / (1 - (1 - 8/pi^2) K^2)).
double ideal_beta_from_k2(double k_squared);
double k2_from_ideal_beta(double beta);
/// K^2 from the ratio C_in / (C_1 + C_in), which equals beta_ideal^2.
double k2_from_capacitances(double c_in_ff, double c1_ff);

struct LcParams {
  double c_in = 1.45;  ///< fF
  double c1 = 9.42;    ///< fF
  double l1 = 5.21;    ///< uH
};

struct BvdParams {
  double c0 = 1.26;   ///< fF
  double c_m = 0.193; ///< fF
  double l_m = 293.0; ///< uH
};

/// Exact two-element equivalence: the input admittance of C_in in series
/// with (C_1 || L_1) equals that of C_0 in parallel with series (C_m, L_m),
/// sharing pole and zero frequencies and the static capacitance.
BvdParams lc_to_bvd(const LcParams& lc);
LcParams bvd_to_lc(const BvdParams& bvd);
double bvd_k_squared(const BvdParams& bvd);
double lc_k_squared(const LcParams& lc);
/// Series resonance 1/(2 pi sqrt(L_m C_m)) in MHz.
double bvd_series_frequency_mhz(const BvdParams& bvd);
/// Parallel resonance of the LC form 1/(2 pi sqrt(L_1 C_1)) in MHz.
double lc_parallel_frequency_mhz(const LcParams& lc);

struct NetworkFile {
  CapacitanceNetwork network{1};
  std::vector<CoordinateDef> coordinates;
};

/// Parse the plain-text network format:
///   [capacitance]   node_a node_b value_fF
///   [potential]     node_a node_b junction|inductor energy_GHz
///   [coordinates]   name node_a node_b        (optional)
/// Comments start with '#'.  Node count is inferred.
NetworkFile parse_network(const std::string& text);

}  // namespace phonoflux
