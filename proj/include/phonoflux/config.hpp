#pragma once

// INI run configuration.  Every key is known in advance; unknown sections or
// keys are errors so a typo cannot silently fall back to a default.

#include <cstdint>
#include <map>
#include <string>

#include "phonoflux/decoherence.hpp"
#include "phonoflux/dynamics.hpp"

namespace phonoflux {

struct RunConfig {
  FluxoniumParams qudit;
  ModeParams mech;
  double flux = 0.4726;  ///< Phi0
  FockSpaceSpec dims{100, 6, 10, std::nullopt};
  RateSet rates;
  bool n_th_q_auto = true;  ///< derive n_th_q from t_eff at the qubit frequency
  double t_eff_mk = 33.0;
  ModulationPulse pulse;
  double step_ns = 0.1;
  double free_step_ns = 0.1;
  OneOverFNoise noise;
  CoherenceTimes coherence;
  double two_chi_mhz = 1.67;  ///< measured 2chi used for cooperativities
  std::map<std::string, std::string> paths;
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  int jobs = 1;

  /// Device values of the measured sample.
  static RunConfig defaults();
  /// Parses on top of the defaults.  `origin` names the source in errors.
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);

  /// Simulation setup with n_th_q resolved.
  SimulationSetup simulation_setup() const;
  /// Resolved parameters, one `section.key = value` per line.
  std::string describe() const;
  /// INI text that parses back to this configuration.
  std::string to_ini() const;
};

}  // namespace phonoflux
