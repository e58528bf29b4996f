#include "phonoflux/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace phonoflux {

void ModeParams::validate() const {
  if (!(omega0 > 0)) throw DomainError("mode frequency must be positive");
  if (!(g >= 0)) throw DomainError("mode coupling must be nonnegative");
}

int JointHamiltonian::qudit_index(int flat) const {
  const int nr = dims.n_readout ? *dims.n_readout : 1;
  return flat / (dims.n_phonon * nr);
}

int JointHamiltonian::phonon_index(int flat) const {
  const int nr = dims.n_readout ? *dims.n_readout : 1;
  return (flat / nr) % dims.n_phonon;
}

int JointHamiltonian::readout_index(int flat) const {
  if (!dims.n_readout) return -1;
  return flat % *dims.n_readout;
}

namespace {

// b - b^dagger in an n-level Fock space (real antisymmetric).
RealMatrix ladder_difference(int n) {
  RealMatrix y = RealMatrix::Zero(n, n);
  for (int m = 0; m + 1 < n; ++m) {
    const double v = std::sqrt(static_cast<double>(m + 1));
    y(m, m + 1) = v;
    y(m + 1, m) = -v;
  }
  return y;
}

}  // namespace

JointHamiltonian build_joint_hamiltonian(const FluxoniumParams& p, const FluxBias& flux,
                                         const ModeParams& mech,
                                         const std::optional<ModeParams>& readout,
                                         const FockSpaceSpec& dims, bool check_convergence) {
  dims.validate();
  mech.validate();
  if (readout) readout->validate();
  if (readout.has_value() != dims.n_readout.has_value()) {
    throw InvalidDimension("readout mode and n_readout must be given together");
  }

  JointHamiltonian joint;
  joint.dims = dims;
  joint.qudit = qudit_spectrum(p, flux, dims.n_qudit_kept, dims.n_qudit_fock, check_convergence);
  joint.warnings = joint.qudit.warnings;

  const int nq = dims.n_qudit_kept;
  const int nm = dims.n_phonon;
  const int nr = dims.n_readout ? *dims.n_readout : 1;
  const int dim = nq * nm * nr;

  joint.bare_energies.resize(dim);
  for (int i = 0; i < dim; ++i) {
    const int j = joint.qudit_index(i);
    const int m = joint.phonon_index(i);
    const int r = dims.n_readout ? joint.readout_index(i) : 0;
    joint.bare_energies(i) = 1000.0 * joint.qudit.energies(j) + mech.omega0 * m +
                             (readout ? readout->omega0 * r : 0.0);
  }
  joint.h = joint.bare_energies.asDiagonal();

  const RealMatrix& a = joint.qudit.charge_generator;
  const RealMatrix id_r = RealMatrix::Identity(nr, nr);
  if (mech.g != 0.0) {
    joint.h += mech.g * tensor_product(tensor_product(a, ladder_difference(nm)), id_r);
  }
  if (readout && readout->g != 0.0) {
    joint.h += readout->g *
               tensor_product(tensor_product(a, RealMatrix::Identity(nm, nm)), ladder_difference(nr));
  }
  return joint;
}

std::string qudit_letter(int level) {
  static const char* kNames[] = {"g", "e", "f", "h"};
  if (level >= 0 && level < 4) return kNames[level];
  if (level >= 4 && level < 4 + 18) return std::string(1, static_cast<char>('i' + (level - 4)));
  return "q" + std::to_string(level);
}

std::string BareLabel::str() const {
  std::string s = qudit_letter(qudit) + std::to_string(phonon);
  if (readout >= 0) s += "," + std::to_string(readout);
  return s;
}

BareLabel parse_label(const std::string& text) {
  if (text.empty()) throw LookupError("empty state label");
  BareLabel out;
  std::size_t pos = 0;
  const char c = text[0];
  if (c == 'g') out.qudit = 0;
  else if (c == 'e') out.qudit = 1;
  else if (c == 'f') out.qudit = 2;
  else if (c == 'h') out.qudit = 3;
  else if (c >= 'i' && c <= 'z') out.qudit = 4 + (c - 'i');
  else throw LookupError("unknown qudit letter in label '" + text + "'");
  pos = 1;
  try {
    std::size_t used = 0;
    out.phonon = std::stoi(text.substr(pos), &used);
    pos += used;
    if (pos < text.size()) {
      if (text[pos] != ',') throw LookupError("malformed label '" + text + "'");
      out.readout = std::stoi(text.substr(pos + 1), &used);
      if (pos + 1 + used != text.size()) throw LookupError("malformed label '" + text + "'");
    }
  } catch (const std::logic_error&) {
    throw LookupError("malformed label '" + text + "'");
  }
  if (out.phonon < 0) throw LookupError("negative phonon number in label '" + text + "'");
  return out;
}

const DressedLevel& DressedSpectrum::find(const BareLabel& label) const {
  for (const auto& lvl : levels) {
    if (lvl.label == label) return lvl;
  }
  throw LookupError("no dressed level labeled " + label.str());
}

int DressedSpectrum::column(const BareLabel& label) const { return find(label).index; }

DressedSpectrum label_dressed_states(const JointHamiltonian& joint) {
  const RealEigenSystem es = symmetric_eigensystem(joint.h);
  const int dim = static_cast<int>(es.values.size());

  DressedSpectrum out;
  out.vectors = es.vectors;
  out.energies = es.values;
  out.levels.reserve(static_cast<std::size_t>(dim));
  std::vector<bool> used(static_cast<std::size_t>(dim), false);

  for (int k = 0; k < dim; ++k) {
    int best = -1;
    double best_w = -1.0;
    double second_w = -1.0;
    for (int b = 0; b < dim; ++b) {
      if (used[static_cast<std::size_t>(b)]) continue;
      const double w = es.vectors(b, k) * es.vectors(b, k);
      if (w > best_w) {
        second_w = best_w;
        best_w = w;
        best = b;
      } else if (w > second_w) {
        second_w = w;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    DressedLevel lvl;
    lvl.index = k;
    lvl.energy = es.values(k) - es.values(0);
    lvl.label = BareLabel{joint.qudit_index(best), joint.phonon_index(best), joint.readout_index(best)};
    lvl.overlap = best_w;
    lvl.hybridized = best_w < kHybridizationThreshold;
    lvl.ambiguous = second_w >= 0 && best_w - second_w < 1e-6;
    out.levels.push_back(lvl);
  }
  return out;
}

std::vector<Transition> transition_table(const DressedSpectrum& spectrum,
                                         const std::vector<std::pair<BareLabel, BareLabel>>& pairs) {
  std::vector<Transition> out;
  out.reserve(pairs.size());
  for (const auto& [from, to] : pairs) {
    const double f = spectrum.find(to).energy - spectrum.find(from).energy;
    out.push_back({from, to, f});
  }
  return out;
}

JcFrequency jc_qubitlike_frequency(double omega_eg0, double omega_m0, double g_eg) {
  const double delta = omega_eg0 - omega_m0;
  JcFrequency out;
  if (delta == 0.0) {
    out.value = omega_m0 + std::abs(g_eg);
    out.branch_ambiguous = true;
    return out;
  }
  const double root = std::sqrt(delta * delta + 4.0 * g_eg * g_eg);
  out.value = 0.5 * (omega_eg0 + omega_m0 + (delta > 0 ? root : -root));
  return out;
}

double jc_tuning_model(const FluxoniumParams& p, double omega_m0, double g_m, double phi_e_over_phi0,
                       int n_fock) {
  const QuditSpectrum s = qudit_spectrum(p, FluxBias{phi_e_over_phi0}, 2, n_fock);
  const double omega_eg0 = 1000.0 * s.energies(1);
  const double g_eg = g_m * s.charge_elements(0, 1);
  return jc_qubitlike_frequency(omega_eg0, omega_m0, g_eg).value;
}

TuningFitResult fit_tuning_spectrum(const std::vector<TuningPeak>& peaks, const TuningFitResult& init,
                                    const TuningFitOptions& options) {
  init.params.validate();
  std::vector<TuningPeak> kept;
  int excluded = 0;
  for (const auto& pk : peaks) {
    const QuditSpectrum s = qudit_spectrum(init.params, FluxBias{pk.phi_e_over_phi0}, 2, options.n_fock);
    const double omega_eg0 = 1000.0 * s.energies(1);
    const double width = options.exclusion_width_factor * init.g_m * s.charge_elements(0, 1);
    bool drop = options.exclude_target_crossing && std::abs(omega_eg0 - init.omega_m0) < width;
    for (double c : options.extra_crossing_centers) drop = drop || std::abs(omega_eg0 - c) < width;
    if (drop) {
      ++excluded;
    } else {
      kept.push_back(pk);
    }
  }
  if (kept.size() < 5) {
    throw ValidationError("fit_tuning_spectrum: fewer than 5 points remain after exclusion");
  }
  const bool below = std::any_of(kept.begin(), kept.end(), [&](const TuningPeak& pk) {
    return pk.freq_mhz < init.omega_m0;
  });
  const bool above = std::any_of(kept.begin(), kept.end(), [&](const TuningPeak& pk) {
    return pk.freq_mhz > init.omega_m0;
  });
  if (!below || !above) {
    throw ValidationError("fit_tuning_spectrum: points must span both sides of the crossing");
  }

  FitProblem problem;
  problem.x.resize(static_cast<Eigen::Index>(kept.size()));
  problem.y.resize(problem.x.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    problem.x(static_cast<Eigen::Index>(i)) = kept[i].phi_e_over_phi0;
    problem.y(static_cast<Eigen::Index>(i)) = kept[i].freq_mhz;
  }
  const int n_fock = options.n_fock;
  // Each peak is compared with the dressed branch nearest to it, so a guess
  // whose bare crossing sits a few points off still converges.
  const RealVector measured = problem.y;
  problem.model = [n_fock, measured](const RealVector& q, const RealVector& x) {
    RealVector y(x.size());
    const FluxoniumParams fp{q(0), q(1), q(2)};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const QuditSpectrum s = qudit_spectrum(fp, FluxBias{x(i)}, 2, n_fock);
      const double w_eg = 1000.0 * s.energies(1);
      const double g_eg = q(4) * s.charge_elements(0, 1);
      const double mean = 0.5 * (w_eg + q(3));
      const double half = 0.5 * std::sqrt((w_eg - q(3)) * (w_eg - q(3)) + 4.0 * g_eg * g_eg);
      y(i) = std::abs(measured(i) - (mean + half)) < std::abs(measured(i) - (mean - half)) ? mean + half
                                                                                            : mean - half;
    }
    return y;
  };
  problem.initial.resize(5);
  problem.initial << init.params.e_c, init.params.e_j, init.params.e_l, init.omega_m0, init.g_m;
  problem.lower = RealVector::Constant(5, 1e-3);
  problem.lower(4) = 0.0;
  problem.upper = RealVector::Constant(5, std::numeric_limits<double>::infinity());
  problem.max_iterations = options.max_iterations;

  const FitOutcome fit = least_squares(problem);
  TuningFitResult out;
  out.params = FluxoniumParams{fit.params(0), fit.params(1), fit.params(2)};
  out.omega_m0 = fit.params(3);
  out.g_m = fit.params(4);
  out.std_errors.assign(fit.std_errors.data(), fit.std_errors.data() + fit.std_errors.size());
  out.residual_rms = fit.residual_rms;
  out.converged = fit.converged;
  out.points_used = static_cast<int>(kept.size());
  out.points_excluded = excluded;
  out.message = fit.message;
  return out;
}

double dispersive_shift_exact(const JointHamiltonian& joint) {
  if (joint.dims.n_qudit_kept < 2 || joint.dims.n_phonon < 2) {
    throw InvalidDimension("dispersive_shift_exact needs at least 2 qudit levels and 2 phonon levels");
  }
  const DressedSpectrum spec = label_dressed_states(joint);
  const int r = joint.dims.n_readout ? 0 : -1;
  const BareLabel g0{0, 0, r}, g1{0, 1, r}, e0{1, 0, r}, e1{1, 1, r};
  for (const BareLabel& lbl : {g0, g1, e0, e1}) {
    const DressedLevel& lvl = spec.find(lbl);
    if (lvl.hybridized) {
      std::ostringstream msg;
      msg << "dressed level " << lbl.str() << " is hybridized (overlap " << lvl.overlap
          << "); dispersive shift undefined";
      throw ResonanceError(msg.str());
    }
  }
  const double w0 = spec.find(e0).energy - spec.find(g0).energy;
  const double w1 = spec.find(e1).energy - spec.find(g1).energy;
  return w1 - w0;
}

PtShift dispersive_shift_pt(const QuditSpectrum& spectrum, double g_m, double omega_m0, int j,
                            int k_max, double min_ratio) {
  const int n = static_cast<int>(spectrum.energies.size());
  if (j < 0 || j >= n || k_max < 0 || k_max >= n) {
    throw InvalidDimension("dispersive_shift_pt: level index outside spectrum");
  }
  PtShift out;
  for (int k = 0; k <= k_max; ++k) {
    if (k == j) continue;
    const double w_kj = 1000.0 * (spectrum.energies(k) - spectrum.energies(j));
    const double g_jk = g_m * spectrum.charge_elements(j, k);
    if (g_jk == 0.0) continue;
    if (std::abs(omega_m0 - std::abs(w_kj)) < min_ratio * g_jk) {
      std::ostringstream msg;
      msg << "transition " << qudit_letter(j) << "-" << qudit_letter(k) << " at " << std::abs(w_kj)
          << " MHz is within " << min_ratio << " g_jk of the mode at " << omega_m0 << " MHz";
      throw ResonanceError(msg.str());
    }
    out.chi_j += g_jk * g_jk * 2.0 * w_kj / (omega_m0 * omega_m0 - w_kj * w_kj);
  }
  return out;
}

PtDispersive dispersive_pair_pt(const QuditSpectrum& spectrum, double g_m, double omega_m0,
                                int k_max, double min_ratio) {
  const double chi_g = dispersive_shift_pt(spectrum, g_m, omega_m0, 0, k_max, min_ratio).chi_j;
  const double chi_e = dispersive_shift_pt(spectrum, g_m, omega_m0, 1, k_max, min_ratio).chi_j;
  return {chi_e - chi_g, 0.5 * (chi_e + chi_g)};
}

}  // namespace phonoflux
