// phonoflux command-line front end.
//
// Exit codes: 0 success, 1 physics or fit failure, 2 usage error (bad
// arguments, unreadable or malformed input files and configs).

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phonoflux/circuit.hpp"
#include "phonoflux/config.hpp"
#include "phonoflux/coupled.hpp"
#include "phonoflux/decoherence.hpp"
#include "phonoflux/dynamics.hpp"
#include "phonoflux/io.hpp"
#include "phonoflux/kernels/kernels.hpp"
#include "phonoflux/spectra.hpp"

using namespace phonoflux;
using Json = nlohmann::ordered_json;

namespace {

// Raised for problems with the invocation or its inputs (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  bool dry_run = false;
  int jobs = 0;
  long long seed = -1;
};

RunConfig load_config(const Globals& g) {
  RunConfig c;
  try {
    c = g.config_path.empty() ? RunConfig::defaults() : RunConfig::load(g.config_path);
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (g.jobs > 0) c.jobs = g.jobs;
  if (g.seed >= 0) c.seed = static_cast<std::uint64_t>(g.seed);
  return c;
}

std::string load_text(const std::string& path) {
  try {
    return read_text_file(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

CsvTable load_csv(const std::string& path) {
  try {
    return read_csv(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> column(const CsvTable& t, const std::string& name, const std::string& path) {
  try {
    return t.column_values(name);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// A dry run reports an unset input instead of refusing.
std::string input_path(const std::string& flag_value, const RunConfig& c, const std::string& key,
                       bool dry_run) {
  if (!flag_value.empty()) return flag_value;
  const auto it = c.paths.find(key);
  if (it != c.paths.end()) return it->second;
  if (dry_run) return "(unset)";
  throw UsageError("no input file: pass --input or set paths." + key + " in the config");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    try {
      write_text_file(path, text);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
}

std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw UsageError("grid needs at least one point");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number in list: '" + item + "'");
    }
  }
  return out;
}

Json warnings_json(const Warnings& w) {
  Json a = Json::array();
  for (const auto& s : w) a.push_back(s);
  return a;
}

void print_dry_run(const RunConfig& c, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::cout << c.describe();
  for (const auto& [k, v] : extra) std::cout << k << " = " << v << '\n';
}

// ---------------------------------------------------------------- spectrum

struct SpectrumArgs {
  double flux_min = 0.44, flux_max = 0.5;
  int flux_n = 121;
  int levels = 4;
  bool joint = false;
  double g_m = -1.0;
  std::string output;
};

void run_spectrum(const Globals& g, const SpectrumArgs& a) {
  RunConfig c = load_config(g);
  if (a.g_m >= 0) c.mech.g = a.g_m;
  const auto grid = linspace(a.flux_min, a.flux_max, a.flux_n);
  if (g.dry_run) {
    print_dry_run(c, {{"spectrum.flux_grid", format_number(a.flux_min) + ".." + format_number(a.flux_max) + " (" +
                                                   std::to_string(a.flux_n) + ")"},
                      {"spectrum.levels", std::to_string(a.levels)},
                      {"spectrum.joint", a.joint ? "true" : "false"}});
    return;
  }
  if (a.levels < 2) throw UsageError("--levels must be >= 2");
  CsvTable t;
  t.header.push_back("flux_phi0");
  for (int k = 1; k < a.levels; ++k) t.header.push_back("f_g" + qudit_letter(k) + "_mhz");
  if (a.joint) {
    t.header.insert(t.header.end(), {"e0_mhz", "g1_mhz", "e1_mhz", "two_chi_mhz"});
  }
  for (double phi : grid) {
    std::vector<double> row{phi};
    const QuditSpectrum s = qudit_spectrum(c.qudit, FluxBias{phi}, std::max(a.levels, 2), c.dims.n_qudit_fock);
    for (int k = 1; k < a.levels; ++k) row.push_back(1000.0 * s.energies(k));
    if (a.joint) {
      const JointHamiltonian j = build_joint_hamiltonian(c.qudit, FluxBias{phi}, c.mech, std::nullopt, c.dims);
      const DressedSpectrum d = label_dressed_states(j);
      const double g0 = d.find(BareLabel{0, 0}).energy;
      const double e0 = d.find(BareLabel{1, 0}).energy - g0;
      const double g1 = d.find(BareLabel{0, 1}).energy - g0;
      const double e1 = d.find(BareLabel{1, 1}).energy - g0;
      row.insert(row.end(), {e0, g1, e1, (e1 - g1) - e0});
    }
    t.rows.push_back(std::move(row));
  }
  emit(a.output, t.to_string());
}

// ------------------------------------------------------------- fit-tuning

struct FitTuningArgs {
  std::string input, output;
  std::string exclude;
};

void run_fit_tuning(const Globals& g, const FitTuningArgs& a) {
  RunConfig c = load_config(g);
  const std::string path = input_path(a.input, c, "peaks", g.dry_run);
  if (g.dry_run) {
    print_dry_run(c, {{"fit-tuning.input", path}, {"fit-tuning.exclude", a.exclude}});
    return;
  }
  const CsvTable t = load_csv(path);
  const auto flux = column(t, "flux_phi0", path);
  const auto freq = column(t, "freq_mhz", path);
  std::vector<TuningPeak> peaks;
  for (std::size_t i = 0; i < flux.size(); ++i) peaks.push_back({flux[i], freq[i]});
  TuningFitResult init;
  init.params = c.qudit;
  init.omega_m0 = c.mech.omega0;
  init.g_m = c.mech.g;
  TuningFitOptions opt;
  opt.n_fock = c.dims.n_qudit_fock;
  if (!a.exclude.empty()) opt.extra_crossing_centers = parse_list(a.exclude);
  const TuningFitResult r = fit_tuning_spectrum(peaks, init, opt);
  Json j;
  j["e_c_ghz"] = r.params.e_c;
  j["e_j_ghz"] = r.params.e_j;
  j["e_l_ghz"] = r.params.e_l;
  j["omega_m0_mhz"] = r.omega_m0;
  j["g_m_mhz"] = r.g_m;
  j["std_errors"] = {{"e_c_ghz", r.std_errors.at(0)}, {"e_j_ghz", r.std_errors.at(1)},
                     {"e_l_ghz", r.std_errors.at(2)}, {"omega_m0_mhz", r.std_errors.at(3)},
                     {"g_m_mhz", r.std_errors.at(4)}};
  j["residual_rms_mhz"] = r.residual_rms;
  j["converged"] = r.converged;
  j["points_used"] = r.points_used;
  j["points_excluded"] = r.points_excluded;
  j["message"] = r.message;
  emit(a.output, json_text(j));
  if (!r.converged) throw ValidationError("fit-tuning: fit did not converge: " + r.message);
}

// -------------------------------------------------------------------- chi

struct ChiArgs {
  double flux = std::nan("");
  double flux_min = 0.47, flux_max = 0.478;
  int flux_n = 17;
  std::string output;
};

Json chi_point(const RunConfig& c, double phi) {
  Json j;
  j["flux_phi0"] = phi;
  const JointHamiltonian h = build_joint_hamiltonian(c.qudit, FluxBias{phi}, c.mech, std::nullopt, c.dims);
  j["two_chi_exact_mhz"] = dispersive_shift_exact(h);
  const QuditSpectrum s = qudit_spectrum(c.qudit, FluxBias{phi}, c.dims.n_qudit_kept, c.dims.n_qudit_fock);
  j["f_eg_bare_mhz"] = 1000.0 * s.energies(1);
  for (auto [name, k_max] : {std::pair<const char*, int>{"two_chi_pt_f_mhz", 2}, {"two_chi_pt_e_mhz", 1}}) {
    try {
      j[name] = dispersive_pair_pt(s, c.mech.g, c.mech.omega0, k_max).two_chi;
    } catch (const ResonanceError& e) {
      j[name] = nullptr;
      j["warnings"].push_back(e.what());
    }
  }
  return j;
}

void run_chi(const Globals& g, const ChiArgs& a) {
  RunConfig c = load_config(g);
  const bool single = std::isfinite(a.flux);
  if (g.dry_run) {
    print_dry_run(c, {{"chi.flux", single ? format_number(a.flux)
                                          : format_number(a.flux_min) + ".." + format_number(a.flux_max) + " (" +
                                                std::to_string(a.flux_n) + ")"}});
    return;
  }
  if (single) {
    emit(a.output, json_text(chi_point(c, a.flux)));
    return;
  }
  CsvTable t;
  t.header = {"flux_phi0", "f_eg_bare_mhz", "two_chi_exact_mhz", "two_chi_pt_f_mhz", "two_chi_pt_e_mhz"};
  for (double phi : linspace(a.flux_min, a.flux_max, a.flux_n)) {
    const Json j = chi_point(c, phi);
    auto num = [&](const char* k) { return j[k].is_null() ? std::nan("") : j[k].get<double>(); };
    t.rows.push_back({phi, num("f_eg_bare_mhz"), num("two_chi_exact_mhz"), num("two_chi_pt_f_mhz"),
                      num("two_chi_pt_e_mhz")});
  }
  emit(a.output, t.to_string());
}

// ------------------------------------------------------------ numbersplit

struct SynthArgs {
  double f_eg = 0.0, two_chi = 2.23, n_bar = 0.57, alpha_sq = 1.5;
  double sigma = 0.3, gamma = 0.15;
  int n_max = 12;
  double f_min = std::nan(""), f_max = std::nan("");
  int points = 801;
  double noise = 0.0;
  int traces = 1;
  int drift_steps = 0;
  std::string output;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  RunConfig c = load_config(g);
  const double lo = std::isfinite(a.f_min) ? a.f_min : a.f_eg - a.n_max * a.two_chi - 3.0;
  const double hi = std::isfinite(a.f_max) ? a.f_max : a.f_eg + 3.0;
  if (g.dry_run) {
    print_dry_run(c, {{"synth.f_eg_mhz", format_number(a.f_eg)},
                      {"synth.two_chi_mhz", format_number(a.two_chi)},
                      {"synth.n_bar", format_number(a.n_bar)},
                      {"synth.alpha_sq", format_number(a.alpha_sq)},
                      {"synth.grid_mhz", format_number(lo) + ".." + format_number(hi) + " (" +
                                             std::to_string(a.points) + ")"},
                      {"synth.noise", format_number(a.noise)},
                      {"synth.traces", std::to_string(a.traces)}});
    return;
  }
  if (a.traces < 1) throw UsageError("--traces must be >= 1");
  const auto grid = linspace(lo, hi, a.points);
  const auto p = PhononDistribution::model(a.n_bar, a.alpha_sq, a.n_max + 1);
  const SpectrumTrace clean = synth_number_splitting(a.f_eg, a.two_chi, p, {PeakWidths{a.sigma, a.gamma}}, grid);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  CsvTable t;
  t.header = {"freq_mhz", "amplitude"};
  if (a.traces > 1) t.header.push_back("trace_index");
  const long m = static_cast<long>(grid.size());
  for (int k = 0; k < a.traces; ++k) {
    const long shift = static_cast<long>(k) * a.drift_steps;
    for (long i = 0; i < m; ++i) {
      const long src = i - shift;
      double v = src >= 0 && src < m ? clean.amplitude[static_cast<std::size_t>(src)] : 0.0;
      if (a.noise > 0) v += a.noise * noise(rng);
      std::vector<double> row{grid[static_cast<std::size_t>(i)], v};
      if (a.traces > 1) row.push_back(k);
      t.rows.push_back(std::move(row));
    }
  }
  emit(a.output, t.to_string());
}

struct FitSplitArgs {
  std::string input, output;
  int n_peaks = 6;
  double f_eg = std::nan(""), two_chi = 2.23, sigma = 0.3, gamma = 0.15, n_bar = 0.5, alpha_sq = 0.5;
};

SpectrumTrace trace_from_csv(const std::string& path) {
  const CsvTable t = load_csv(path);
  SpectrumTrace tr;
  tr.freqs = column(t, "freq_mhz", path);
  tr.amplitude = column(t, "amplitude", path);
  try {
    tr.validate();
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
  return tr;
}

void run_fit_split(const Globals& g, const FitSplitArgs& a) {
  RunConfig c = load_config(g);
  const std::string path = input_path(a.input, c, "traces", g.dry_run);
  if (g.dry_run) {
    print_dry_run(c, {{"fit.input", path}, {"fit.n_peaks", std::to_string(a.n_peaks)}});
    return;
  }
  const SpectrumTrace tr = trace_from_csv(path);
  NumberSplittingInit init;
  if (std::isfinite(a.f_eg)) {
    init.f_eg = a.f_eg;
  } else {
    const auto it = std::max_element(tr.amplitude.begin(), tr.amplitude.end());
    init.f_eg = tr.freqs[static_cast<std::size_t>(it - tr.amplitude.begin())];
  }
  init.two_chi = a.two_chi;
  init.widths = {a.sigma, a.gamma};
  init.n_bar = a.n_bar;
  init.alpha_sq = a.alpha_sq;
  const NumberSplittingFit f = fit_number_splitting(tr, a.n_peaks, init);
  Json j;
  j["f_eg_mhz"] = f.peaks.f_eg;
  j["f_eg_err_mhz"] = f.peaks.f_eg_err;
  j["two_chi_mhz"] = f.peaks.two_chi;
  j["two_chi_err_mhz"] = f.peaks.two_chi_err;
  j["baseline"] = f.peaks.baseline;
  Json peaks = Json::array();
  for (std::size_t n = 0; n < f.peaks.peaks.size(); ++n) {
    const auto& pk = f.peaks.peaks[n];
    peaks.push_back({{"n", n}, {"center_mhz", pk.center}, {"sigma_mhz", pk.sigma}, {"gamma_mhz", pk.gamma},
                     {"area", pk.area}, {"area_err", pk.area_err}});
  }
  j["peaks"] = peaks;
  const auto& d = f.distribution;
  j["distribution"] = {{"p", d.p},
                       {"p_err", d.p_err},
                       {"n_bar_th", d.n_bar_th},
                       {"n_bar_th_err", d.n_bar_th_err},
                       {"alpha_sq", d.alpha_sq},
                       {"alpha_sq_err", d.alpha_sq_err},
                       {"mean_n", d.mean_n},
                       {"mean_n_err", d.mean_n_err},
                       {"scale", d.scale},
                       {"alpha_fixed_zero", d.alpha_fixed_zero}};
  j["stage1_reduced_chi2"] = f.stage1.reduced_chi2;
  j["stage2_reduced_chi2"] = f.stage2.reduced_chi2;
  j["warnings"] = warnings_json(f.warnings);
  emit(a.output, json_text(j));
}

struct AlignArgs {
  std::string input, output, summary;
  int bin = 2;
  double window_lo = std::nan(""), window_hi = std::nan("");
  bool no_reject = false;
};

void run_align(const Globals& g, const AlignArgs& a) {
  RunConfig c = load_config(g);
  const std::string path = input_path(a.input, c, "traces", g.dry_run);
  const bool window_set = std::isfinite(a.window_lo) && std::isfinite(a.window_hi);
  if (g.dry_run) {
    print_dry_run(c, {{"align.input", path},
                      {"align.bin", std::to_string(a.bin)},
                      {"align.window_mhz",
                       window_set ? format_number(a.window_lo) + ".." + format_number(a.window_hi) : "(unset)"},
                      {"align.reject_anomalies", a.no_reject ? "false" : "true"}});
    return;
  }
  if (!window_set) throw UsageError("--window-lo and --window-hi are required");
  const CsvTable t = load_csv(path);
  const auto f = column(t, "freq_mhz", path);
  const auto y = column(t, "amplitude", path);
  const auto idx = column(t, "trace_index", path);
  std::vector<SpectrumTrace> traces;
  std::vector<double> ids;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto it = std::find(ids.begin(), ids.end(), idx[i]);
    std::size_t k = static_cast<std::size_t>(it - ids.begin());
    if (it == ids.end()) {
      ids.push_back(idx[i]);
      traces.emplace_back();
    }
    traces[k].freqs.push_back(f[i]);
    traces[k].amplitude.push_back(y[i]);
  }
  DriftAlignOptions opt;
  opt.bin = a.bin;
  opt.window_lo = a.window_lo;
  opt.window_hi = a.window_hi;
  opt.reject_anomalies = !a.no_reject;
  const DriftAlignResult r = drift_align(traces, opt);
  CsvTable out;
  out.header = {"freq_mhz", "amplitude"};
  for (std::size_t i = 0; i < r.trace.freqs.size(); ++i) out.rows.push_back({r.trace.freqs[i], r.trace.amplitude[i]});
  emit(a.output, out.to_string());
  if (!a.summary.empty()) {
    Json j;
    j["rejected_traces"] = r.rejected;
    j["dropped_bins"] = r.dropped_bins;
    j["centers_mhz"] = r.centers;
    j["shifts_steps"] = r.shifts;
    j["warnings"] = warnings_json(r.warnings);
    emit(a.summary, json_text(j));
  }
}

// ---------------------------------------------------------------- circuit

struct CircuitArgs {
  std::string input, output;
};

void run_circuit_reduce(const Globals& g, const CircuitArgs& a) {
  RunConfig c = load_config(g);
  const std::string path = input_path(a.input, c, "network", g.dry_run);
  if (g.dry_run) {
    print_dry_run(c, {{"circuit.input", path}});
    return;
  }
  NetworkFile nf;
  try {
    nf = parse_network(load_text(path));
  } catch (const ValidationError& e) {
    throw UsageError(path + ": " + e.what());
  }
  CapacitanceNetwork net = nf.network;
  Json islands = Json::array();
  // Eliminate islands one at a time; indices shift after each elimination.
  for (auto isl = find_free_islands(net); !isl.empty(); isl = find_free_islands(net)) {
    Json names = Json::array();
    for (int i : isl[0]) names.push_back(net.names().at(static_cast<std::size_t>(i - 1)));
    islands.push_back(names);
    net = eliminate_free_node(net, isl[0]);
  }
  Json j;
  j["eliminated_islands"] = islands;
  if (nf.coordinates.empty()) {
    j["coordinates"] = net.names();
    Json cap = Json::array();
    for (Eigen::Index r = 0; r < net.capacitance().rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index col = 0; col < net.capacitance().cols(); ++col) row.push_back(net.capacitance()(r, col));
      cap.push_back(row);
    }
    j["capacitance_ff"] = cap;
  } else {
    const ReducedCircuit rc = reduce_to_dynamical(net, nf.coordinates);
    j["coordinates"] = rc.coordinates;
    Json inv = Json::array();
    for (Eigen::Index r = 0; r < rc.inv_cap.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index col = 0; col < rc.inv_cap.cols(); ++col) row.push_back(rc.inv_cap(r, col));
      inv.push_back(row);
    }
    j["inverse_capacitance_per_ff"] = inv;
    j["charging_energy_ghz"] = std::vector<double>(rc.charging_energy.data(),
                                                   rc.charging_energy.data() + rc.charging_energy.size());
    j["inductive_energy_ghz"] = std::vector<double>(rc.inductive_energy.data(),
                                                    rc.inductive_energy.data() + rc.inductive_energy.size());
    j["junction_energy_ghz"] = std::vector<double>(rc.junction_energy.data(),
                                                   rc.junction_energy.data() + rc.junction_energy.size());
    j["e_c_ghz"] = rc.e_c;
    j["beta_qm"] = rc.beta_qm;
    j["beta_qr"] = rc.beta_qr;
  }
  emit(a.output, json_text(j));
}

// -------------------------------------------------------------------- sim

struct RabiArgs {
  double v0_min = 20, v0_max = 800;
  int v0_n = 40;
  double f_min = 146.0, f_max = 164.72;
  int f_n = 40;
  std::string csv, output, integrator = "splitstep";
};

PulseIntegrator parse_integrator(const std::string& s) {
  if (s == "splitstep") return PulseIntegrator::SplitStep;
  if (s == "rk4") return PulseIntegrator::Rk4;
  throw UsageError("--integrator must be splitstep or rk4");
}

Json setup_json(const SimulationSetup& s) {
  return {{"flux_phi0", s.flux},
          {"dims", {{"n_qudit_fock", s.dims.n_qudit_fock}, {"n_qudit_kept", s.dims.n_qudit_kept},
                    {"n_phonon", s.dims.n_phonon}}},
          {"rates", {{"t1m_us", s.rates.t1m}, {"n_th_m", s.rates.n_th_m}, {"t1q_us", s.rates.t1q},
                     {"n_th_q", s.rates.n_th_q}, {"t_phi_q_us", s.rates.t_phi_q}}},
          {"t_eff_mk", s.t_eff_mk},
          {"step_ns", s.step_ns}};
}

void run_sim_rabi(const Globals& g, const RabiArgs& a) {
  RunConfig c = load_config(g);
  const PulseIntegrator integ = parse_integrator(a.integrator);
  const SimulationSetup s = c.simulation_setup();
  if (g.dry_run) {
    print_dry_run(c, {{"rabi.v0_grid_mvpp", format_number(a.v0_min) + ".." + format_number(a.v0_max) + " (" +
                                                std::to_string(a.v0_n) + ")"},
                      {"rabi.f_mod_grid_mhz", format_number(a.f_min) + ".." + format_number(a.f_max) + " (" +
                                                  std::to_string(a.f_n) + ")"},
                      {"rabi.integrator", a.integrator},
                      {"rabi.jobs", std::to_string(c.jobs)}});
    return;
  }
  const JointSimulator sim(s);
  const auto v0 = linspace(a.v0_min, a.v0_max, a.v0_n);
  const auto fm = linspace(a.f_min, a.f_max, a.f_n);
  RabiSweepOptions opt;
  opt.jobs = c.jobs;
  opt.integrator = integ;
  const RabiMap map = rabi_amplitude_sweep(sim, c.pulse, v0, fm, opt);

  if (!a.csv.empty()) {
    CsvTable t;
    t.header = {"v0_mvpp", "f_mod_mhz", "signal", "p_g", "p_e", "p0", "p1", "p2"};
    for (const auto& p : map.points) {
      auto ph = [&](std::size_t n) { return n < p.p_phonon.size() ? p.p_phonon[n] : 0.0; };
      t.rows.push_back({p.v0, p.f_mod, p.signal, p.p_g, p.p_e, ph(0), ph(1), ph(2)});
    }
    emit(a.csv, t.to_string());
  }
  std::size_t i_f = 0;
  for (std::size_t i = 1; i < fm.size(); ++i) {
    if (std::abs(fm[i] - c.pulse.f_mod) < std::abs(fm[i_f] - c.pulse.f_mod)) i_f = i;
  }
  const AmplitudeCut cut = amplitude_cut(map, i_f);
  Json j;
  j["setup"] = setup_json(s);
  j["grid"] = {{"v0_mvpp", {a.v0_min, a.v0_max, a.v0_n}}, {"f_mod_mhz", {a.f_min, a.f_max, a.f_n}}};
  j["cut_f_mod_mhz"] = fm[i_f];
  j["v0_at_max_signal_mvpp"] = cut.v0_at_max_signal;
  j["max_signal"] = cut.max_signal;
  j["P1_at_max_signal"] = cut.p1_at_max_signal;
  j["v0_at_max_P1_mvpp"] = cut.v0_at_max_p1;
  j["max_P1"] = cut.max_p1;
  try {
    const RabiRidge r = rabi_ridge(map);
    j["ridge"] = {{"v0_mvpp", r.v0}, {"f_mod_mhz", r.f_mod}, {"slope_mhz_per_mvpp", r.slope},
                  {"increases", r.increases}, {"decreases", r.decreases}, {"bends_up", r.bends_up()}};
  } catch (const Error& e) {
    j["ridge"] = {{"error", e.what()}};
  }
  emit(a.output, json_text(j));
}

struct SwapArgs {
  double delay_max = 4.0;
  int delay_n = 21;
  std::string delays, csv, output;
};

void run_sim_swap(const Globals& g, const SwapArgs& a, bool t2) {
  RunConfig c = load_config(g);
  const SimulationSetup s = c.simulation_setup();
  const std::vector<double> delays = a.delays.empty() ? linspace(0.0, a.delay_max, a.delay_n) : parse_list(a.delays);
  if (g.dry_run) {
    print_dry_run(c, {{"swap.kind", t2 ? "t2m" : "t1m"},
                      {"swap.delays_us", format_number(delays.front()) + ".." + format_number(delays.back()) +
                                             " (" + std::to_string(delays.size()) + ")"}});
    return;
  }
  if (!(c.pulse.v0 > 0)) throw UsageError("pulse.v0_mvpp must be > 0 for a swap sequence");
  const JointSimulator sim(s);
  SwapOptions opt;
  opt.jobs = c.jobs;
  opt.prep = t2 ? SwapPrep::HalfPi : SwapPrep::Pi;
  opt.recovery = t2 ? SwapRecovery::HalfPi : SwapRecovery::Identity;
  const SwapTrace tr = swap_sequence(sim, c.pulse, delays, opt);
  CsvTable t;
  t.header = {"delay_us", "p_e", "p_g", "signal"};
  for (std::size_t i = 0; i < tr.delays_us.size(); ++i) {
    t.rows.push_back({tr.delays_us[i], tr.p_e[i], tr.p_g[i], tr.signal[i]});
  }
  if (!a.csv.empty()) emit(a.csv, t.to_string());
  Json j;
  j["setup"] = setup_json(s);
  j["pulse"] = {{"v0_mvpp", c.pulse.v0}, {"f_mod_mhz", c.pulse.f_mod}, {"tau_mod_ns", c.pulse.tau_mod},
                {"tau_r_ns", c.pulse.tau_r}};
  j["kind"] = t2 ? "t2m" : "t1m";
  j["delays_us"] = tr.delays_us;
  j["signal"] = tr.signal;
  if (tr.delays_us.size() >= 8) {
    try {
      const StretchedExpFit f = stretched_exp_fit(tr.delays_us, tr.signal, true, true);
      j["fit"] = {{"time_us", f.t}, {"time_err_us", f.t_err}, {"n", f.n}, {"n_err", f.n_err},
                  {"amplitude", f.amplitude}, {"offset", f.offset}};
    } catch (const Error& e) {
      j["fit"] = {{"error", e.what()}};
    }
  }
  emit(a.output, json_text(j));
}

// -------------------------------------------------------------- decohere

struct DecohereArgs {
  double slope = std::nan("");
  double two_chi = std::nan("");
  double n_bar = std::nan("");
  double t1m = std::nan("");
  std::string input, output, model = "stretched";
  int k = 3;
  int n_max = 2;
  double f0 = 1.0, t_d = 1.13 * 0.05;
};

void run_decohere_1f(const Globals& g, const DecohereArgs& a) {
  RunConfig c = load_config(g);
  if (g.dry_run) {
    print_dry_run(c, {{"1f.slope_ghz_per_phi0", std::isfinite(a.slope) ? format_number(a.slope) : "from device"}});
    return;
  }
  const double slope = std::isfinite(a.slope)
                           ? a.slope
                           : flux_slope(c.qudit, FluxBias{c.flux}, {0, 1}, c.dims.n_qudit_fock).value;
  const double t0 = dephasing_time_1f(c.noise, slope, 0);
  const double t1 = dephasing_time_1f(c.noise, slope, 1);
  Json j;
  j["slope_ghz_per_phi0"] = slope;
  j["t_phi_ramsey_us"] = t0;
  j["t_phi_echo_us"] = t1;
  j["ratio_echo_over_ramsey"] = t1 / t0;
  emit(a.output, json_text(j));
}

void run_decohere_thermal(const Globals& g, const DecohereArgs& a) {
  RunConfig c = load_config(g);
  const double two_chi = std::isfinite(a.two_chi) ? a.two_chi : c.two_chi_mhz;
  const double n_bar = std::isfinite(a.n_bar) ? a.n_bar : c.rates.n_th_m;
  const double t1m = std::isfinite(a.t1m) ? a.t1m : c.coherence.t1m.at(0);
  if (g.dry_run) {
    print_dry_run(c, {{"thermal.two_chi_mhz", format_number(two_chi)},
                      {"thermal.n_bar", format_number(n_bar)},
                      {"thermal.t1m_us", format_number(t1m)}});
    return;
  }
  const double rate = thermal_dephasing_rate(1.0 / t1m, 0.5 * two_chi, n_bar);
  Json j;
  j["two_chi_mhz"] = two_chi;
  j["n_bar"] = n_bar;
  j["t1m_us"] = t1m;
  j["gamma_phi_per_us"] = rate;
  j["inverse_rate_us"] = rate > 0 ? Json(1.0 / rate) : Json(nullptr);
  j["validity"] = "order of magnitude; single-rate mode decay, dispersive regime";
  emit(a.output, json_text(j));
}

void run_decohere_coop(const Globals& g, const DecohereArgs& a) {
  RunConfig c = load_config(g);
  const double two_chi = std::isfinite(a.two_chi) ? a.two_chi : c.two_chi_mhz;
  if (g.dry_run) {
    print_dry_run(c, {{"coop.two_chi_mhz", format_number(two_chi)}});
    return;
  }
  const auto& ct = c.coherence;
  const Cooperativities co = cooperativities(two_chi, ct.t1q, ct.t1m.at(0), ct.t2q, ct.t2m);
  Json j;
  j["two_chi_mhz"] = two_chi;
  j["c_t1"] = co.c_t1;
  j["c_t2"] = co.c_t2;
  j["pure_dephasing_echo_us"] = pure_dephasing(ct.t2eq, ct.t1q);
  emit(a.output, json_text(j));
}

void run_decohere_fit(const Globals& g, const DecohereArgs& a) {
  RunConfig c = load_config(g);
  const std::string path = input_path(a.input, c, "decay", g.dry_run);
  if (g.dry_run) {
    print_dry_run(c, {{"fit.input", path}, {"fit.model", a.model}});
    return;
  }
  const CsvTable t = load_csv(path);
  const auto x = column(t, "delay_us", path);
  const auto y = column(t, "signal", path);
  Json j;
  j["model"] = a.model;
  if (a.model == "stretched" || a.model == "stretched-free") {
    const StretchedExpFit f = stretched_exp_fit(x, y, a.model == "stretched");
    j["time_us"] = f.t;
    j["time_err_us"] = f.t_err;
    j["n"] = f.n;
    j["n_err"] = f.n_err;
    j["amplitude"] = f.amplitude;
    j["amplitude_err"] = f.amplitude_err;
  } else if (a.model == "multi") {
    const MultiExpFit f = multi_exp_fit(x, y, a.k);
    j["times_us"] = f.times;
    j["times_err_us"] = f.times_err;
    j["amplitudes"] = f.amplitudes;
    j["amplitudes_err"] = f.amplitudes_err;
    j["one_over_e_time_us"] = f.one_over_e_time;
    j["warnings"] = warnings_json(f.warnings);
  } else if (a.model == "ramsey") {
    RamseyDispersiveParams init;
    init.amplitudes.assign(static_cast<std::size_t>(a.n_max + 1), 0.0);
    const double y0 = *std::max_element(y.begin(), y.end());
    for (int n = 0; n <= a.n_max; ++n) init.amplitudes[static_cast<std::size_t>(n)] = y0 / (n + 1);
    init.t2q = c.coherence.t2q;
    init.f0 = a.f0;
    init.two_chi = std::isfinite(a.two_chi) ? a.two_chi : c.two_chi_mhz;
    init.t_d = a.t_d;
    const RamseyFit f = ramsey_dispersive_fit(x, y, init, a.n_max);
    j["amplitudes"] = f.params.amplitudes;
    j["amplitudes_err"] = f.amplitude_err;
    j["t2q_us"] = f.params.t2q;
    j["t2q_err_us"] = f.t2q_err;
    j["f0_mhz"] = f.params.f0;
    j["f0_err_mhz"] = f.f0_err;
    j["two_chi_mhz"] = f.params.two_chi;
    j["two_chi_err_mhz"] = f.two_chi_err;
  } else {
    throw UsageError("--model must be stretched, stretched-free, multi or ramsey");
  }
  emit(a.output, json_text(j));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonoflux: fluxonium-mechanics modeling and analysis"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI run configuration (defaults to the shipped device values)");
  app.add_flag("--dry-run", g.dry_run, "print the resolved parameters and exit");
  app.add_option("--jobs", g.jobs, "worker threads for grid commands")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "random seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  SpectrumArgs spec;
  auto* sp = app.add_subcommand("spectrum", "qudit and joint tuning curves over flux (CSV)");
  sp->add_option("--flux-min", spec.flux_min);
  sp->add_option("--flux-max", spec.flux_max);
  sp->add_option("--flux-n", spec.flux_n);
  sp->add_option("--levels", spec.levels, "qudit levels (transitions from g)");
  sp->add_flag("--joint", spec.joint, "add dressed e0, g1, e1 columns");
  sp->add_option("--g-m", spec.g_m, "override the mechanical coupling (MHz)");
  sp->add_option("-o,--output", spec.output);

  FitTuningArgs ft;
  auto* ftp = app.add_subcommand("fit-tuning", "fit the avoided-crossing tuning curve (JSON)");
  ftp->add_option("-i,--input", ft.input, "CSV with flux_phi0,freq_mhz");
  ftp->add_option("--exclude", ft.exclude, "comma list of extra crossing centers (MHz)");
  ftp->add_option("-o,--output", ft.output);

  ChiArgs chi;
  auto* chp = app.add_subcommand("chi", "dispersive shift, exact and perturbative");
  chp->add_option("--flux", chi.flux, "single flux point (JSON output)");
  chp->add_option("--flux-min", chi.flux_min);
  chp->add_option("--flux-max", chi.flux_max);
  chp->add_option("--flux-n", chi.flux_n);
  chp->add_option("-o,--output", chi.output);

  auto* ns = app.add_subcommand("numbersplit", "number-splitting spectra");
  ns->require_subcommand(1);
  SynthArgs syn;
  auto* nss = ns->add_subcommand("synth", "synthesize a spectrum (CSV)");
  nss->add_option("--f-eg", syn.f_eg);
  nss->add_option("--two-chi", syn.two_chi);
  nss->add_option("--n-bar", syn.n_bar);
  nss->add_option("--alpha-sq", syn.alpha_sq);
  nss->add_option("--sigma", syn.sigma);
  nss->add_option("--gamma", syn.gamma);
  nss->add_option("--n-max", syn.n_max);
  nss->add_option("--f-min", syn.f_min);
  nss->add_option("--f-max", syn.f_max);
  nss->add_option("--points", syn.points);
  nss->add_option("--noise", syn.noise, "additive Gaussian noise standard deviation");
  nss->add_option("--traces", syn.traces);
  nss->add_option("--drift-steps", syn.drift_steps, "grid-step drift added per trace");
  nss->add_option("-o,--output", syn.output);
  FitSplitArgs fs;
  auto* nsf = ns->add_subcommand("fit", "two-stage number-splitting fit (JSON)");
  nsf->add_option("-i,--input", fs.input, "CSV with freq_mhz,amplitude");
  nsf->add_option("--n-peaks", fs.n_peaks);
  nsf->add_option("--f-eg", fs.f_eg, "initial n = 0 center (default: tallest point)");
  nsf->add_option("--two-chi", fs.two_chi);
  nsf->add_option("--sigma", fs.sigma);
  nsf->add_option("--gamma", fs.gamma);
  nsf->add_option("--n-bar", fs.n_bar);
  nsf->add_option("--alpha-sq", fs.alpha_sq);
  nsf->add_option("-o,--output", fs.output);
  AlignArgs al;
  auto* nsa = ns->add_subcommand("align", "drift-align repeated traces (CSV)");
  nsa->add_option("-i,--input", al.input, "CSV with freq_mhz,amplitude,trace_index");
  nsa->add_option("--bin", al.bin);
  nsa->add_option("--window-lo", al.window_lo);
  nsa->add_option("--window-hi", al.window_hi);
  nsa->add_flag("--no-reject", al.no_reject, "skip the total-power anomaly screen");
  nsa->add_option("--summary", al.summary, "JSON summary path");
  nsa->add_option("-o,--output", al.output);

  auto* ci = app.add_subcommand("circuit", "circuit quantization");
  ci->require_subcommand(1);
  CircuitArgs ca;
  auto* cir = ci->add_subcommand("reduce", "eliminate islands and reduce a capacitance network (JSON)");
  cir->add_option("-i,--input", ca.input, "network file");
  cir->add_option("-o,--output", ca.output);

  auto* sim = app.add_subcommand("sim", "Lindblad simulations");
  sim->require_subcommand(1);
  RabiArgs ra;
  auto* sr = sim->add_subcommand("rabi", "Rabi amplitude-frequency sweep (JSON summary)");
  sr->add_option("--v0-min", ra.v0_min);
  sr->add_option("--v0-max", ra.v0_max);
  sr->add_option("--v0-n", ra.v0_n);
  sr->add_option("--f-min", ra.f_min);
  sr->add_option("--f-max", ra.f_max);
  sr->add_option("--f-n", ra.f_n);
  sr->add_option("--integrator", ra.integrator, "splitstep or rk4");
  sr->add_option("--csv", ra.csv, "grid CSV path");
  sr->add_option("-o,--output", ra.output);
  SwapArgs sw1, sw2;
  auto* s1 = sim->add_subcommand("t1m", "two-swap mechanical T1 sequence");
  auto* s2 = sim->add_subcommand("t2m", "two-swap mechanical Ramsey sequence");
  for (auto [cmd, args] : {std::pair{s1, &sw1}, std::pair{s2, &sw2}}) {
    cmd->add_option("--delay-max", args->delay_max, "us");
    cmd->add_option("--delay-n", args->delay_n);
    cmd->add_option("--delays", args->delays, "comma list of delays (us), overrides the grid");
    cmd->add_option("--csv", args->csv, "trace CSV path");
    cmd->add_option("-o,--output", args->output);
  }

  auto* dc = app.add_subcommand("decohere", "coherence models");
  dc->require_subcommand(1);
  DecohereArgs d1, dth, dco, dfit;
  auto* d1p = dc->add_subcommand("1f", "1/f flux-noise dephasing times");
  d1p->add_option("--slope", d1.slope, "GHz per Phi0 (default: device slope at the configured flux)");
  d1p->add_option("-o,--output", d1.output);
  auto* dthp = dc->add_subcommand("thermal", "thermal-phonon dephasing estimate");
  dthp->add_option("--two-chi", dth.two_chi, "MHz");
  dthp->add_option("--n-bar", dth.n_bar);
  dthp->add_option("--t1m", dth.t1m, "us");
  dthp->add_option("-o,--output", dth.output);
  auto* dcop = dc->add_subcommand("coop", "dispersive cooperativities");
  dcop->add_option("--two-chi", dco.two_chi, "MHz");
  dcop->add_option("-o,--output", dco.output);
  auto* dfp = dc->add_subcommand("fit", "fit a decay trace");
  dfp->add_option("-i,--input", dfit.input, "CSV with delay_us,signal");
  dfp->add_option("--model", dfit.model, "stretched, stretched-free, multi or ramsey");
  dfp->add_option("--k", dfit.k, "components for multi");
  dfp->add_option("--n-max", dfit.n_max, "highest phonon number for ramsey");
  dfp->add_option("--f0", dfit.f0, "initial detuning for ramsey (MHz)");
  dfp->add_option("--t-d", dfit.t_d, "phase delay for ramsey (us)");
  dfp->add_option("--two-chi", dfit.two_chi, "initial 2chi for ramsey (MHz)");
  dfp->add_option("-o,--output", dfit.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sp) run_spectrum(g, spec);
    else if (*ftp) run_fit_tuning(g, ft);
    else if (*chp) run_chi(g, chi);
    else if (*nss) run_synth(g, syn);
    else if (*nsf) run_fit_split(g, fs);
    else if (*nsa) run_align(g, al);
    else if (*cir) run_circuit_reduce(g, ca);
    else if (*sr) run_sim_rabi(g, ra);
    else if (*s1) run_sim_swap(g, sw1, false);
    else if (*s2) run_sim_swap(g, sw2, true);
    else if (*d1p) run_decohere_1f(g, d1);
    else if (*dthp) run_decohere_thermal(g, dth);
    else if (*dcop) run_decohere_coop(g, dco);
    else if (*dfp) run_decohere_fit(g, dfit);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
