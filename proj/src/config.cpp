#include "phonoflux/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "phonoflux/io.hpp"
#include "phonoflux/spectra.hpp"

namespace phonoflux {

namespace {

struct Entry {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ValidationError("not a finite number: '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ValidationError("not an integer: '" + s + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_number(v[i]);
  }
  return s;
}

#define PF_DOUBLE(sec, name, field)                                                          \
  Entry {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { c.field = parse_double(v); },       \
        [](const RunConfig& c) { return format_number(c.field); }                           \
  }
#define PF_INT(sec, name, field)                                                             \
  Entry {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { c.field = static_cast<int>(parse_int(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                          \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      PF_DOUBLE("device", "e_c_ghz", qudit.e_c),
      PF_DOUBLE("device", "e_j_ghz", qudit.e_j),
      PF_DOUBLE("device", "e_l_ghz", qudit.e_l),
      PF_DOUBLE("device", "omega_m0_mhz", mech.omega0),
      PF_DOUBLE("device", "g_m_mhz", mech.g),
      PF_DOUBLE("device", "flux_phi0", flux),
      PF_INT("dims", "n_qudit_fock", dims.n_qudit_fock),
      PF_INT("dims", "n_qudit_kept", dims.n_qudit_kept),
      PF_INT("dims", "n_phonon", dims.n_phonon),
      PF_DOUBLE("rates", "t1m_us", rates.t1m),
      PF_DOUBLE("rates", "n_th_m", rates.n_th_m),
      PF_DOUBLE("rates", "t1q_us", rates.t1q),
      Entry{"rates", "n_th_q",
            [](RunConfig& c, const std::string& v) {
              if (v == "auto") {
                c.n_th_q_auto = true;
              } else {
                c.n_th_q_auto = false;
                c.rates.n_th_q = parse_double(v);
              }
            },
            [](const RunConfig& c) { return c.n_th_q_auto ? std::string("auto") : format_number(c.rates.n_th_q); }},
      PF_DOUBLE("rates", "t_phi_q_us", rates.t_phi_q),
      PF_DOUBLE("rates", "t_eff_mk", t_eff_mk),
      PF_DOUBLE("pulse", "v0_mvpp", pulse.v0),
      PF_DOUBLE("pulse", "f_mod_mhz", pulse.f_mod),
      PF_DOUBLE("pulse", "theta_rad", pulse.theta),
      PF_DOUBLE("pulse", "tau_mod_ns", pulse.tau_mod),
      PF_DOUBLE("pulse", "tau_r_ns", pulse.tau_r),
      PF_DOUBLE("pulse", "gain_phi0_per_mvpp", pulse.gain_k),
      PF_DOUBLE("pulse", "step_ns", step_ns),
      PF_DOUBLE("pulse", "free_step_ns", free_step_ns),
      PF_DOUBLE("noise", "a_phi_uphi0", noise.a_phi),
      Entry{"noise", "f_c_hz",
            [](RunConfig& c, const std::string& v) { c.noise.omega_c = constants::kTwoPi * parse_double(v); },
            [](const RunConfig& c) { return format_number(c.noise.omega_c / constants::kTwoPi); }},
      Entry{"noise", "t_ref_us", [](RunConfig& c, const std::string& v) { c.noise.t_ref = 1e-6 * parse_double(v); },
            [](const RunConfig& c) { return format_number(c.noise.t_ref * 1e6); }},
      PF_DOUBLE("coherence", "t1q_us", coherence.t1q),
      PF_DOUBLE("coherence", "t2q_us", coherence.t2q),
      PF_DOUBLE("coherence", "t2eq_us", coherence.t2eq),
      Entry{"coherence", "t1m_us", [](RunConfig& c, const std::string& v) { c.coherence.t1m = parse_list(v); },
            [](const RunConfig& c) { return list_str(c.coherence.t1m); }},
      PF_DOUBLE("coherence", "t2m_us", coherence.t2m),
      PF_DOUBLE("coherence", "two_chi_mhz", two_chi_mhz),
      Entry{"run", "output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
            [](const RunConfig& c) { return c.output_dir; }},
      Entry{"run", "seed",
            [](RunConfig& c, const std::string& v) {
              const long long s = parse_int(v);
              if (s < 0) throw ValidationError("seed must be >= 0");
              c.seed = static_cast<std::uint64_t>(s);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      PF_INT("run", "jobs", jobs),
  };
  return table;
}

#undef PF_DOUBLE
#undef PF_INT

const std::set<std::string> kPathKeys = {"peaks", "network", "traces", "decay"};

void validate_config(const RunConfig& c) {
  c.qudit.validate();
  c.mech.validate();
  c.rates.validate();
  c.pulse.validate();
  c.noise.validate();
  if (c.dims.n_qudit_fock < 4 || c.dims.n_qudit_kept < 2 || c.dims.n_phonon < 2) {
    throw InvalidDimension("config: dims too small");
  }
  if (4 * c.dims.n_qudit_kept > c.dims.n_qudit_fock) {
    throw InvalidDimension("config: n_qudit_kept must be <= n_qudit_fock / 4");
  }
  if (!(c.t_eff_mk >= 0.0)) throw DomainError("config: t_eff_mk must be >= 0");
  if (!(c.step_ns > 0.0) || !(c.free_step_ns > 0.0)) throw DomainError("config: step sizes must be > 0");
  if (c.jobs < 1) throw ValidationError("config: jobs must be >= 1");
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  // Swap amplitude: maximum readout signal of the simulated Rabi calibration.
  c.pulse.v0 = 300.0;
  c.coherence.t1q = 3.57;
  c.coherence.t2q = 0.33;
  c.coherence.t2eq = 1.35;
  c.coherence.t1m = {0.85, 4.11, 29.6};
  c.coherence.t2m = 3.93;
  return c;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c = defaults();
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {"device", "dims", "rates", "pulse", "noise",
                                                  "coherence", "paths", "run"};
      if (!known.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail("key outside of a section");
    const std::string full = section + "." + key;
    if (!seen.insert(full).second) fail("duplicate key " + full);
    if (section == "paths") {
      if (!kPathKeys.count(key)) fail("unknown key " + full);
      c.paths[key] = value;
      continue;
    }
    bool found = false;
    for (const auto& e : entries()) {
      if (section == e.section && key == e.key) {
        try {
          e.set(c, value);
        } catch (const Error& err) {
          fail(full + ": " + err.what());
        }
        found = true;
        break;
      }
    }
    if (!found) fail("unknown key " + full);
  }
  try {
    validate_config(c);
  } catch (const Error& err) {
    throw ValidationError(origin + ": " + err.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_text_file(path), path); }

SimulationSetup RunConfig::simulation_setup() const {
  SimulationSetup s;
  s.qudit = qudit;
  s.flux = flux;
  s.mech = mech;
  s.dims = dims;
  s.rates = rates;
  s.t_eff_mk = t_eff_mk;
  s.step_ns = step_ns;
  s.free_step_ns = free_step_ns;
  if (n_th_q_auto) {
    const double f_ghz = transition_frequency(qudit, FluxBias{flux}, {0, 1}, dims.n_qudit_fock);
    s.rates.n_th_q = thermal_occupation(1e-3 * t_eff_mk, f_ghz * 1e9);
  }
  return s;
}

std::string RunConfig::describe() const {
  std::ostringstream out;
  for (const auto& e : entries()) out << e.section << '.' << e.key << " = " << e.get(*this) << '\n';
  for (const auto& [k, v] : paths) out << "paths." << k << " = " << v << '\n';
  if (n_th_q_auto) out << "rates.n_th_q (resolved) = " << format_number(simulation_setup().rates.n_th_q) << '\n';
  return out.str();
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    if (section != e.section) {
      section = e.section;
      out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    out << e.key << " = " << e.get(*this) << '\n';
  }
  if (!paths.empty()) {
    out << "\n[paths]\n";
    for (const auto& [k, v] : paths) out << k << " = " << v << '\n';
  }
  return out.str();
}

}  // namespace phonoflux
