#include <doctest.h>

#include <cmath>

#include "phonoflux/config.hpp"
#include "phonoflux/io.hpp"
#include "phonoflux/spectra.hpp"

using namespace phonoflux;

TEST_SUITE("config_io") {

TEST_CASE("defaults round trip through INI text") {
  const RunConfig d = RunConfig::defaults();
  const RunConfig back = RunConfig::parse(d.to_ini(), "roundtrip");
  CHECK(back.to_ini() == d.to_ini());
  CHECK(back.describe() == d.describe());
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const RunConfig shipped = RunConfig::load(std::string(PHONOFLUX_SOURCE_DIR) + "/configs/default.ini");
  CHECK(shipped.to_ini() == RunConfig::defaults().to_ini());
  CHECK(shipped.qudit.e_c == 0.8016);
  CHECK(shipped.mech.g == 66.6);
  CHECK(shipped.flux == 0.4726);
  CHECK(shipped.n_th_q_auto);
}

TEST_CASE("parsing") {
  const RunConfig c = RunConfig::parse(
      "; comment\n[device]\nflux_phi0 = 0.4751  # bias\n[rates]\nn_th_q = 0.2\n[coherence]\nt1m_us = 1, 2\n"
      "[paths]\npeaks = p.csv\n[run]\njobs = 3\n",
      "t.ini");
  CHECK(c.flux == 0.4751);
  CHECK_FALSE(c.n_th_q_auto);
  CHECK(c.simulation_setup().rates.n_th_q == 0.2);
  CHECK(c.coherence.t1m == std::vector<double>{1.0, 2.0});
  CHECK(c.paths.at("peaks") == "p.csv");
  CHECK(c.jobs == 3);

  auto fails = [](const std::string& text) {
    CHECK_THROWS_AS(RunConfig::parse(text, "bad.ini"), ValidationError);
  };
  fails("[device]\nbogus = 1\n");
  fails("[nowhere]\n");
  fails("[device]\ne_c_ghz = 1\ne_c_ghz = 2\n");
  fails("[device]\ne_c_ghz = abc\n");
  fails("e_c_ghz = 1\n");
  fails("[device]\ne_c_ghz = -1\n");
  fails("[dims]\nn_qudit_kept = 40\n");
  fails("[paths]\nother = x\n");
  try {
    RunConfig::parse("[device]\n\nbogus = 1\n", "where.ini");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("where.ini:3") != std::string::npos);
  }
}

TEST_CASE("automatic qubit occupation") {
  const RunConfig c = RunConfig::defaults();
  const SimulationSetup s = c.simulation_setup();
  const double f = 1e9 * transition_frequency(c.qudit, FluxBias{c.flux}, {0, 1}, c.dims.n_qudit_fock);
  CHECK(s.rates.n_th_q == doctest::Approx(thermal_occupation(0.033, f)).epsilon(1e-14));
  CHECK(s.rates.n_th_q == doctest::Approx(0.4154).epsilon(0.01));
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1 + 0.2) == "0.3");
  CHECK(format_number(1234567.891234567) == "1234567.89123");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(round12(0.1 + 0.2) == 0.3);
  const nlohmann::ordered_json j = {{"a", 0.1 + 0.2}, {"b", {1.0 / 3.0, std::nan("")}}, {"c", "x"}};
  CHECK(json_text(j) == "{\n  \"a\": 0.3,\n  \"b\": [\n    0.333333333333,\n    null\n  ],\n  \"c\": \"x\"\n}\n");
}

TEST_CASE("csv") {
  const CsvTable t = parse_csv("# header comment\nfreq_mhz, amplitude\n1.0,2\n3,4e-1\n", "x.csv");
  CHECK(t.header == std::vector<std::string>{"freq_mhz", "amplitude"});
  CHECK(t.column_values("amplitude") == std::vector<double>{2.0, 0.4});
  CHECK(t.to_string() == "freq_mhz,amplitude\n1,2\n3,0.4\n");
  CHECK_THROWS_AS(t.column("missing"), LookupError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n", "x.csv"), ValidationError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,zz\n", "x.csv"), ValidationError);
  CHECK_THROWS_AS(parse_csv("", "x.csv"), ValidationError);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), LookupError);
}

}
