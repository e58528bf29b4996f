#include "phonoflux/circuit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace phonoflux {

CapacitanceNetwork::CapacitanceNetwork(int n_nodes) {
  if (n_nodes < 1) throw InvalidDimension("network needs at least the ground node");
  const int k = n_nodes - 1;
  cap_ = RealMatrix::Zero(k, k);
  ground_cap_ = RealVector::Zero(k);
  node_map_ = RealMatrix::Zero(n_nodes, k);
  for (int i = 0; i < k; ++i) {
    node_map_(i + 1, i) = 1.0;
    names_.push_back(std::to_string(i + 1));
  }
  floating_.assign(static_cast<std::size_t>(n_nodes), {});
}

void CapacitanceNetwork::add_capacitor(int a, int b, double c_ff) {
  const int k = coordinate_count();
  if (a < 0 || b < 0 || a > k || b > k || a == b) {
    throw ValidationError("capacitor endpoints out of range or identical");
  }
  if (!(c_ff >= 0)) throw ValidationError("capacitance must be nonnegative");
  if (a > 0) cap_(a - 1, a - 1) += c_ff;
  if (b > 0) cap_(b - 1, b - 1) += c_ff;
  if (a > 0 && b > 0) {
    cap_(a - 1, b - 1) -= c_ff;
    cap_(b - 1, a - 1) -= c_ff;
  } else {
    ground_cap_((a > 0 ? a : b) - 1) += c_ff;
  }
}

void CapacitanceNetwork::add_potential(int a, int b, PotentialKind kind, double energy_ghz) {
  const int k = coordinate_count();
  if (a < 0 || b < 0 || a > k || b > k || a == b) {
    throw ValidationError("potential edge endpoints out of range or identical");
  }
  if (!(energy_ghz > 0)) throw ValidationError("potential energy must be positive");
  potentials_.push_back({a, b, kind, energy_ghz});
}

RealMatrix CapacitanceNetwork::maxwell() const {
  const int k = coordinate_count();
  RealMatrix m = RealMatrix::Zero(k + 1, k + 1);
  m.bottomRightCorner(k, k) = cap_;
  m(0, 0) = ground_cap_.sum();
  m.block(0, 1, 1, k) = -ground_cap_.transpose();
  m.block(1, 0, k, 1) = -ground_cap_;
  return m;
}

void CapacitanceNetwork::validate() const {
  const int k = coordinate_count();
  if (k == 0) return;
  if ((cap_ - cap_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cap_.cwiseAbs().maxCoeff())) {
    throw ValidationError("capacitance matrix is not symmetric");
  }
  for (int i = 0; i < k; ++i) {
    const double off = cap_.row(i).cwiseAbs().sum() - std::abs(cap_(i, i));
    if (cap_(i, i) < off - 1e-12 * std::abs(cap_(i, i))) {
      throw ValidationError("capacitance matrix is not diagonally dominant (Maxwell form)");
    }
  }
  Eigen::LLT<RealMatrix> llt(cap_);
  if (llt.info() != Eigen::Success) throw ValidationError("capacitance matrix is not positive definite");
}

CapacitanceNetwork eliminate_free_node(const CapacitanceNetwork& net, const std::vector<int>& subgraph) {
  const int k = net.coordinate_count();
  if (subgraph.empty()) throw PreconditionViolation("empty subgraph");
  std::vector<bool> in(static_cast<std::size_t>(k + 1), false);
  for (int s : subgraph) {
    if (s < 1 || s > k) throw PreconditionViolation("subgraph index out of range (ground cannot be eliminated)");
    in[static_cast<std::size_t>(s)] = true;
  }
  for (const auto& e : net.potentials_) {
    if (in[static_cast<std::size_t>(e.a)] != in[static_cast<std::size_t>(e.b)]) {
      std::ostringstream msg;
      msg << "potential edge (" << e.a << "," << e.b << ") connects the subgraph to the rest of the network";
      throw PreconditionViolation(msg.str());
    }
  }
  const int ref = *std::min_element(subgraph.begin(), subgraph.end());

  // Old coordinates x = P [x_kept; x_ref]; island members keep their slot
  // but now mean Phi_a - Phi_ref.
  std::vector<int> kept;
  for (int i = 1; i <= k; ++i) {
    if (i != ref) kept.push_back(i);
  }
  const int kn = k - 1;
  RealMatrix p = RealMatrix::Zero(k, k);
  for (int c = 0; c < kn; ++c) p(kept[static_cast<std::size_t>(c)] - 1, c) = 1.0;
  for (int i = 1; i <= k; ++i) {
    if (in[static_cast<std::size_t>(i)]) p(i - 1, kn) = 1.0;
  }
  const RealMatrix ct = p.transpose() * net.cap_ * p;
  const double c_bb = ct(kn, kn);
  if (!(c_bb > 0)) throw DegenerateNetwork("island has no capacitance; conserved charge undefined");

  CapacitanceNetwork out(1);
  out.cap_ = ct.topLeftCorner(kn, kn) - ct.topRightCorner(kn, 1) * ct.bottomLeftCorner(1, kn) / c_bb;
  out.cap_ = 0.5 * (out.cap_ + out.cap_.transpose()).eval();
  out.ground_cap_ = out.cap_.rowwise().sum();  // Maxwell form of the reduced block

  std::vector<int> new_index(static_cast<std::size_t>(k + 1), 0);
  for (int c = 0; c < kn; ++c) new_index[static_cast<std::size_t>(kept[static_cast<std::size_t>(c)])] = c + 1;
  for (const auto& e : net.potentials_) {
    PotentialEdge ne = e;
    ne.a = e.a == ref ? 0 : new_index[static_cast<std::size_t>(e.a)];
    ne.b = e.b == ref ? 0 : new_index[static_cast<std::size_t>(e.b)];
    out.potentials_.push_back(ne);
  }
  for (int c = 0; c < kn; ++c) {
    const int old = kept[static_cast<std::size_t>(c)];
    std::string name = net.names_[static_cast<std::size_t>(old - 1)];
    if (in[static_cast<std::size_t>(old)]) name += "-" + net.names_[static_cast<std::size_t>(ref - 1)];
    out.names_.push_back(name);
  }

  const RealMatrix full = net.node_map_ * p;
  out.node_map_ = full.leftCols(kn);
  out.floating_ = net.floating_;
  for (Eigen::Index n = 0; n < full.rows(); ++n) {
    out.floating_[static_cast<std::size_t>(n)].push_back(full(n, kn));
  }
  return out;
}

std::vector<std::vector<int>> find_free_islands(const CapacitanceNetwork& net) {
  const int k = net.coordinate_count();
  std::vector<int> parent(static_cast<std::size_t>(k + 1));
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  for (const auto& e : net.potentials()) {
    const int ra = root(e.a);
    const int rb = root(e.b);
    if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
  }
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(k + 1));
  for (int i = 1; i <= k; ++i) groups[static_cast<std::size_t>(root(i))].push_back(i);
  std::vector<std::vector<int>> islands;
  for (int r = 1; r <= k; ++r) {
    if (!groups[static_cast<std::size_t>(r)].empty()) islands.push_back(groups[static_cast<std::size_t>(r)]);
  }
  return islands;
}

double charging_energy_ghz(double capacitance_ff) {
  if (!(capacitance_ff > 0)) throw DomainError("capacitance must be positive");
  const double e = constants::kElementaryCharge;
  return e * e / (2.0 * constants::kPlanck * capacitance_ff * 1e-15) * 1e-9;
}

double ReducedCircuit::beta(int i, int j) const {
  return inv_cap(i, j) / std::sqrt(inv_cap(i, i) * inv_cap(j, j));
}

std::optional<double> ReducedCircuit::harmonic_frequency(int i) const {
  if (inductive_energy(i) > 0 && junction_energy(i) == 0) {
    return std::sqrt(8.0 * charging_energy(i) * inductive_energy(i));
  }
  return std::nullopt;
}

double ReducedCircuit::coupling(int i, double mode_freq_mhz) const {
  return 2.0 * beta(0, i) * std::sqrt(mode_freq_mhz * 1000.0 * e_c);
}

ReducedCircuit reduce_to_dynamical(const CapacitanceNetwork& net,
                                   const std::vector<CoordinateDef>& coordinate_defs) {
  const int k = net.coordinate_count();
  if (static_cast<int>(coordinate_defs.size()) != k) {
    std::ostringstream msg;
    msg << "network has " << k << " coordinates but " << coordinate_defs.size()
        << " definitions were given; eliminate free islands first";
    throw PreconditionViolation(msg.str());
  }
  const int n_nodes = net.original_node_count();
  RealMatrix d(k, k);
  for (int i = 0; i < k; ++i) {
    const auto& def = coordinate_defs[static_cast<std::size_t>(i)];
    if (def.node_a < 0 || def.node_b < 0 || def.node_a >= n_nodes || def.node_b >= n_nodes) {
      throw PreconditionViolation("coordinate '" + def.name + "' references an unknown node");
    }
    if (net.node_floating(def.node_a) != net.node_floating(def.node_b)) {
      throw PreconditionViolation("coordinate '" + def.name +
                                  "' spans a conserved-charge island boundary");
    }
    d.row(i) = (net.node_expression(def.node_a) - net.node_expression(def.node_b)).transpose();
  }
  Eigen::FullPivLU<RealMatrix> lu(d);
  if (lu.rank() < k) throw DegenerateNetwork("coordinate definitions are linearly dependent");
  Eigen::LLT<RealMatrix> llt(net.capacitance());
  if (llt.info() != Eigen::Success) throw DegenerateNetwork("capacitance matrix is singular");

  ReducedCircuit out;
  for (const auto& def : coordinate_defs) out.coordinates.push_back(def.name);
  const RealMatrix c_inv = llt.solve(RealMatrix::Identity(k, k));
  out.inv_cap = d * c_inv * d.transpose();
  out.inv_cap = 0.5 * (out.inv_cap + out.inv_cap.transpose()).eval();
  out.charging_energy.resize(k);
  for (int i = 0; i < k; ++i) {
    if (!(out.inv_cap(i, i) > 0)) throw DegenerateNetwork("nonpositive inverse capacitance");
    out.charging_energy(i) = charging_energy_ghz(1.0 / out.inv_cap(i, i));
  }

  // Each potential edge must act on exactly one coordinate (up to sign).
  out.inductive_energy = RealVector::Zero(k);
  out.junction_energy = RealVector::Zero(k);
  for (const auto& e : net.potentials()) {
    RealVector expr = RealVector::Zero(k);
    if (e.a > 0) expr(e.a - 1) += 1.0;
    if (e.b > 0) expr(e.b - 1) -= 1.0;
    int match = -1;
    for (int i = 0; i < k && match < 0; ++i) {
      const RealVector row = d.row(i).transpose();
      if ((row - expr).cwiseAbs().maxCoeff() < 1e-12 || (row + expr).cwiseAbs().maxCoeff() < 1e-12) match = i;
    }
    if (match < 0) {
      std::ostringstream msg;
      msg << "potential edge (" << e.a << "," << e.b << ") is not a function of a single coordinate";
      throw PreconditionViolation(msg.str());
    }
    (e.kind == PotentialKind::Inductor ? out.inductive_energy : out.junction_energy)(match) += e.energy;
  }

  out.e_c = out.charging_energy(0);
  out.beta_qm = k > 1 ? out.beta(0, 1) : 0.0;
  out.beta_qr = k > 2 ? out.beta(0, 2) : 0.0;
  return out;
}

double coupling_bound(double beta, double f_m, double f_eg) {
  return 0.5 * std::abs(beta) * std::sqrt(f_m * f_eg);
}

namespace {
constexpr double kA = 8.0 / (constants::kPi * constants::kPi);
}

double ideal_beta_from_k2(double k_squared) {
  if (!(k_squared > 0 && k_squared < 1)) throw DomainError("K^2 must lie in (0, 1)");
  return std::sqrt(kA * k_squared / (1.0 - (1.0 - kA) * k_squared));
}

double k2_from_ideal_beta(double beta) {
  if (!(beta > 0 && beta < 1)) throw DomainError("beta must lie in (0, 1)");
  const double b2 = beta * beta;
  return b2 / (kA + (1.0 - kA) * b2);
}

double k2_from_capacitances(double c_in_ff, double c1_ff) {
  if (!(c_in_ff > 0 && c1_ff > 0)) throw DomainError("capacitances must be positive");
  return k2_from_ideal_beta(std::sqrt(c_in_ff / (c1_ff + c_in_ff)));
}

BvdParams lc_to_bvd(const LcParams& lc) {
  if (!(lc.c_in > 0 && lc.c1 > 0 && lc.l1 > 0)) throw DomainError("LC parameters must be positive");
  const double sum = lc.c_in + lc.c1;
  return {lc.c_in * lc.c1 / sum, lc.c_in * lc.c_in / sum, lc.l1 * sum * sum / (lc.c_in * lc.c_in)};
}

LcParams bvd_to_lc(const BvdParams& bvd) {
  if (!(bvd.c0 > 0 && bvd.c_m > 0 && bvd.l_m > 0)) throw DomainError("BVD parameters must be positive");
  const double c_in = bvd.c0 + bvd.c_m;
  const double c1 = bvd.c0 * c_in / bvd.c_m;
  const double ratio = c_in / (c1 + c_in);
  return {c_in, c1, bvd.l_m * ratio * ratio};
}

double bvd_k_squared(const BvdParams& bvd) { return k2_from_ideal_beta(std::sqrt(bvd.c_m / (bvd.c0 + bvd.c_m))); }

double lc_k_squared(const LcParams& lc) { return k2_from_capacitances(lc.c_in, lc.c1); }

double bvd_series_frequency_mhz(const BvdParams& bvd) {
  return 1.0 / (constants::kTwoPi * std::sqrt(bvd.l_m * 1e-6 * bvd.c_m * 1e-15)) * 1e-6;
}

double lc_parallel_frequency_mhz(const LcParams& lc) {
  return 1.0 / (constants::kTwoPi * std::sqrt(lc.l1 * 1e-6 * lc.c1 * 1e-15)) * 1e-6;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

NetworkFile parse_network(const std::string& text) {
  struct Cap { int a, b; double c; };
  struct Pot { int a, b; PotentialKind kind; double e; };
  std::vector<Cap> caps;
  std::vector<Pot> pots;
  NetworkFile out;
  std::string section;
  int max_node = 0;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      std::ostringstream msg;
      msg << "network line " << line_no << ": " << why;
      throw ValidationError(msg.str());
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "capacitance" && section != "potential" && section != "coordinates") {
        fail("unknown section '" + section + "'");
      }
      continue;
    }
    std::istringstream ls(line);
    if (section == "capacitance") {
      Cap c{};
      if (!(ls >> c.a >> c.b >> c.c) || !(ls >> std::ws).eof()) fail("expected 'node_a node_b value_fF'");
      caps.push_back(c);
      max_node = std::max({max_node, c.a, c.b});
    } else if (section == "potential") {
      Pot p{};
      std::string kind;
      if (!(ls >> p.a >> p.b >> kind >> p.e) || !(ls >> std::ws).eof()) {
        fail("expected 'node_a node_b kind energy_GHz'");
      }
      if (kind == "junction") p.kind = PotentialKind::Junction;
      else if (kind == "inductor") p.kind = PotentialKind::Inductor;
      else fail("unknown potential kind '" + kind + "'");
      pots.push_back(p);
      max_node = std::max({max_node, p.a, p.b});
    } else if (section == "coordinates") {
      CoordinateDef d;
      if (!(ls >> d.name >> d.node_a >> d.node_b) || !(ls >> std::ws).eof()) {
        fail("expected 'name node_a node_b'");
      }
      out.coordinates.push_back(d);
    } else {
      fail("data outside a section");
    }
  }
  out.network = CapacitanceNetwork(max_node + 1);
  for (const auto& c : caps) out.network.add_capacitor(c.a, c.b, c.c);
  for (const auto& p : pots) out.network.add_potential(p.a, p.b, p.kind, p.e);
  for (const auto& d : out.coordinates) {
    if (d.node_a > max_node || d.node_b > max_node) {
      throw ValidationError("coordinate '" + d.name + "' references an unknown node");
    }
  }
  return out;
}

}  // namespace phonoflux
