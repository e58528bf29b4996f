// Structured propagation of the qudit-mechanics density matrix.
//
// The state is kept in the bare product basis as two row-major planes
// (re, im).  The Hamiltonian is real symmetric, which splits the commutator
// into real products; the collapse operators are shifts along the phonon
// ladder or block moves between qudit levels, so the dissipator never needs
// a dense product.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <sstream>

#include "phonoflux/dynamics.hpp"
#include "phonoflux/kernels/kernels.hpp"

namespace phonoflux {

namespace {

constexpr double kTwoPi = constants::kTwoPi;

// Commutator-free fourth-order Magnus nodes and weights.
const double kC1 = 0.5 - std::sqrt(3.0) / 6.0;
const double kC2 = 0.5 + std::sqrt(3.0) / 6.0;
const double kA1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
const double kA2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;

void check_finite(const PlanarState& s, const char* where) {
  for (std::size_t i = 0; i < s.re.size(); ++i) {
    if (!std::isfinite(s.re[i]) || !std::isfinite(s.im[i])) {
      throw IntegrationFailure(std::string("non-finite density matrix during ") + where);
    }
  }
}

}  // namespace

struct JointSimulator::Unitary {
  std::vector<double> re, im, adj_re, adj_im;
};

PlanarState PlanarState::from(const DensityMatrix& rho) {
  PlanarState s;
  s.dim = rho.dim();
  const auto n = static_cast<std::size_t>(s.dim);
  s.re.resize(n * n);
  s.im.resize(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Complex v = rho.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      s.re[r * n + c] = v.real();
      s.im[r * n + c] = v.imag();
    }
  }
  return s;
}

DensityMatrix PlanarState::to_density() const {
  const auto n = static_cast<std::size_t>(dim);
  OperatorMatrix m(dim, dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = Complex(re[r * n + c], im[r * n + c]);
    }
  }
  return DensityMatrix(std::move(m));
}

double PlanarState::trace() const {
  double t = 0.0;
  for (int i = 0; i < dim; ++i) t += re[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim + 1)];
  return t;
}

void SimulationSetup::validate() const {
  qudit.validate();
  mech.validate();
  dims.validate();
  rates.validate();
  if (dims.n_readout) throw InvalidDimension("simulations do not include a readout mode");
  if (dims.n_qudit_kept < 2 || dims.n_phonon < 2) {
    throw InvalidDimension("simulations need at least two qudit levels and two phonon levels");
  }
  if (!(t_eff_mk > 0)) throw DomainError("effective temperature must be positive");
  if (!(step_ns > 0) || !(free_step_ns > 0)) throw DomainError("integration steps must be positive");
}

JointSimulator::JointSimulator(const SimulationSetup& setup) : setup_(setup) {
  setup_.validate();
  joint_ = build_joint_hamiltonian(setup_.qudit, FluxBias{setup_.flux}, setup_.mech, std::nullopt,
                                   setup_.dims);
  dressed_ = label_dressed_states(joint_);
  rates_ = collapse_rates(setup_.rates);
  nq_ = setup_.dims.n_qudit_kept;
  nm_ = setup_.dims.n_phonon;
  dim_ = nq_ * nm_;

  // H_d = E_L * delta(phi_e) * theta with delta(phi_e) = 2 pi Phi / Phi0.
  drive_qudit_ = 1000.0 * setup_.qudit.e_l * kTwoPi * joint_.qudit.phi_elements;
  drive_ = tensor_product(drive_qudit_, RealMatrix::Identity(nm_, nm_));
  {
    const Eigen::SelfAdjointEigenSolver<RealMatrix> es(drive_qudit_, Eigen::EigenvaluesOnly);
    drive_norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
  }

  ladder_ = RealMatrix::Zero(nm_, nm_);
  for (int m = 0; m + 1 < nm_; ++m) {
    ladder_(m, m + 1) = std::sqrt(static_cast<double>(m + 1));
    ladder_(m + 1, m) = -std::sqrt(static_cast<double>(m + 1));
  }

  const auto d = static_cast<std::size_t>(dim_);
  std::vector<double> k_diag(d), energy(d), drive_diag(d);
  for (int a = 0; a < dim_; ++a) {
    const int j = a / nm_;
    const int m = a % nm_;
    double k = rates_.kappa_m_down * m + (m + 1 < nm_ ? rates_.kappa_m_up * (m + 1) : 0.0);
    if (j == 0) k += rates_.kappa_q_up;
    if (j == 1) k += rates_.kappa_q_down + rates_.gamma_phi;
    k_diag[static_cast<std::size_t>(a)] = k;
    energy[static_cast<std::size_t>(a)] = joint_.bare_energies(a);
    drive_diag[static_cast<std::size_t>(a)] = drive_qudit_(j, j);
  }
  diag_energy_.resize(d * d);
  diag_drive_.resize(d * d);
  diag_decay_.resize(d * d);
  zeros_.assign(d * d, 0.0);
  jump_down_.assign(d * d, 0.0);
  jump_up_.assign(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    const int ma = static_cast<int>(a) % nm_;
    for (std::size_t b = 0; b < d; ++b) {
      const int mb = static_cast<int>(b) % nm_;
      const std::size_t idx = a * d + b;
      diag_energy_[idx] = kTwoPi * (energy[a] - energy[b]);
      diag_drive_[idx] = kTwoPi * (drive_diag[a] - drive_diag[b]);
      diag_decay_[idx] = -0.5 * (k_diag[a] + k_diag[b]);
      if (ma + 1 < nm_ && mb + 1 < nm_) jump_down_[idx] = std::sqrt(double(ma + 1) * double(mb + 1));
      jump_up_[idx] = std::sqrt(double(ma) * double(mb));
    }
  }
}

DensityMatrix JointSimulator::thermal_state() const {
  const double beta = constants::kPlanck * 1e6 / (constants::kBoltzmann * setup_.t_eff_mk * 1e-3);
  const RealVector& e = dressed_.energies;
  RealVector w = (-(e.array() - e(0)) * beta).exp();
  w /= w.sum();
  const RealMatrix rho = dressed_.vectors * w.asDiagonal() * dressed_.vectors.transpose();
  return DensityMatrix(rho.cast<Complex>());
}

OperatorMatrix JointSimulator::ideal_pi_pulse() const {
  RealMatrix perm = RealMatrix::Identity(dim_, dim_);
  for (int n = 0; n < nm_; ++n) {
    const int g = dressed_.column({0, n, -1});
    const int e = dressed_.column({1, n, -1});
    perm(g, g) = perm(e, e) = 0.0;
    perm(g, e) = perm(e, g) = 1.0;
  }
  return (dressed_.vectors * perm * dressed_.vectors.transpose()).cast<Complex>();
}

OperatorMatrix JointSimulator::ideal_half_pi_pulse() const {
  OperatorMatrix rot = OperatorMatrix::Identity(dim_, dim_);
  const double c = std::sqrt(0.5);
  for (int n = 0; n < nm_; ++n) {
    const int g = dressed_.column({0, n, -1});
    const int e = dressed_.column({1, n, -1});
    rot(g, g) = rot(e, e) = c;
    rot(g, e) = rot(e, g) = Complex(0.0, -c);
  }
  const OperatorMatrix v = dressed_.vectors.cast<Complex>();
  return v * rot * v.transpose();
}

DensityMatrix JointSimulator::apply_unitary(const OperatorMatrix& u, const DensityMatrix& rho) {
  if (u.rows() != rho.dim()) throw InvalidDimension("unitary and state dimensions differ");
  OperatorMatrix out = u * rho.matrix() * u.adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(std::move(out));
}

Populations JointSimulator::populations(const PlanarState& rho) const {
  if (rho.dim != dim_) throw InvalidDimension("state dimension does not match simulator");
  // Only the real plane contributes to <v|rho|v> for real v.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> r(
      rho.re.data(), dim_, dim_);
  const RealMatrix w = r * dressed_.vectors;
  Populations out;
  out.qudit.assign(static_cast<std::size_t>(nq_), 0.0);
  out.phonon.assign(static_cast<std::size_t>(nm_), 0.0);
  for (int k = 0; k < dim_; ++k) {
    const double p = dressed_.vectors.col(k).dot(w.col(k));
    const BareLabel& lbl = dressed_.levels[static_cast<std::size_t>(k)].label;
    out.qudit[static_cast<std::size_t>(lbl.qudit)] += p;
    out.phonon[static_cast<std::size_t>(lbl.phonon)] += p;
  }
  return out;
}

Populations JointSimulator::populations(const DensityMatrix& rho) const {
  return populations(PlanarState::from(rho));
}

double JointSimulator::max_frequency_mhz(const ModulationPulse& pulse) const {
  const double spread = dressed_.energies.maxCoeff() - dressed_.energies.minCoeff();
  const Eigen::SelfAdjointEigenSolver<RealMatrix> es(drive_qudit_, Eigen::EigenvaluesOnly);
  const double drive_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return spread + pulse.gain_k * pulse.v0 * drive_norm;
}

void JointSimulator::symmetrize(PlanarState& rho) const {
  const auto n = static_cast<std::size_t>(dim_);
  for (std::size_t r = 0; r < n; ++r) {
    rho.im[r * n + r] = 0.0;
    for (std::size_t c = r + 1; c < n; ++c) {
      const double re = 0.5 * (rho.re[r * n + c] + rho.re[c * n + r]);
      const double im = 0.5 * (rho.im[r * n + c] - rho.im[c * n + r]);
      rho.re[r * n + c] = rho.re[c * n + r] = re;
      rho.im[r * n + c] = im;
      rho.im[c * n + r] = -im;
    }
  }
}

void JointSimulator::dissipator_rhs(const PlanarState& rho, PlanarState& out, bool coherent,
                                    double flux_phi0) const {
  const kernels::KernelTable& k = kernels::active_kernels();
  const auto d = static_cast<std::size_t>(dim_);
  const std::size_t n2 = d * d;
  const auto nm = static_cast<std::size_t>(nm_);
  // Anticommutator decay, plus the diagonal Hamiltonian when requested.
  if (out.dim != dim_ || out.re.size() != n2 || out.im.size() != n2) {
    out.dim = dim_;
    out.re.assign(n2, 0.0);
    out.im.assign(n2, 0.0);
  }
  const double* dd = coherent ? diag_energy_.data() : zeros_.data();
  const double* dp = coherent ? diag_drive_.data() : zeros_.data();
  k.lindblad_diag(n2, flux_phi0, diag_decay_.data(), dd, dp, rho.re.data(), rho.im.data(),
                  out.re.data(), out.im.data());
  // b rho b^dag and b^dag rho b: diagonal shifts by one phonon in both indices.
  if (rates_.kappa_m_down > 0) {
    k.scaled_hadamard(n2 - d - 1, rates_.kappa_m_down, jump_down_.data(), rho.re.data() + d + 1,
                      out.re.data());
    k.scaled_hadamard(n2 - d - 1, rates_.kappa_m_down, jump_down_.data(), rho.im.data() + d + 1,
                      out.im.data());
  }
  if (rates_.kappa_m_up > 0) {
    k.scaled_hadamard(n2 - d - 1, rates_.kappa_m_up, jump_up_.data() + d + 1, rho.re.data(),
                      out.re.data() + d + 1);
    k.scaled_hadamard(n2 - d - 1, rates_.kappa_m_up, jump_up_.data() + d + 1, rho.im.data(),
                      out.im.data() + d + 1);
  }
  // Qudit jumps move whole (g,g) <-> (e,e) blocks.
  for (std::size_t r = 0; r < nm; ++r) {
    const std::size_t g_row = r * d;
    const std::size_t e_row = (nm + r) * d + nm;
    for (const auto* plane : {&rho.re, &rho.im}) {
      auto& dst = plane == &rho.re ? out.re : out.im;
      if (rates_.kappa_q_down > 0) k.axpy(nm, rates_.kappa_q_down, plane->data() + e_row, dst.data() + g_row);
      if (rates_.kappa_q_up > 0) k.axpy(nm, rates_.kappa_q_up, plane->data() + g_row, dst.data() + e_row);
      if (rates_.gamma_phi > 0) k.axpy(nm, rates_.gamma_phi, plane->data() + e_row, dst.data() + e_row);
    }
  }
}

void JointSimulator::rhs(double flux_phi0, const PlanarState& rho, PlanarState& out) const {
  const kernels::KernelTable& k = kernels::active_kernels();
  const auto d = static_cast<std::size_t>(dim_);
  const std::size_t n2 = d * d;
  const auto nm = static_cast<std::size_t>(nm_);
  const auto nq = static_cast<std::size_t>(nq_);

  dissipator_rhs(rho, out, true, flux_phi0);

  // Off-diagonal Hamiltonian H_off = g A (x) Y + s P_off (x) 1, in angular units.
  const RealMatrix& a = joint_.qudit.charge_generator;
  const double cg = kTwoPi * setup_.mech.g;
  const double cs = kTwoPi * flux_phi0;
  const std::size_t block = nm * d;
  thread_local std::vector<double> t_buf, x_buf;
  t_buf.resize(nq * block);
  x_buf.resize(n2);
  for (int plane = 0; plane < 2; ++plane) {
    const double* m = plane == 0 ? rho.re.data() : rho.im.data();
    // T_k = Y M_k for every qudit block row k.
    std::fill(t_buf.begin(), t_buf.end(), 0.0);
    for (std::size_t kb = 0; kb < nq; ++kb) {
      const double* mk = m + kb * block;
      double* tk = t_buf.data() + kb * block;
      for (std::size_t r = 0; r < nm; ++r) {
        if (r + 1 < nm) k.axpy(d, ladder_(static_cast<int>(r), static_cast<int>(r + 1)), mk + (r + 1) * d, tk + r * d);
        if (r > 0) k.axpy(d, ladder_(static_cast<int>(r), static_cast<int>(r - 1)), mk + (r - 1) * d, tk + r * d);
      }
    }
    std::fill(x_buf.begin(), x_buf.end(), 0.0);
    for (std::size_t j = 0; j < nq; ++j) {
      double* xj = x_buf.data() + j * block;
      for (std::size_t kb = 0; kb < nq; ++kb) {
        if (kb == j) continue;
        const double ca = cg * a(static_cast<int>(j), static_cast<int>(kb));
        const double cp = cs * drive_qudit_(static_cast<int>(j), static_cast<int>(kb));
        k.axpy2(block, ca, t_buf.data() + kb * block, cp, m + kb * block, xj);
      }
    }
    if (plane == 0) {
      k.transpose_combine(d, -1.0, 1.0, x_buf.data(), out.im.data());  // -(H R - R H)
    } else {
      k.transpose_combine(d, 1.0, 1.0, x_buf.data(), out.re.data());  // H I - I H
    }
  }
}

void JointSimulator::exact_factor(double sigma, double h_us, std::vector<double>& re,
                                  std::vector<double>& im) const {
  const auto d = static_cast<std::size_t>(dim_);
  const RealMatrix m = 0.5 * joint_.h + sigma * drive_;
  const Eigen::SelfAdjointEigenSolver<RealMatrix> es(m);
  const RealVector phase = -kTwoPi * h_us * es.eigenvalues();
  const RealMatrix& v = es.eigenvectors();
  // exp(-i 2 pi h M) = W V^T with W = V diag(e^{i phase}); V^T has no
  // imaginary part.
  RealMatrix w_re = v * phase.array().cos().matrix().asDiagonal();
  RealMatrix w_im = v * phase.array().sin().matrix().asDiagonal();
  RealMatrix vt_rm = v;  // column-major V read as row-major is V^T
  std::vector<double> wr(d * d), wi(d * d), zero(d * d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      wr[r * d + c] = w_re(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      wi[r * d + c] = w_im(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  re.resize(d * d);
  im.resize(d * d);
  kernels::active_kernels().zgemm(d, d, d, wr.data(), wi.data(), vt_rm.data(), zero.data(), re.data(), im.data());
}

struct JointSimulator::FactorTable {
  double h_us = 0.0;
  std::vector<double> nodes;    // sigma_j
  std::vector<double> weights;  // barycentric weights
  std::vector<std::vector<double>> re, im;
};

std::unique_ptr<JointSimulator::FactorTable> JointSimulator::factor_table(double sigma_max, double h_ns) const {
  // Every split-step factor is exp(-i 2 pi h (H/2 + sigma D)) for a scalar
  // sigma in [-sigma_max, sigma_max].  The family is entire in sigma with
  // ||d^K/dsigma^K|| <= (2 pi h ||D||)^K, so Chebyshev interpolation on K
  // nodes has error below 2^(1-K) b^K / K!, b = 2 pi h ||D|| sigma_max.
  const double h_us = 1e-3 * h_ns;
  const double b = kTwoPi * h_us * drive_norm_ * sigma_max;
  int k = 2;
  double bound = 1.0;
  for (; k <= 24; ++k) {
    bound = std::pow(2.0, 1.0 - k) * std::pow(b, k) / std::tgamma(k + 1.0);
    if (bound < 1e-14) break;
  }
  if (k > 24 || !(sigma_max > 0.0)) return nullptr;
  auto t = std::make_unique<FactorTable>();
  t->h_us = h_us;
  t->re.resize(static_cast<std::size_t>(k));
  t->im.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double angle = (2.0 * j + 1.0) * constants::kPi / (2.0 * k);
    t->nodes.push_back(sigma_max * std::cos(angle));
    t->weights.push_back((j % 2 == 0 ? 1.0 : -1.0) * std::sin(angle));
    exact_factor(t->nodes.back(), h_us, t->re[static_cast<std::size_t>(j)], t->im[static_cast<std::size_t>(j)]);
  }
  return t;
}

void JointSimulator::table_factor(const FactorTable& t, double sigma, std::vector<double>& re,
                                  std::vector<double>& im) const {
  const std::size_t n2 = t.re[0].size();
  re.assign(n2, 0.0);
  im.assign(n2, 0.0);
  std::vector<double> c(t.nodes.size());
  double denom = 0.0;
  for (std::size_t j = 0; j < t.nodes.size(); ++j) {
    const double diff = sigma - t.nodes[j];
    if (diff == 0.0) {
      re = t.re[j];
      im = t.im[j];
      return;
    }
    c[j] = t.weights[j] / diff;
    denom += c[j];
  }
  const kernels::KernelTable& k = kernels::active_kernels();
  for (std::size_t j = 0; j < t.nodes.size(); ++j) {
    k.axpy(n2, c[j] / denom, t.re[j].data(), re.data());
    k.axpy(n2, c[j] / denom, t.im[j].data(), im.data());
  }
}

JointSimulator::Unitary JointSimulator::step_unitary(const ModulationPulse& pulse, double t0_ns,
                                                     double h_ns, const FactorTable* table) const {
  const double s1 = flux_drive_waveform(pulse, t0_ns + kC1 * h_ns);
  const double s2 = flux_drive_waveform(pulse, t0_ns + kC2 * h_ns);
  const double h_us = 1e-3 * h_ns;
  const auto d = static_cast<std::size_t>(dim_);
  const bool use_table = table != nullptr && std::abs(table->h_us - h_us) <= 1e-15 * h_us;

  std::vector<double> lr, li, rr, ri;
  const double sl = kA1 * s1 + kA2 * s2;  // later node weighted, applied last
  const double sr = kA2 * s1 + kA1 * s2;
  if (use_table) {
    table_factor(*table, sl, lr, li);
    table_factor(*table, sr, rr, ri);
  } else {
    exact_factor(sl, h_us, lr, li);
    exact_factor(sr, h_us, rr, ri);
  }
  Unitary u;
  u.re.resize(d * d);
  u.im.resize(d * d);
  kernels::active_kernels().zgemm(d, d, d, lr.data(), li.data(), rr.data(), ri.data(), u.re.data(),
                                  u.im.data());
  u.adj_re.resize(d * d);
  u.adj_im.resize(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      u.adj_re[r * d + c] = u.re[c * d + r];
      u.adj_im[r * d + c] = -u.im[c * d + r];
    }
  }
  return u;
}

void JointSimulator::apply_step(const Unitary& u, PlanarState& rho, PlanarState& scratch) const {
  const auto d = static_cast<std::size_t>(dim_);
  const kernels::KernelTable& k = kernels::active_kernels();
  scratch.re.resize(d * d);
  scratch.im.resize(d * d);
  k.zgemm(d, d, d, u.re.data(), u.im.data(), rho.re.data(), rho.im.data(), scratch.re.data(),
          scratch.im.data());
  k.zgemm(d, d, d, scratch.re.data(), scratch.im.data(), u.adj_re.data(), u.adj_im.data(),
          rho.re.data(), rho.im.data());
}

void JointSimulator::dissipate(PlanarState& rho, double h_us) const {
  if (h_us <= 0) return;
  const std::size_t n2 = rho.re.size();
  const kernels::KernelTable& k = kernels::active_kernels();
  thread_local PlanarState k1, k2, k3, k4, tmp;
  for (PlanarState* s : {&k1, &k2, &k3, &k4, &tmp}) {
    s->dim = rho.dim;
    s->re.resize(n2);
    s->im.resize(n2);
  }
  dissipator_rhs(rho, k1);
  k.axpyz(n2, 0.5 * h_us, k1.re.data(), rho.re.data(), tmp.re.data());
  k.axpyz(n2, 0.5 * h_us, k1.im.data(), rho.im.data(), tmp.im.data());
  dissipator_rhs(tmp, k2);
  k.axpyz(n2, 0.5 * h_us, k2.re.data(), rho.re.data(), tmp.re.data());
  k.axpyz(n2, 0.5 * h_us, k2.im.data(), rho.im.data(), tmp.im.data());
  dissipator_rhs(tmp, k3);
  k.axpyz(n2, h_us, k3.re.data(), rho.re.data(), tmp.re.data());
  k.axpyz(n2, h_us, k3.im.data(), rho.im.data(), tmp.im.data());
  dissipator_rhs(tmp, k4);
  const double w = h_us / 6.0;
  k.axpy2(n2, w, k1.re.data(), 2.0 * w, k2.re.data(), rho.re.data());
  k.axpy2(n2, 2.0 * w, k3.re.data(), w, k4.re.data(), rho.re.data());
  k.axpy2(n2, w, k1.im.data(), 2.0 * w, k2.im.data(), rho.im.data());
  k.axpy2(n2, 2.0 * w, k3.im.data(), w, k4.im.data(), rho.im.data());
}

PlanarState JointSimulator::run_pulse(const ModulationPulse& pulse, const PlanarState& rho_in,
                                      PulseIntegrator integrator, double step_ns) const {
  pulse.validate();
  if (rho_in.dim != dim_) throw InvalidDimension("state dimension does not match simulator");
  PlanarState rho = rho_in;
  PlanarState scratch;
  scratch.dim = dim_;

  if (integrator == PulseIntegrator::Rk4) {
    const double f_max = max_frequency_mhz(pulse);
    const double h_target = step_ns > 0 ? step_ns : 1e3 / (50.0 * f_max);
    const long n = static_cast<long>(std::ceil(pulse.tau_mod / h_target - 1e-9));
    if (n <= 0 || n > 1000000000L) throw IntegrationFailure("RK4 step count out of range");
    const double h_ns = pulse.tau_mod / static_cast<double>(n);
    const double h = 1e-3 * h_ns;
    const std::size_t n2 = rho.re.size();
    const kernels::KernelTable& k = kernels::active_kernels();
    PlanarState k1, k2, k3, k4, tmp;
    for (PlanarState* s : {&k1, &k2, &k3, &k4, &tmp}) {
      s->dim = dim_;
      s->re.resize(n2);
      s->im.resize(n2);
    }
    for (long i = 0; i < n; ++i) {
      const double t = h_ns * static_cast<double>(i);
      const double f0 = flux_drive_waveform(pulse, t);
      const double fm = flux_drive_waveform(pulse, t + 0.5 * h_ns);
      const double f1 = flux_drive_waveform(pulse, t + h_ns);
      rhs(f0, rho, k1);
      k.axpyz(n2, 0.5 * h, k1.re.data(), rho.re.data(), tmp.re.data());
      k.axpyz(n2, 0.5 * h, k1.im.data(), rho.im.data(), tmp.im.data());
      rhs(fm, tmp, k2);
      k.axpyz(n2, 0.5 * h, k2.re.data(), rho.re.data(), tmp.re.data());
      k.axpyz(n2, 0.5 * h, k2.im.data(), rho.im.data(), tmp.im.data());
      rhs(fm, tmp, k3);
      k.axpyz(n2, h, k3.re.data(), rho.re.data(), tmp.re.data());
      k.axpyz(n2, h, k3.im.data(), rho.im.data(), tmp.im.data());
      rhs(f1, tmp, k4);
      const double w = h / 6.0;
      k.axpy2(n2, w, k1.re.data(), 2.0 * w, k2.re.data(), rho.re.data());
      k.axpy2(n2, 2.0 * w, k3.re.data(), w, k4.re.data(), rho.re.data());
      k.axpy2(n2, w, k1.im.data(), 2.0 * w, k2.im.data(), rho.im.data());
      k.axpy2(n2, 2.0 * w, k3.im.data(), w, k4.im.data(), rho.im.data());
      symmetrize(rho);
    }
    check_finite(rho, "RK4 pulse integration");
    return rho;
  }

  // Split step: e^{D h/2} U e^{D h/2} with adjacent dissipator halves merged.
  // Steps divide the modulation period so flat-top propagators repeat.
  const double period = 1e3 / pulse.f_mod;
  const double target = step_ns > 0 ? step_ns : setup_.step_ns;
  const long per_period = std::max(1L, static_cast<long>(std::ceil(period / target - 1e-9)));
  const double dt = period / static_cast<double>(per_period);
  const long n_full = static_cast<long>(std::floor(pulse.tau_mod / dt + 1e-9));
  const double rest = pulse.tau_mod - dt * static_cast<double>(n_full);
  const long n_steps = n_full + (rest > 1e-9 * dt ? 1 : 0);

  std::vector<std::unique_ptr<Unitary>> flat_cache(static_cast<std::size_t>(per_period));
  std::unique_ptr<Unitary> static_u;
  const bool undriven = pulse.v0 == 0.0;
  const std::unique_ptr<FactorTable> table =
      undriven ? nullptr : factor_table((std::abs(kA1) + kA2) * pulse.gain_k * std::abs(pulse.v0), dt);

  double prev_h = 0.0;
  for (long i = 0; i < n_steps; ++i) {
    const double t0 = dt * static_cast<double>(i);
    const double h = i < n_full ? dt : rest;
    dissipate(rho, 1e-3 * 0.5 * (prev_h + h));
    if (undriven && h == dt) {
      if (!static_u) static_u = std::make_unique<Unitary>(step_unitary(pulse, t0, h));
      apply_step(*static_u, rho, scratch);
    } else if (h == dt && t0 >= pulse.tau_r && t0 + h <= pulse.tau_mod - pulse.tau_r) {
      auto& slot = flat_cache[static_cast<std::size_t>(i % per_period)];
      if (!slot) slot = std::make_unique<Unitary>(step_unitary(pulse, t0, h, table.get()));
      apply_step(*slot, rho, scratch);
    } else {
      apply_step(step_unitary(pulse, t0, h, table.get()), rho, scratch);
    }
    symmetrize(rho);
    prev_h = h;
  }
  dissipate(rho, 1e-3 * 0.5 * prev_h);
  symmetrize(rho);
  check_finite(rho, "split-step pulse integration");
  return rho;
}

PlanarState JointSimulator::free_evolution(const PlanarState& rho_in, double duration_us) const {
  if (duration_us < 0) throw DomainError("free evolution duration must be nonnegative");
  if (rho_in.dim != dim_) throw InvalidDimension("state dimension does not match simulator");
  PlanarState rho = rho_in;
  if (duration_us == 0) return rho;
  const double target = setup_.free_step_ns * 1e-3;
  const long n = std::max(1L, static_cast<long>(std::ceil(duration_us / target - 1e-9)));
  const double h = duration_us / static_cast<double>(n);

  const auto d = static_cast<std::size_t>(dim_);
  const RealMatrix& v = dressed_.vectors;
  const RealVector phase = -kTwoPi * h * dressed_.energies;
  const RealMatrix ur = v * phase.array().cos().matrix().asDiagonal() * v.transpose();
  const RealMatrix ui = v * phase.array().sin().matrix().asDiagonal() * v.transpose();
  Unitary u;
  u.re.assign(ur.data(), ur.data() + d * d);
  u.im.assign(ui.data(), ui.data() + d * d);
  // U is complex symmetric, so U^dagger = conj(U).
  u.adj_re = u.re;
  u.adj_im = u.im;
  for (double& x : u.adj_im) x = -x;

  PlanarState scratch;
  scratch.dim = dim_;
  dissipate(rho, 0.5 * h);
  for (long i = 0; i < n; ++i) {
    apply_step(u, rho, scratch);
    symmetrize(rho);
    dissipate(rho, i + 1 < n ? h : 0.5 * h);
  }
  symmetrize(rho);
  check_finite(rho, "free evolution");
  return rho;
}

LindbladModel JointSimulator::lindblad_model(const ModulationPulse& pulse) const {
  LindbladModel model;
  model.h0 = joint_.h.cast<Complex>();
  model.drive_operator = drive_.cast<Complex>();
  model.drive = [pulse](double t_us) { return flux_drive_waveform(pulse, 1e3 * t_us); };
  model.collapse_ops = collapse_ops_from_rates(setup_.rates, setup_.dims);
  const Eigen::SelfAdjointEigenSolver<RealMatrix> es(drive_qudit_, Eigen::EigenvaluesOnly);
  model.drive_bound_mhz = pulse.gain_k * pulse.v0 * es.eigenvalues().cwiseAbs().maxCoeff();
  return model;
}

}  // namespace phonoflux
