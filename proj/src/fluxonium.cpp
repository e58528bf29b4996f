#include "phonoflux/fluxonium.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

namespace phonoflux {

// The Hamiltonian is written in the shifted variable theta = phi + phi_e:
//   H = sqrt(8 E_L E_C)(N + 1/2) - E_J [cos(phi_e) cos(theta) + sin(phi_e) sin(theta)]
// so cos/sin(theta) do not depend on flux and the reflection
// phi_e -> 2 pi - phi_e is exact (theta -> -theta) in any truncation.

void FluxoniumParams::validate() const {
  if (!(e_c > 0) || !(e_j > 0) || !(e_l > 0)) {
    throw DomainError("fluxonium energies E_C, E_J, E_L must all be positive");
  }
}

FluxBias FluxBias::from_volts(double volts, double v_period, double v_half) {
  if (!(v_period > 0)) throw DomainError("voltage period must be positive");
  return FluxBias{0.5 + (volts - v_half) / v_period};
}

namespace {

struct TrigCache {
  double phi_zpf = -1.0;
  int n_fock = 0;
  RealMatrix theta;
  RealMatrix cos_theta;
  RealMatrix sin_theta;
};

// Shared across threads; the matrices only depend on (phi_zpf, n_fock) so a
// small keyed cache serves parameter sweeps and fits.
const TrigCache& trig_matrices(double phi_zpf, int n_fock) {
  static std::mutex mutex;
  static std::vector<std::shared_ptr<TrigCache>> entries;
  thread_local std::shared_ptr<TrigCache> cached;
  if (cached && cached->phi_zpf == phi_zpf && cached->n_fock == n_fock) return *cached;

  {
    std::lock_guard<std::mutex> lock(mutex);
    for (const auto& e : entries) {
      if (e->phi_zpf == phi_zpf && e->n_fock == n_fock) {
        cached = e;
        return *cached;
      }
    }
  }
  auto entry = std::make_shared<TrigCache>();
  entry->phi_zpf = phi_zpf;
  entry->n_fock = n_fock;
  entry->theta = RealMatrix::Zero(n_fock, n_fock);
  for (int m = 0; m + 1 < n_fock; ++m) {
    const double v = phi_zpf * std::sqrt(static_cast<double>(m + 1));
    entry->theta(m, m + 1) = v;
    entry->theta(m + 1, m) = v;
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(entry->theta);
  const RealVector& lam = es.eigenvalues();
  const RealMatrix& vec = es.eigenvectors();
  entry->cos_theta = vec * lam.array().cos().matrix().asDiagonal() * vec.transpose();
  entry->sin_theta = vec * lam.array().sin().matrix().asDiagonal() * vec.transpose();

  std::lock_guard<std::mutex> lock(mutex);
  if (entries.size() > 64) entries.erase(entries.begin());
  entries.push_back(entry);
  cached = entry;
  return *cached;
}

RealMatrix hamiltonian_matrix(const FluxoniumParams& p, const FluxBias& flux, int n_fock) {
  const double phi_zpf = std::pow(2.0 * p.e_c / p.e_l, 0.25);
  const TrigCache& trig = trig_matrices(phi_zpf, n_fock);
  const double omega_p = std::sqrt(8.0 * p.e_l * p.e_c);
  const double phi_e = flux.phi_e();
  RealMatrix h = -p.e_j * (std::cos(phi_e) * trig.cos_theta + std::sin(phi_e) * trig.sin_theta);
  for (int m = 0; m < n_fock; ++m) h(m, m) += omega_p * (m + 0.5);
  return h;
}

RealVector lowest_energies(const FluxoniumParams& p, const FluxBias& flux, int n_fock, int count) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(hamiltonian_matrix(p, flux, n_fock),
                                               Eigen::EigenvaluesOnly);
  return es.eigenvalues().head(count);
}

Warnings convergence_warnings(const FluxoniumParams& p, const FluxBias& flux, int n_fock) {
  Warnings w;
  const int count = std::min(6, n_fock);
  const RealVector a = lowest_energies(p, flux, n_fock, count);
  const RealVector b = lowest_energies(p, flux, 2 * n_fock, count);
  const RealVector ta = a.array() - a(0);
  const RealVector tb = b.array() - b(0);
  const double shift = (ta - tb).cwiseAbs().maxCoeff();
  if (shift > 1e-6) {
    std::ostringstream msg;
    msg << "fluxonium basis n_fock=" << n_fock << " not converged: low levels shift by "
        << shift * 1e6 << " kHz on doubling";
    w.push_back(msg.str());
  }
  return w;
}

void check_basis(const FluxoniumParams& p, int n_fock) {
  p.validate();
  if (n_fock < 20) throw InvalidDimension("fluxonium basis requires n_fock >= 20");
}

}  // namespace

FluxoniumOperators fluxonium_operators(const FluxoniumParams& p, const FluxBias& flux, int n_fock,
                                       bool check_convergence) {
  check_basis(p, n_fock);
  const double phi_zpf = std::pow(2.0 * p.e_c / p.e_l, 0.25);
  const double n_zpf = std::pow(p.e_l / (32.0 * p.e_c), 0.25);

  FluxoniumOperators ops;
  ops.hamiltonian = hamiltonian_matrix(p, flux, n_fock);
  ops.phi = trig_matrices(phi_zpf, n_fock).theta;
  ops.charge_generator = RealMatrix::Zero(n_fock, n_fock);
  ops.charge_squared = RealMatrix::Zero(n_fock, n_fock);
  const double nz2 = n_zpf * n_zpf;
  for (int m = 0; m < n_fock; ++m) {
    ops.charge_squared(m, m) = nz2 * (2.0 * m + 1.0);
    if (m + 1 < n_fock) {
      const double v = n_zpf * std::sqrt(static_cast<double>(m + 1));
      ops.charge_generator(m + 1, m) = v;
      ops.charge_generator(m, m + 1) = -v;
    }
    if (m + 2 < n_fock) {
      const double v = -nz2 * std::sqrt(static_cast<double>((m + 1) * (m + 2)));
      ops.charge_squared(m, m + 2) = v;
      ops.charge_squared(m + 2, m) = v;
    }
  }
  if (check_convergence) ops.warnings = convergence_warnings(p, flux, n_fock);
  return ops;
}

OperatorMatrix build_fluxonium_hamiltonian(const FluxoniumParams& p, const FluxBias& flux,
                                           int n_fock, Warnings* warnings) {
  check_basis(p, n_fock);
  if (warnings != nullptr) {
    Warnings w = convergence_warnings(p, flux, n_fock);
    warnings->insert(warnings->end(), w.begin(), w.end());
  }
  return hamiltonian_matrix(p, flux, n_fock).cast<Complex>();
}

QuditSpectrum qudit_spectrum(const FluxoniumParams& p, const FluxBias& flux, int n_levels,
                             int n_fock, bool check_convergence) {
  check_basis(p, n_fock);
  if (n_levels < 1 || n_levels > n_fock / 4) {
    throw InvalidDimension("qudit_spectrum requires 1 <= n_levels <= n_fock / 4");
  }
  const FluxoniumOperators ops = fluxonium_operators(p, flux, n_fock, check_convergence);
  const RealEigenSystem es = symmetric_eigensystem(ops.hamiltonian);
  const RealMatrix v = es.vectors.leftCols(n_levels);

  QuditSpectrum out;
  out.energies = es.values.head(n_levels).array() - es.values(0);
  out.charge_generator = v.transpose() * ops.charge_generator * v;
  out.charge_generator = 0.5 * (out.charge_generator - out.charge_generator.transpose()).eval();
  out.charge_elements = out.charge_generator.cwiseAbs();
  out.phi_elements = v.transpose() * ops.phi * v;
  out.phi_elements = 0.5 * (out.phi_elements + out.phi_elements.transpose()).eval();
  out.charge_squared_diag = (v.transpose() * ops.charge_squared * v).diagonal();
  out.warnings = ops.warnings;
  return out;
}

double transition_frequency(const FluxoniumParams& p, const FluxBias& flux,
                            std::pair<int, int> transition, int n_fock) {
  check_basis(p, n_fock);
  const int top = std::max(transition.first, transition.second);
  if (transition.first < 0 || transition.second < 0 || top >= n_fock) {
    throw InvalidDimension("transition index outside basis");
  }
  const RealVector e = lowest_energies(p, flux, n_fock, top + 1);
  return e(transition.second) - e(transition.first);
}

std::vector<std::pair<double, double>> tuning_curve(const FluxoniumParams& p,
                                                    const std::vector<double>& flux_grid,
                                                    std::pair<int, int> transition, int n_fock) {
  if (flux_grid.empty()) throw ValidationError("tuning_curve: empty flux grid");
  std::vector<std::pair<double, double>> out;
  out.reserve(flux_grid.size());
  for (double f : flux_grid) {
    out.emplace_back(f, transition_frequency(p, FluxBias{f}, transition, n_fock));
  }
  return out;
}

FluxSlope flux_slope(const FluxoniumParams& p, const FluxBias& flux, std::pair<int, int> transition,
                     int n_fock) {
  constexpr double h = 1e-5;
  auto diff = [&](double step) {
    const double up = transition_frequency(p, FluxBias{flux.phi_e_over_phi0 + step}, transition, n_fock);
    const double down =
        transition_frequency(p, FluxBias{flux.phi_e_over_phi0 - step}, transition, n_fock);
    return (up - down) / (2.0 * step);
  };
  const double d1 = diff(h);
  const double d2 = diff(0.5 * h);
  FluxSlope out;
  out.value = (4.0 * d2 - d1) / 3.0;
  out.richardson_gap = std::abs(d1 - d2);
  if (out.richardson_gap > 1e-3 * std::max(std::abs(out.value), 1e-3)) {
    out.warnings.push_back("flux_slope: step-halving disagreement above 0.1%");
  }
  return out;
}

}  // namespace phonoflux
