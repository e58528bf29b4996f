#include "phonoflux/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace phonoflux {

void FockSpaceSpec::validate() const {
  if (n_qudit_fock < 1 || n_qudit_kept < 1 || n_phonon < 1 ||
      (n_readout && *n_readout < 1)) {
    throw InvalidDimension("Fock space dimensions must all be >= 1");
  }
  if (n_qudit_kept > n_qudit_fock) {
    throw InvalidDimension("n_qudit_kept exceeds n_qudit_fock");
  }
}

double DensityMatrix::purity() const { return (rho_ * rho_).trace().real(); }

void DensityMatrix::validate(double trace_tol, double eig_tol) const {
  if (rho_.rows() != rho_.cols() || rho_.rows() == 0) {
    throw ValidationError("density matrix must be square and nonempty");
  }
  if (hermiticity_defect(rho_) > 1e-9) {
    throw ValidationError("density matrix is not Hermitian");
  }
  if (std::abs(trace() - 1.0) > trace_tol) {
    throw ValidationError("density matrix trace deviates from 1");
  }
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(rho_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -eig_tol) {
    throw ValidationError("density matrix has a negative eigenvalue");
  }
}

LadderOperators ladder_operators(int dim) {
  if (dim < 2) throw InvalidDimension("ladder_operators requires dim >= 2");
  OperatorMatrix a = OperatorMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  OperatorMatrix ad = a.adjoint();
  OperatorMatrix num = OperatorMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) num(n, n) = static_cast<double>(n);
  return {std::move(a), std::move(ad), std::move(num)};
}

namespace {

template <typename M>
M kron_impl(const M& a, const M& b) {
  M out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// First component with magnitude above a small fraction of the column norm
// is rotated to the positive real axis.
template <typename Col>
void fix_phase(Col&& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-8 * scale) {
      using Scalar = typename std::decay_t<Col>::Scalar;
      if constexpr (std::is_same_v<Scalar, Complex>) {
        const Complex phase = std::conj(v(i)) / std::abs(v(i));
        v *= phase;
        v(i) = Complex(v(i).real(), 0.0);
      } else {
        if (v(i) < 0) v = -v;
      }
      return;
    }
  }
}

}  // namespace

OperatorMatrix tensor_product(const OperatorMatrix& a, const OperatorMatrix& b) {
  return kron_impl(a, b);
}

RealMatrix tensor_product(const RealMatrix& a, const RealMatrix& b) { return kron_impl(a, b); }

double hermiticity_defect(const OperatorMatrix& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  const double norm = h.norm();
  if (norm == 0.0) return 0.0;
  return (h - h.adjoint()).norm() / norm;
}

EigenSystem hermitian_eigensystem(const OperatorMatrix& h, double tolerance) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw ValidationError("hermitian_eigensystem: matrix must be square and nonempty");
  }
  if (hermiticity_defect(h) > tolerance) {
    throw ValidationError("hermitian_eigensystem: input is not Hermitian");
  }
  // Real-symmetric inputs take the cheaper real path.
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    RealEigenSystem r = symmetric_eigensystem(h.real(), tolerance);
    return {std::move(r.values), r.vectors.cast<Complex>()};
  }
  const OperatorMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(sym);
  if (es.info() != Eigen::Success) throw ValidationError("eigensolver failed to converge");
  EigenSystem out{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) fix_phase(out.vectors.col(k));
  return out;
}

RealEigenSystem symmetric_eigensystem(const RealMatrix& h, double tolerance) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw ValidationError("symmetric_eigensystem: matrix must be square and nonempty");
  }
  const double norm = h.norm();
  if (norm > 0 && (h - h.transpose()).norm() / norm > tolerance) {
    throw ValidationError("symmetric_eigensystem: input is not symmetric");
  }
  const RealMatrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(sym);
  if (es.info() != Eigen::Success) throw ValidationError("eigensolver failed to converge");
  RealEigenSystem out{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) fix_phase(out.vectors.col(k));
  return out;
}

OperatorMatrix expi_hermitian(const OperatorMatrix& h, double scale) {
  const EigenSystem es = hermitian_eigensystem(h);
  Eigen::VectorXcd phases(es.values.size());
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    phases(k) = std::polar(1.0, scale * es.values(k));
  }
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

double bose_einstein_occupation(double freq_hz, double temp_kelvin) {
  if (!(temp_kelvin > 0.0)) throw DomainError("temperature must be positive");
  if (!(freq_hz > 0.0)) throw DomainError("frequency must be positive");
  const double x = constants::kPlanck * freq_hz / (constants::kBoltzmann * temp_kelvin);
  return 1.0 / std::expm1(x);
}

ThermalState thermal_density_matrix(double freq_hz, double temp_kelvin, int dim) {
  if (dim < 1) throw InvalidDimension("thermal_density_matrix requires dim >= 1");
  if (!(temp_kelvin > 0.0)) throw DomainError("temperature must be positive");
  if (!(freq_hz > 0.0)) throw DomainError("frequency must be positive");
  const double x = constants::kPlanck * freq_hz / (constants::kBoltzmann * temp_kelvin);
  const double tau = std::exp(-x);

  ThermalState out;
  out.mean_occupation = 1.0 / std::expm1(x);
  out.truncation_weight = std::pow(tau, dim);

  RealVector p(dim);
  double weight = 1.0;
  for (int n = 0; n < dim; ++n) {
    p(n) = weight;
    weight *= tau;
  }
  p /= p.sum();
  out.rho = DensityMatrix(p.cast<Complex>().asDiagonal().toDenseMatrix());
  if (out.truncation_weight >= 1e-6) {
    std::ostringstream msg;
    msg << "thermal state truncated at dim=" << dim << " discards weight "
        << out.truncation_weight;
    out.warnings.push_back(msg.str());
  }
  return out;
}

Displacement displacement_operator(Complex alpha, int dim) {
  if (dim < 2) throw InvalidDimension("displacement_operator requires dim >= 2");
  const LadderOperators ops = ladder_operators(dim);
  // alpha b^dag - alpha^* b = i * G with G Hermitian.
  const OperatorMatrix generator = alpha * ops.creation - std::conj(alpha) * ops.annihilation;
  const OperatorMatrix hermitian = Complex(0.0, -1.0) * generator;
  Displacement out{expi_hermitian(0.5 * (hermitian + hermitian.adjoint())), {}};
  const double mag = std::abs(alpha);
  if (mag * mag + 3.0 * mag >= dim) {
    std::ostringstream msg;
    msg << "displacement |alpha|=" << mag << " is large for dim=" << dim;
    out.warnings.push_back(msg.str());
  }
  return out;
}

Complex displacement_matrix_element(Complex alpha, int m, int n) {
  if (m < 0 || n < 0) throw InvalidDimension("Fock indices must be nonnegative");
  // For m >= n: sqrt(n!/m!) alpha^(m-n) e^{-|a|^2/2} L_n^{(m-n)}(|a|^2);
  // the m < n case follows from D(alpha)^dagger = D(-alpha).
  const bool swap = m < n;
  const int lo = swap ? m : n;
  const int hi = swap ? n : m;
  const Complex a = swap ? -alpha : alpha;
  const double x = std::norm(alpha);
  const int k = hi - lo;

  double l_prev = 1.0;
  double l_cur = 1.0 + k - x;
  double laguerre = lo == 0 ? 1.0 : l_cur;
  for (int j = 1; j < lo; ++j) {
    const double next = ((2.0 * j + 1.0 + k - x) * l_cur - (j + k) * l_prev) / (j + 1.0);
    l_prev = l_cur;
    l_cur = next;
    laguerre = l_cur;
  }
  double log_ratio = 0.0;  // log sqrt(lo!/hi!)
  for (int j = lo + 1; j <= hi; ++j) log_ratio -= 0.5 * std::log(static_cast<double>(j));
  Complex power = 1.0;
  for (int j = 0; j < k; ++j) power *= a;
  const Complex element = std::exp(log_ratio - 0.5 * x) * power * laguerre;
  return swap ? std::conj(element) : element;
}

double displacement_truncation_residual(Complex alpha, int dim) {
  const OperatorMatrix d = displacement_operator(alpha, dim).op;
  double worst = 0.0;
  const int half = dim / 2;
  for (int m = 0; m < half; ++m) {
    for (int n = 0; n < half; ++n) {
      worst = std::max(worst, std::abs(d(m, n) - displacement_matrix_element(alpha, m, n)));
    }
  }
  return worst;
}

}  // namespace phonoflux
