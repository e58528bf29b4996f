#pragma once

// Dense complex linear algebra and Fock-space primitives.
//
// Conventions used throughout the library:
//  * Hamiltonians are stored as ordinary frequencies E/h.  Qudit circuit
//    energies are in GHz, joint Hamiltonians in MHz.  Factors of 2*pi only
//    appear inside time evolution and rate formulas.
//  * Tensor ordering is qudit (x) mechanics (x) readout; the qudit index is
//    the slowest.

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <vector>

#include "phonoflux/errors.hpp"

namespace phonoflux {

using Complex = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

namespace constants {
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kPlanck = 6.62607015e-34;          // J s
inline constexpr double kBoltzmann = 1.380649e-23;         // J / K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kEulerGamma = 0.57721566490153286061;
}  // namespace constants

/// Truncation dimensions for the qudit-mechanics(-readout) problem.
struct FockSpaceSpec {
  int n_qudit_fock = 100;  ///< harmonic basis used to diagonalize the bare qudit
  int n_qudit_kept = 6;    ///< dressed qudit levels kept before tensoring
  int n_phonon = 10;
  std::optional<int> n_readout;

  void validate() const;
  int joint_dim() const {
    return n_qudit_kept * n_phonon * (n_readout ? *n_readout : 1);
  }
};

/// Density matrix with the usual physical invariants checked on demand.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(OperatorMatrix rho) : rho_(std::move(rho)) {}

  const OperatorMatrix& matrix() const { return rho_; }
  OperatorMatrix& matrix() { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

  double trace() const { return rho_.trace().real(); }
  double purity() const;
  /// Throws ValidationError unless Hermitian, unit trace (1e-9) and PSD (-1e-9).
  void validate(double trace_tol = 1e-9, double eig_tol = 1e-9) const;

 private:
  OperatorMatrix rho_;
};

struct LadderOperators {
  OperatorMatrix annihilation;
  OperatorMatrix creation;
  OperatorMatrix number;
};

LadderOperators ladder_operators(int dim);

OperatorMatrix tensor_product(const OperatorMatrix& a, const OperatorMatrix& b);
RealMatrix tensor_product(const RealMatrix& a, const RealMatrix& b);

/// Relative Frobenius norm of (h - h^dagger).
double hermiticity_defect(const OperatorMatrix& h);

struct EigenSystem {
  RealVector values;       ///< ascending
  OperatorMatrix vectors;  ///< orthonormal columns, first nonzero entry real positive
};

/// Eigen-decomposition of a Hermitian matrix.  Inputs whose relative
/// Hermiticity defect exceeds `tolerance` are rejected.
EigenSystem hermitian_eigensystem(const OperatorMatrix& h, double tolerance = 1e-10);

struct RealEigenSystem {
  RealVector values;
  RealMatrix vectors;
};

/// Real-symmetric variant; same ordering and sign convention.
RealEigenSystem symmetric_eigensystem(const RealMatrix& h, double tolerance = 1e-10);

/// exp(i * scale * h) for Hermitian h, via eigendecomposition.
OperatorMatrix expi_hermitian(const OperatorMatrix& h, double scale = 1.0);

struct ThermalState {
  DensityMatrix rho;
  double truncation_weight = 0.0;  ///< untruncated population beyond dim
  double mean_occupation = 0.0;    ///< Bose-Einstein value of the untruncated state
  Warnings warnings;
};

/// Bose-Einstein occupation 1/(exp(hf/kT)-1).
double bose_einstein_occupation(double freq_hz, double temp_kelvin);

/// Diagonal (1-tau) tau^n state renormalized over the truncated basis.
ThermalState thermal_density_matrix(double freq_hz, double temp_kelvin, int dim);

struct Displacement {
  OperatorMatrix op;
  Warnings warnings;
};

/// D(alpha) = exp(alpha b^dagger - alpha^* b) in a dim-dimensional Fock space.
Displacement displacement_operator(Complex alpha, int dim);

/// <m|D(alpha)|n> of the untruncated operator (associated Laguerre form).
Complex displacement_matrix_element(Complex alpha, int m, int n);

/// Largest deviation of the truncated D(alpha) from the untruncated matrix
/// elements over the lower half of the basis.  Shrinks as dim grows.
double displacement_truncation_residual(Complex alpha, int dim);

}  // namespace phonoflux
