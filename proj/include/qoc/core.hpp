#pragma once

// Dense Hilbert- and Liouville-space algebra for finite-level quantum systems:
// Hermitian operators, density matrices, commutator (superoperator) action,
// the Hilbert-Schmidt inner product and Hermitian eigendecompositions.
//
// Superoperators are never materialized as N^2 x N^2 matrices. The commutator
// action [H, rho] and eigenbasis conjugations give everything the propagator
// and optimizer need at O(N^3) cost.

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qoc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// Relative tolerance for "is Hermitian" checks (scaled by the largest entry).
inline constexpr double kHermitianTol = 1e-12;
// Absolute tolerance on tr(rho) = 1 and on eigenvalue positivity of states.
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols())
    throw ShapeError(std::string(who) + ": matrix is " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected square");
}

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(who) + ": dimension mismatch (" +
                     std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + ")");
}

// Max-norm deviation from Hermiticity relative to the largest entry.
inline double hermiticity_defect(const Matrix& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

// N x N complex Hermitian matrix (free Hamiltonian, dipole operator,
// observable). Validates Hermiticity and dim >= 2 on construction.
class HermitianOperator {
 public:
  explicit HermitianOperator(Matrix entries) : m_(std::move(entries)) {
    require_square(m_, "HermitianOperator");
    if (m_.rows() < 2)
      throw InvariantError("HermitianOperator: dim must be >= 2, got " +
                           std::to_string(m_.rows()));
    const double defect = hermiticity_defect(m_);
    if (defect > kHermitianTol)
      throw InvariantError("HermitianOperator: not Hermitian (relative defect " +
                           std::to_string(defect) + ")");
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

// Frobenius (Hilbert-Schmidt) norm, sqrt(tr(A^dag A)).
inline double hs_norm(const Matrix& a) {
  require_square(a, "hs_norm");
  return a.norm();
}

// Liouville-space inner product <<A|B>> = tr(A^dag B).
inline Complex liouville_inner(const Matrix& a, const Matrix& b) {
  require_square(a, "liouville_inner");
  require_square(b, "liouville_inner");
  require_same_dim(a, b, "liouville_inner");
  return (a.adjoint() * b).trace();
}

// Commutator action [H, rho] = H rho - rho H, i.e. the superoperator L_H
// applied to rho. Anti-Hermitian whenever rho is Hermitian.
inline Matrix commutator_action(const HermitianOperator& h, const Matrix& rho) {
  require_square(rho, "commutator_action");
  require_same_dim(h.matrix(), rho, "commutator_action");
  return h.matrix() * rho - rho * h.matrix();
}

// Hermitian, unit-trace, positive-semidefinite state. The PSD check runs a
// full eigendecomposition; fine for the dense N <= 32 regime this targets.
class DensityState {
 public:
  explicit DensityState(Matrix entries) : m_(std::move(entries)) {
    require_square(m_, "DensityState");
    const double defect = hermiticity_defect(m_);
    if (defect > kHermitianTol)
      throw InvariantError("DensityState: not Hermitian (relative defect " +
                           std::to_string(defect) + ")");
    const Complex tr = m_.trace();
    if (std::abs(tr - Complex(1.0, 0.0)) > kTraceTol)
      throw InvariantError("DensityState: trace " + std::to_string(tr.real()) +
                           (tr.imag() >= 0 ? "+" : "") + std::to_string(tr.imag()) +
                           "i, expected 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NumericError("DensityState: eigensolver failed");
    if (es.eigenvalues().minCoeff() < -kPsdTol)
      throw InvariantError("DensityState: negative eigenvalue " +
                           std::to_string(es.eigenvalues().minCoeff()));
    const double purity = m_.squaredNorm();  // tr(rho^2) for Hermitian rho
    if (purity > 1.0 + kTraceTol)
      throw InvariantError("DensityState: tr(rho^2) = " + std::to_string(purity) +
                           " exceeds 1");
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  // tr(rho^2); 1 for pure states, conserved under unitary evolution.
  double purity() const { return m_.squaredNorm(); }

 private:
  Matrix m_;
};

// Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian
// operator. In Liouville space the commutator superoperator L_X inherits this
// spectrum as all pairwise differences x_i - x_j with eigenmatrices
// |x_i><x_j|, so the Hilbert-space pair is all the propagator ever needs.
struct SpectralPair {
  RealVector values;
  Matrix vectors;

  Matrix reconstruct() const {
    return vectors * values.asDiagonal() * vectors.adjoint();
  }
};

inline SpectralPair eig_hermitian(const HermitianOperator& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  if (es.info() != Eigen::Success)
    throw NumericError("eig_hermitian: eigensolver failed to converge");
  return SpectralPair{es.eigenvalues(), es.eigenvectors()};
}

// Ensemble average tr(A rho) for raw matrices (trajectory snapshots that are
// Hermitian by evolution, not by validation). The value is analytically real;
// a residual imaginary part above tolerance signals corrupted Hermiticity.
inline double expectation_matrix(const Matrix& a, const Matrix& rho) {
  const Complex v = liouville_inner(a, rho);
  if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v)))
    throw InvariantError("expectation: imaginary residual " +
                         std::to_string(v.imag()));
  return v.real();
}

inline double expectation(const HermitianOperator& a, const DensityState& rho) {
  return expectation_matrix(a.matrix(), rho.matrix());
}

}  // namespace qoc
