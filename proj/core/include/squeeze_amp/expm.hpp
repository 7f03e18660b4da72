#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace squeeze_amp::linalg {

using Matrix = Eigen::MatrixXcd;

enum class ExpmMethod { automatic, spectral, pade };

// Dense complex matrix exponential.
//
// `automatic` picks the spectral route when A is normal (every generator in
// the protocol code is anti-Hermitian) and scaling-and-squaring Pade
// otherwise. Throws std::invalid_argument on non-finite input.
Matrix expm(const Matrix& a, ExpmMethod method = ExpmMethod::automatic);

// Degree-13 Pade approximant with scaling and squaring (Higham 2005).
Matrix expm_pade(const Matrix& a);

// exp(A) = Q exp(T) Q^dag from a complex Schur form; exact only for normal A.
// Hermitian and anti-Hermitian inputs take a self-adjoint eigensolver path.
Matrix expm_spectral(const Matrix& a);

// Action exp(A) B without forming exp(A): Taylor series on A / s with
// s = ceil(|A|_1), summed until terms fall below machine precision. A is held
// sparse; suited to repeated application of one small-norm generator.
class ExpmAction {
 public:
  explicit ExpmAction(const Matrix& a);

  Matrix apply(const Matrix& b) const;
  std::size_t substeps() const { return substeps_; }

 private:
  Eigen::SparseMatrix<std::complex<double>> scaled_;
  std::size_t substeps_ = 1;
};

Matrix expm_multiply(const Matrix& a, const Matrix& b);

bool is_normal(const Matrix& a, double rel_tol = 1e-12);
bool is_anti_hermitian(const Matrix& a, double rel_tol = 1e-14);
bool is_hermitian(const Matrix& a, double rel_tol = 1e-14);
bool all_finite(const Matrix& a);

// Eigendecomposition of a Hermitian H, cached for exp(-i t H).
class HermitianSpectrum {
 public:
  explicit HermitianSpectrum(const Matrix& h);

  Matrix propagator(double t) const;
  // exp(-i t H) X
  Matrix apply(double t, const Matrix& x) const;

  const Matrix& eigenvectors() const { return vecs_; }
  const Eigen::VectorXd& eigenvalues() const { return vals_; }

 private:
  Matrix vecs_;
  Eigen::VectorXd vals_;
};

}  // namespace squeeze_amp::linalg
