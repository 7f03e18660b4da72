#include "squeeze_amp/expm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace squeeze_amp::linalg {

namespace {

using Complex = std::complex<double>;

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double norm1(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

bool all_finite(const Matrix& a) { return a.allFinite(); }

bool is_anti_hermitian(const Matrix& a, double rel_tol) {
  const double scale = std::max(max_abs(a), 1.0);
  return max_abs(a + a.adjoint()) <= rel_tol * scale;
}

bool is_hermitian(const Matrix& a, double rel_tol) {
  const double scale = std::max(max_abs(a), 1.0);
  return max_abs(a - a.adjoint()) <= rel_tol * scale;
}

bool is_normal(const Matrix& a, double rel_tol) {
  const double scale = std::max(max_abs(a) * max_abs(a), 1.0) * static_cast<double>(a.rows());
  return max_abs(a * a.adjoint() - a.adjoint() * a) <= rel_tol * scale;
}

Matrix expm_pade(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("expm: non-finite entries");
  const auto n = a.rows();
  if (n == 0) return a;

  // Higham, "The scaling and squaring method for the matrix exponential
  // revisited", SIAM J. Matrix Anal. Appl. 26 (2005), degree 13 only.
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double nrm = norm1(a);
  int s = 0;
  if (nrm > theta13) s = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
  const Matrix as = a / std::pow(2.0, s);

  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;

  const Matrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  const Matrix u = as * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Matrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
  const Matrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  if (!all_finite(r)) throw std::runtime_error("expm: Pade evaluation overflowed");
  return r;
}

Matrix expm_spectral(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("expm: non-finite entries");
  if (a.rows() == 0) return a;

  if (is_anti_hermitian(a, 1e-13)) {
    // A = -i H with H = i A Hermitian.
    const Matrix h = Complex(0.0, 1.0) * a;
    return HermitianSpectrum(0.5 * (h + h.adjoint())).propagator(1.0);
  }
  if (is_hermitian(a, 1e-13)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.adjoint()));
    const Eigen::VectorXd ev = es.eigenvalues().array().exp();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  }
  Eigen::ComplexSchur<Matrix> schur(a);
  const Matrix& t = schur.matrixT();
  const Eigen::VectorXcd ed = t.diagonal().array().exp();
  return schur.matrixU() * ed.asDiagonal() * schur.matrixU().adjoint();
}

Matrix expm(const Matrix& a, ExpmMethod method) {
  switch (method) {
    case ExpmMethod::pade:
      return expm_pade(a);
    case ExpmMethod::spectral:
      return expm_spectral(a);
    case ExpmMethod::automatic:
      break;
  }
  if (!all_finite(a)) throw std::invalid_argument("expm: non-finite entries");
  if (is_anti_hermitian(a, 1e-13) || is_hermitian(a, 1e-13) || is_normal(a)) {
    return expm_spectral(a);
  }
  return expm_pade(a);
}

HermitianSpectrum::HermitianSpectrum(const Matrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("HermitianSpectrum: matrix must be square");
  if (!all_finite(h)) throw std::invalid_argument("HermitianSpectrum: non-finite entries");
  if (!is_hermitian(h, 1e-12)) throw std::invalid_argument("HermitianSpectrum: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("HermitianSpectrum: eigensolver failed");
  vecs_ = es.eigenvectors();
  vals_ = es.eigenvalues();
}

Matrix HermitianSpectrum::propagator(double t) const {
  const Eigen::VectorXcd phases =
      (vals_.cast<Complex>() * Complex(0.0, -t)).array().exp();
  return vecs_ * phases.asDiagonal() * vecs_.adjoint();
}

Matrix HermitianSpectrum::apply(double t, const Matrix& x) const {
  const Eigen::VectorXcd phases =
      (vals_.cast<Complex>() * Complex(0.0, -t)).array().exp();
  return vecs_ * (phases.asDiagonal() * (vecs_.adjoint() * x));
}

ExpmAction::ExpmAction(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm_multiply: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("expm_multiply: non-finite entries");
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  substeps_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(norm1)));
  scaled_ = (a / static_cast<double>(substeps_)).sparseView();
}

Matrix ExpmAction::apply(const Matrix& b) const {
  if (b.rows() != scaled_.cols()) throw std::invalid_argument("expm_multiply: dimension mismatch");
  constexpr double eps = 0x1p-53;
  Matrix x = b;
  for (std::size_t s = 0; s < substeps_; ++s) {
    Matrix term = x;
    Matrix sum = x;
    double prev = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 64; ++j) {
      term = (scaled_ * term) / static_cast<double>(j);
      sum += term;
      const double tn = term.cwiseAbs().maxCoeff();
      if (tn + prev <= eps * sum.cwiseAbs().maxCoeff()) break;
      prev = tn;
    }
    x = std::move(sum);
  }
  return x;
}

Matrix expm_multiply(const Matrix& a, const Matrix& b) { return ExpmAction(a).apply(b); }

}  // namespace squeeze_amp::linalg
