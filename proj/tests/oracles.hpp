#pragma once

// Reference values computed independently of the library: direct recursions,
// dense Taylor/Pade from Eigen's unsupported module, brute-force sums.

#include <Eigen/Dense>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/laguerre.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline Matrix expm(const Matrix& a) { return a.exp(); }

inline Matrix annihilation(std::size_t cutoff) {
  const auto n = static_cast<Eigen::Index>(cutoff);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

inline Matrix displacement(Complex alpha, std::size_t cutoff) {
  const Matrix a = annihilation(cutoff);
  return expm(alpha * a.adjoint() - std::conj(alpha) * a);
}

inline Matrix squeeze(Complex xi, std::size_t cutoff) {
  const Matrix a = annihilation(cutoff);
  const Matrix ad = a.adjoint();
  return expm(0.5 * (std::conj(xi) * a * a - xi * ad * ad));
}

// c_0 = e^{-|a|^2/2}, c_{n+1} = c_n alpha / sqrt(n+1)
inline std::vector<Complex> coherent_amplitudes(Complex alpha, std::size_t count) {
  std::vector<Complex> c(count);
  c[0] = std::exp(-0.5 * std::norm(alpha));
  for (std::size_t n = 0; n + 1 < count; ++n) c[n + 1] = c[n] * alpha / std::sqrt(static_cast<double>(n + 1));
  return c;
}

inline std::vector<double> poisson(double mean, std::size_t count) {
  std::vector<double> p(count);
  p[0] = std::exp(-mean);
  for (std::size_t n = 0; n + 1 < count; ++n) p[n + 1] = p[n] * mean / static_cast<double>(n + 1);
  return p;
}

// P_{2m} = (2m)! / (2^m m!)^2 tanh^{2m} r / cosh r by the ratio recursion.
inline std::vector<double> squeezed(double r, std::size_t count) {
  std::vector<double> p(count, 0.0);
  const double t2 = std::tanh(r) * std::tanh(r);
  double v = 1.0 / std::cosh(r);
  for (std::size_t n = 0; n < count; n += 2) {
    p[n] = v;
    const double m = static_cast<double>(n / 2);
    v *= t2 * (2.0 * m + 1.0) / (2.0 * m + 2.0);
  }
  return p;
}

inline std::vector<double> thermal(double nbar, std::size_t count) {
  std::vector<double> p(count);
  const double q = nbar / (1.0 + nbar);
  p[0] = 1.0 / (1.0 + nbar);
  for (std::size_t n = 1; n < count; ++n) p[n] = p[n - 1] * q;
  return p;
}

// P_down(t) by the literal sum.
inline double bsb(const std::vector<double>& p, double omega, double gamma, double exponent, double t) {
  double s = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double m = static_cast<double>(n + 1);
    s += p[n] * std::exp(-gamma * std::pow(m, exponent) * t) * std::cos(omega * std::sqrt(m) * t);
  }
  return 0.5 * (1.0 + s);
}

// <m|D(beta)|n> from the associated-Laguerre closed form.
inline Complex displacement_element(Complex beta, unsigned m, unsigned n) {
  const double x = std::norm(beta);
  const double envelope = std::exp(-0.5 * x);
  if (m >= n) {
    const double norm = std::sqrt(boost::math::factorial<double>(n) / boost::math::factorial<double>(m));
    return norm * std::pow(beta, static_cast<int>(m - n)) * envelope * boost::math::laguerre(n, m - n, x);
  }
  const double norm = std::sqrt(boost::math::factorial<double>(m) / boost::math::factorial<double>(n));
  return norm * std::pow(-std::conj(beta), static_cast<int>(n - m)) * envelope * boost::math::laguerre(m, n - m, x);
}

inline Matrix displacement_block(Complex beta, std::size_t block) {
  Matrix d(static_cast<Eigen::Index>(block), static_cast<Eigen::Index>(block));
  for (unsigned m = 0; m < block; ++m)
    for (unsigned n = 0; n < block; ++n) d(m, n) = displacement_element(beta, m, n);
  return d;
}

// Largest singular value of the leading block of a - b.
inline double block_norm(const Matrix& a, const Matrix& b, std::size_t block) {
  const auto k = static_cast<Eigen::Index>(block);
  Eigen::JacobiSVD<Matrix> svd(a.topLeftCorner(k, k) - b.topLeftCorner(k, k));
  return svd.singularValues()(0);
}

}  // namespace oracle
