#include "squeeze_amp/fock.hpp"

#include "squeeze_amp/errors.hpp"
#include "squeeze_amp/expm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace squeeze_amp {

namespace {

constexpr Complex kI{0.0, 1.0};

std::string describe_cutoff_failure(const char* what, std::size_t cutoff, double leakage) {
  std::ostringstream os;
  os << what << ": cutoff " << cutoff << " leaves guard-band population " << leakage
     << " > " << cutoff_policy::leakage_tol;
  return os.str();
}

// Index block [0, n) of a basis that corresponds to the first `levels` Fock levels.
std::size_t block_for_levels(const Basis& basis, std::size_t levels) {
  return basis.space == Space::fock ? levels : 2 * levels;
}

double guard_population(const Basis& basis, const Vector& amps) {
  const auto start = static_cast<Eigen::Index>(block_for_levels(basis, basis.guarded_levels()));
  return amps.tail(amps.size() - start).squaredNorm();
}

Matrix annihilation_matrix(std::size_t cutoff) {
  const auto n = static_cast<Eigen::Index>(cutoff);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

// diag(exp(i phi n))
Eigen::VectorXcd phase_rotation(std::size_t cutoff, double phi) {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(cutoff));
  for (Eigen::Index n = 0; n < d.size(); ++n) d(n) = std::polar(1.0, phi * static_cast<double>(n));
  return d;
}

Matrix rotated_propagator(const Matrix& vecs, const Eigen::VectorXd& vals, double t, double phi,
                          std::size_t cutoff) {
  const Eigen::VectorXcd phases = (vals.cast<Complex>() * Complex(0.0, -t)).array().exp();
  const Matrix u = vecs * phases.asDiagonal() * vecs.adjoint();
  const Eigen::VectorXcd rot = phase_rotation(cutoff, phi);
  return rot.asDiagonal() * u * rot.conjugate().asDiagonal();
}

Matrix rotated_apply(const Matrix& vecs, const Eigen::VectorXd& vals, double t, double phi,
                     std::size_t cutoff, const Matrix& x) {
  if (x.rows() != static_cast<Eigen::Index>(cutoff))
    throw std::invalid_argument("apply: column length does not match cutoff");
  const Eigen::VectorXcd phases = (vals.cast<Complex>() * Complex(0.0, -t)).array().exp();
  const Eigen::VectorXcd rot = phase_rotation(cutoff, phi);
  Matrix y = rot.conjugate().asDiagonal() * x;
  y = vecs * (phases.asDiagonal() * (vecs.adjoint() * y));
  return rot.asDiagonal() * y;
}

double tail_from(const std::vector<double>& p, std::size_t n0) {
  double head = 0.0;
  for (std::size_t n = 0; n < n0 && n < p.size(); ++n) head += p[n];
  return std::max(0.0, 1.0 - head);
}

}  // namespace

// --- cutoff policy ----------------------------------------------------------

namespace cutoff_policy {

std::size_t squeezed_quantile(double r, double tol) {
  if (r < 0.0) throw std::invalid_argument("squeezed_quantile: r < 0");
  if (r == 0.0) return 1;
  const double lt = std::log(std::tanh(r));
  const double lc = std::log(std::cosh(r));
  double head = 0.0;
  for (std::size_t n = 0; n < 200000; n += 2) {
    const double dn = static_cast<double>(n);
    head += std::exp(dn * lt - lc + std::lgamma(dn + 1.0) - dn * std::log(2.0) -
                     2.0 * std::lgamma(0.5 * dn + 1.0));
    if (1.0 - head <= tol) return n + 1;
  }
  throw std::invalid_argument("squeezed_quantile: squeezing too strong");
}

std::size_t coherent_quantile(double alpha_mag, double tol) {
  if (alpha_mag < 0.0) throw std::invalid_argument("coherent_quantile: |alpha| < 0");
  const double mean = alpha_mag * alpha_mag;
  // Poisson recursion P_{n+1} = P_n mean / (n+1), started in log space.
  double head = 0.0;
  for (std::size_t n = 0; n < 200000; ++n) {
    const double lp = -mean + (n == 0 ? 0.0 : 2.0 * static_cast<double>(n) * std::log(alpha_mag)) -
                      std::lgamma(static_cast<double>(n) + 1.0);
    head += (alpha_mag == 0.0 && n > 0) ? 0.0 : std::exp(lp);
    if (1.0 - head <= tol && static_cast<double>(n) >= mean) return n + 1;
  }
  throw std::invalid_argument("coherent_quantile: displacement too large");
}

std::size_t default_cutoff(double r, double alpha_mag) {
  const double s = std::sinh(r);
  const auto formula = static_cast<std::size_t>(
      std::ceil(16.0 * s * s + 8.0 * alpha_mag * alpha_mag + 48.0));
  std::size_t dim = std::max<std::size_t>(64, formula);
  const std::size_t need = squeezed_quantile(r) + coherent_quantile(alpha_mag * std::exp(r));
  while (dim - guard_margin(dim) < need) dim += std::max<std::size_t>(8, dim / 8);
  return dim;
}

}  // namespace cutoff_policy

// --- Operator -----------------------------------------------------------------

Operator::Operator(Basis basis, Matrix entries, std::string label)
    : basis_(basis), entries_(std::move(entries)), label_(std::move(label)) {
  if (basis_.cutoff < 1) throw std::invalid_argument("Operator: cutoff must be positive");
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (entries_.rows() != n || entries_.cols() != n)
    throw std::invalid_argument("Operator: matrix shape does not match basis");
  if (!entries_.allFinite()) throw std::invalid_argument("Operator: non-finite entries");
}

Operator Operator::adjoint() const {
  return Operator(basis_, entries_.adjoint(), label_.empty() ? "" : label_ + "^dag");
}

bool Operator::is_hermitian(double tol) const {
  return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double Operator::unitarity_defect() const {
  const auto b = static_cast<Eigen::Index>(block_for_levels(basis_, basis_.guarded_levels()));
  const Matrix cols = entries_.leftCols(b);
  const Matrix gram = cols.adjoint() * cols;
  return (gram - Matrix::Identity(b, b)).cwiseAbs().maxCoeff();
}

Operator operator*(const Operator& a, const Operator& b) {
  if (!(a.basis_ == b.basis_)) throw std::invalid_argument("Operator product: basis mismatch");
  return Operator(a.basis_, a.entries_ * b.entries_);
}

Operator operator+(const Operator& a, const Operator& b) {
  if (!(a.basis_ == b.basis_)) throw std::invalid_argument("Operator sum: basis mismatch");
  return Operator(a.basis_, a.entries_ + b.entries_);
}

Operator operator*(Complex s, const Operator& a) { return Operator(a.basis_, s * a.entries_, a.label_); }

// --- StateVector / DensityMatrix ------------------------------------------------

StateVector::StateVector(Basis basis, Vector amplitudes) : basis_(basis), amps_(std::move(amplitudes)) {
  if (amps_.size() != static_cast<Eigen::Index>(basis_.size()))
    throw std::invalid_argument("StateVector: amplitude length does not match basis");
  if (!amps_.allFinite()) throw std::invalid_argument("StateVector: non-finite amplitudes");
  if (std::abs(amps_.squaredNorm() - 1.0) > 1e-12)
    throw std::invalid_argument("StateVector: amplitudes are not normalized");
}

StateVector StateVector::from_evolved(Basis basis, Vector amplitudes) {
  const double nrm = amplitudes.norm();
  if (!std::isfinite(nrm) || std::abs(nrm - 1.0) > 1e-9)
    throw NumericalError("evolved state lost normalization (norm " + std::to_string(nrm) + ")");
  return StateVector(basis, amplitudes / nrm);
}

double StateVector::leakage() const { return guard_population(basis_, amps_); }

DensityMatrix::DensityMatrix(Basis basis, Matrix entries) : basis_(basis), rho_(std::move(entries)) {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (rho_.rows() != n || rho_.cols() != n)
    throw std::invalid_argument("DensityMatrix: shape does not match basis");
  if (!rho_.allFinite()) throw std::invalid_argument("DensityMatrix: non-finite entries");
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(rho_.trace() - Complex(1.0, 0.0)) > 1e-10)
    throw std::invalid_argument("DensityMatrix: trace differs from 1");
}

DensityMatrix DensityMatrix::from_state(const StateVector& psi) {
  const Vector& v = psi.amplitudes();
  Matrix rho = v * v.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return DensityMatrix(psi.basis(), std::move(rho));
}

double DensityMatrix::purity() const { return (rho_ * rho_).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double DensityMatrix::leakage() const {
  const auto start = static_cast<Eigen::Index>(block_for_levels(basis_, basis_.guarded_levels()));
  double s = 0.0;
  for (Eigen::Index k = start; k < rho_.rows(); ++k) s += rho_(k, k).real();
  return s;
}

// --- parameter types -------------------------------------------------------------

SqueezeParams::SqueezeParams(double r_, double theta_) : r(r_), theta(theta_) {
  if (!std::isfinite(r) || !std::isfinite(theta)) throw std::invalid_argument("SqueezeParams: non-finite");
  if (r < 0.0) throw std::invalid_argument("SqueezeParams: r must be >= 0");
}

DisplacementParams::DisplacementParams(double magnitude_, double phi_) : magnitude(magnitude_), phi(phi_) {
  if (!std::isfinite(magnitude) || !std::isfinite(phi))
    throw std::invalid_argument("DisplacementParams: non-finite");
  if (magnitude < 0.0) throw std::invalid_argument("DisplacementParams: magnitude must be >= 0");
}

DisplacementParams DisplacementParams::from_complex(Complex alpha) {
  return DisplacementParams(std::abs(alpha), std::abs(alpha) == 0.0 ? 0.0 : std::arg(alpha));
}

double PopulationVector::sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

// --- operators -----------------------------------------------------------------

std::pair<Operator, Operator> ladder_ops(std::size_t cutoff) {
  if (cutoff < 2) throw std::invalid_argument("ladder_ops: cutoff must be >= 2");
  const Basis basis{cutoff, Space::fock};
  Matrix a = annihilation_matrix(cutoff);
  Matrix ad = a.adjoint();
  return {Operator(basis, std::move(a), "a"), Operator(basis, std::move(ad), "a^dag")};
}

std::pair<Operator, Operator> ladder_ops(const Basis& basis) {
  if (basis.cutoff < 2) throw std::invalid_argument("ladder_ops: cutoff must be >= 2");
  Matrix a = lift_fock(basis, annihilation_matrix(basis.cutoff));
  Matrix ad = a.adjoint();
  return {Operator(basis, std::move(a), "a"), Operator(basis, std::move(ad), "a^dag")};
}

Operator number_op(const Basis& basis) {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(basis.cutoff));
  for (Eigen::Index n = 0; n < d.size(); ++n) d(n) = static_cast<double>(n);
  return Operator(basis, lift_fock(basis, d.asDiagonal().toDenseMatrix()), "n");
}

Operator identity_op(const Basis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  return Operator(basis, Matrix::Identity(n, n), "1");
}

Matrix lift_fock(const Basis& basis, const Matrix& m) {
  const auto c = static_cast<Eigen::Index>(basis.cutoff);
  if (m.rows() != c || m.cols() != c) throw std::invalid_argument("lift_fock: shape mismatch");
  if (basis.space == Space::fock) return m;
  Matrix out = Matrix::Zero(2 * c, 2 * c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < c; ++i) {
      out(2 * i, 2 * j) = m(i, j);
      out(2 * i + 1, 2 * j + 1) = m(i, j);
    }
  return out;
}

Vector apply_fock(const Basis& basis, const Matrix& m, const Vector& psi) {
  if (basis.space == Space::fock) return m * psi;
  const auto c = static_cast<Eigen::Index>(basis.cutoff);
  // psi(2n + q) viewed as a 2 x cutoff matrix; the oscillator factor acts on rows.
  Eigen::Map<const Matrix> view(psi.data(), 2, c);
  Matrix out = view * m.transpose();
  return Eigen::Map<Vector>(out.data(), 2 * c);
}

Operator matrix_exponential(const Operator& generator) {
  return Operator(generator.basis(), linalg::expm(generator.matrix()),
                  generator.label().empty() ? "exp" : "exp(" + generator.label() + ")");
}

Squeezer::Squeezer(std::size_t cutoff) : cutoff_(cutoff) {
  if (cutoff < 2) throw std::invalid_argument("Squeezer: cutoff must be >= 2");
  const Matrix a = annihilation_matrix(cutoff);
  const Matrix ad = a.adjoint();
  // theta = 0 generator K = (a^2 - a^dag^2) / 2, real antisymmetric; H = i K.
  const Matrix k = 0.5 * (a * a - ad * ad);
  linalg::HermitianSpectrum spec(kI * k);
  vecs_ = spec.eigenvectors();
  vals_ = spec.eigenvalues();
}

Matrix Squeezer::matrix(const SqueezeParams& xi) const {
  return rotated_propagator(vecs_, vals_, xi.r, 0.5 * xi.theta, cutoff_);
}

Matrix Squeezer::apply(const SqueezeParams& xi, const Matrix& columns) const {
  return rotated_apply(vecs_, vals_, xi.r, 0.5 * xi.theta, cutoff_, columns);
}

Displacer::Displacer(std::size_t cutoff) : cutoff_(cutoff) {
  if (cutoff < 2) throw std::invalid_argument("Displacer: cutoff must be >= 2");
  const Matrix a = annihilation_matrix(cutoff);
  linalg::HermitianSpectrum spec(kI * (a.adjoint() - a));
  vecs_ = spec.eigenvectors();
  vals_ = spec.eigenvalues();
}

Matrix Displacer::matrix(const DisplacementParams& alpha) const {
  return rotated_propagator(vecs_, vals_, alpha.magnitude, alpha.phi, cutoff_);
}

Matrix Displacer::apply(const DisplacementParams& alpha, const Matrix& columns) const {
  return rotated_apply(vecs_, vals_, alpha.magnitude, alpha.phi, cutoff_, columns);
}

Operator displacement_op(const DisplacementParams& alpha, std::size_t cutoff) {
  const Basis basis{cutoff, Space::fock};
  Matrix d = Displacer(cutoff).matrix(alpha);
  const double leak = guard_population(basis, d.col(0));
  if (leak > cutoff_policy::leakage_tol)
    throw InsufficientCutoff(describe_cutoff_failure("displacement_op", cutoff, leak), cutoff, leak);
  return Operator(basis, std::move(d), "D");
}

Operator squeeze_op(const SqueezeParams& xi, std::size_t cutoff) {
  const Basis basis{cutoff, Space::fock};
  Matrix s = Squeezer(cutoff).matrix(xi);
  const double leak = guard_population(basis, s.col(0));
  if (leak > cutoff_policy::leakage_tol)
    throw InsufficientCutoff(describe_cutoff_failure("squeeze_op", cutoff, leak), cutoff, leak);
  return Operator(basis, std::move(s), "S");
}

// --- states ---------------------------------------------------------------------

StateVector vacuum_state(const Basis& basis) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(basis.size()));
  v(0) = 1.0;
  return StateVector(basis, std::move(v));
}

StateVector coherent_state(const DisplacementParams& alpha, std::size_t cutoff) {
  const Operator d = displacement_op(alpha, cutoff);
  return StateVector::from_evolved(d.basis(), d.matrix().col(0));
}

StateVector squeezed_vacuum_state(const SqueezeParams& xi, std::size_t cutoff) {
  const Operator s = squeeze_op(xi, cutoff);
  return StateVector::from_evolved(s.basis(), s.matrix().col(0));
}

DensityMatrix thermal_state(double nbar, std::size_t cutoff) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("thermal_state: nbar must be >= 0");
  const Basis basis{cutoff, Space::fock};
  const std::vector<double> p = thermal_populations(nbar, cutoff);
  const double leak = tail_from(p, basis.guarded_levels());
  if (leak > cutoff_policy::leakage_tol)
    throw InsufficientCutoff(describe_cutoff_failure("thermal_state", cutoff, leak), cutoff, leak);
  double total = 0.0;
  for (double x : p) total += x;
  Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(cutoff), static_cast<Eigen::Index>(cutoff));
  for (std::size_t n = 0; n < cutoff; ++n) rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = p[n] / total;
  return DensityMatrix(basis, std::move(rho));
}

AnyState make_state(const StateSpec& spec, std::size_t cutoff) {
  return std::visit(
      [cutoff](const auto& s) -> AnyState {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Vacuum>) {
          return vacuum_state(Basis{cutoff, Space::fock});
        } else if constexpr (std::is_same_v<T, Coherent>) {
          return coherent_state(s.alpha, cutoff);
        } else if constexpr (std::is_same_v<T, SqueezedVacuum>) {
          return squeezed_vacuum_state(s.xi, cutoff);
        } else {
          return thermal_state(s.nbar, cutoff);
        }
      },
      spec);
}

PopulationVector fock_populations(const StateVector& state, std::size_t n_max) {
  const Basis& b = state.basis();
  if (n_max >= b.cutoff) throw std::out_of_range("fock_populations: n_max must be < cutoff");
  const Vector& v = state.amplitudes();
  PopulationVector out;
  out.probs.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const auto k = static_cast<Eigen::Index>(n);
    out.probs[n] = b.space == Space::fock ? std::norm(v(k)) : std::norm(v(2 * k)) + std::norm(v(2 * k + 1));
  }
  out.leakage = std::max(0.0, 1.0 - out.sum());
  return out;
}

PopulationVector fock_populations(const DensityMatrix& state, std::size_t n_max) {
  const Basis& b = state.basis();
  if (n_max >= b.cutoff) throw std::out_of_range("fock_populations: n_max must be < cutoff");
  const Matrix& rho = state.matrix();
  PopulationVector out;
  out.probs.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const auto k = static_cast<Eigen::Index>(n);
    const double p = b.space == Space::fock ? rho(k, k).real()
                                            : rho(2 * k, 2 * k).real() + rho(2 * k + 1, 2 * k + 1).real();
    out.probs[n] = std::clamp(p, 0.0, 1.0);
  }
  out.leakage = std::max(0.0, 1.0 - out.sum());
  return out;
}

Complex mean_displacement(const StateVector& state) {
  const Basis& b = state.basis();
  const Vector& v = state.amplitudes();
  Complex acc{0.0, 0.0};
  const auto c = static_cast<Eigen::Index>(b.cutoff);
  const Eigen::Index stride = b.space == Space::fock ? 1 : 2;
  for (Eigen::Index q = 0; q < stride; ++q)
    for (Eigen::Index n = 1; n < c; ++n)
      acc += std::conj(v(stride * (n - 1) + q)) * std::sqrt(static_cast<double>(n)) * v(stride * n + q);
  return acc;
}

Complex mean_displacement(const DensityMatrix& state) {
  const auto [a, ad] = ladder_ops(state.basis());
  return (a.matrix() * state.matrix()).trace();
}

// --- closed forms -------------------------------------------------------------------

std::vector<double> coherent_populations(double alpha_mag, std::size_t count) {
  if (alpha_mag < 0.0) throw std::invalid_argument("coherent_populations: |alpha| < 0");
  std::vector<double> p(count, 0.0);
  if (count == 0) return p;
  if (alpha_mag == 0.0) {
    p[0] = 1.0;
    return p;
  }
  const double mean = alpha_mag * alpha_mag;
  const double la = std::log(alpha_mag);
  for (std::size_t n = 0; n < count; ++n) {
    const double dn = static_cast<double>(n);
    p[n] = std::exp(-mean + 2.0 * dn * la - std::lgamma(dn + 1.0));
  }
  return p;
}

std::vector<double> squeezed_vacuum_populations(double r, std::size_t count) {
  if (r < 0.0) throw std::invalid_argument("squeezed_vacuum_populations: r < 0");
  std::vector<double> p(count, 0.0);
  if (count == 0) return p;
  if (r == 0.0) {
    p[0] = 1.0;
    return p;
  }
  const double lt = std::log(std::tanh(r));
  const double lc = std::log(std::cosh(r));
  for (std::size_t n = 0; n < count; n += 2) {
    const double dn = static_cast<double>(n);
    p[n] = std::exp(dn * lt - lc + std::lgamma(dn + 1.0) - dn * std::log(2.0) -
                    2.0 * std::lgamma(0.5 * dn + 1.0));
  }
  return p;
}

std::vector<double> thermal_populations(double nbar, std::size_t count) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("thermal_populations: nbar < 0");
  std::vector<double> p(count, 0.0);
  if (count == 0) return p;
  if (nbar == 0.0) {
    p[0] = 1.0;
    return p;
  }
  const double lq = std::log(nbar / (1.0 + nbar));
  const double l0 = -std::log1p(nbar);
  for (std::size_t n = 0; n < count; ++n) p[n] = std::exp(static_cast<double>(n) * lq + l0);
  return p;
}

// --- comparisons --------------------------------------------------------------------

double max_abs_diff(const Matrix& a, const Matrix& b, std::size_t block) {
  const auto k = static_cast<Eigen::Index>(block);
  if (a.rows() < k || b.rows() < k || a.cols() < k || b.cols() < k)
    throw std::invalid_argument("max_abs_diff: block larger than matrices");
  return (a.topLeftCorner(k, k) - b.topLeftCorner(k, k)).cwiseAbs().maxCoeff();
}

double max_abs_diff_up_to_phase(const Matrix& a, const Matrix& b, std::size_t block) {
  const auto k = static_cast<Eigen::Index>(block);
  if (a.rows() < k || b.rows() < k || a.cols() < k || b.cols() < k)
    throw std::invalid_argument("max_abs_diff_up_to_phase: block larger than matrices");
  const Matrix ab = a.topLeftCorner(k, k);
  const Matrix bb = b.topLeftCorner(k, k);
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  bb.cwiseAbs().maxCoeff(&i, &j);
  Complex phase{1.0, 0.0};
  if (std::abs(bb(i, j)) > 0.0 && std::abs(ab(i, j)) > 0.0) {
    phase = (ab(i, j) / bb(i, j));
    phase /= std::abs(phase);
  }
  return (ab * std::conj(phase) - bb).cwiseAbs().maxCoeff();
}

double fidelity(const StateVector& a, const StateVector& b) {
  if (!(a.basis() == b.basis())) throw std::invalid_argument("fidelity: basis mismatch");
  return std::norm(a.amplitudes().dot(b.amplitudes()));
}

}  // namespace squeeze_amp
