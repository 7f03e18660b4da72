#pragma once

// Truncated Fock-space linear algebra: basis bookkeeping, operators, states,
// ladder/displacement/squeeze operators and population extraction.
//
// Units: hbar = 1. All oscillator dynamics live in the interaction picture of
// the bare oscillator, so the oscillator frequency never appears.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace squeeze_amp {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

enum class Space {
  fock,        // |0>, ..., |cutoff-1>
  qubit_fock,  // |up,0>, |down,0>, |up,1>, ... ; index = 2 n + q, q = 0 for up
};

namespace cutoff_policy {

inline constexpr double leakage_tol = 1e-8;

// Number of top Fock levels treated as the truncation guard band.
constexpr std::size_t guard_margin(std::size_t cutoff) { return cutoff / 8; }

// Smallest index n0 such that the squeezed-vacuum population above n0 is
// below tol.
std::size_t squeezed_quantile(double r, double tol = leakage_tol);
// Same for a coherent state of amplitude |alpha|.
std::size_t coherent_quantile(double alpha_mag, double tol = leakage_tol);

// max(64, ceil(16 sinh^2 r + 8 |alpha|^2 + 48)), grown until the guarded
// subspace holds a displaced squeezed state of these parameters.
std::size_t default_cutoff(double r, double alpha_mag);

}  // namespace cutoff_policy

struct Basis {
  std::size_t cutoff = 0;
  Space space = Space::fock;

  std::size_t size() const { return space == Space::fock ? cutoff : 2 * cutoff; }
  std::size_t guard_margin() const { return cutoff_policy::guard_margin(cutoff); }
  // Number of Fock levels below the guard band.
  std::size_t guarded_levels() const { return cutoff - guard_margin(); }

  friend bool operator==(const Basis&, const Basis&) = default;
};

// Dense operator on a truncated basis. Entries are validated finite.
class Operator {
 public:
  Operator(Basis basis, Matrix entries, std::string label = {});

  const Basis& basis() const { return basis_; }
  const Matrix& matrix() const { return entries_; }
  const std::string& label() const { return label_; }
  std::size_t size() const { return basis_.size(); }

  Operator adjoint() const;
  bool is_hermitian(double tol = 1e-10) const;

  // max |(U^dag U - I)_ij| over the guarded subspace.
  double unitarity_defect() const;

  friend Operator operator*(const Operator& a, const Operator& b);
  friend Operator operator+(const Operator& a, const Operator& b);
  friend Operator operator*(Complex s, const Operator& a);

 private:
  Basis basis_;
  Matrix entries_;
  std::string label_;
};

class StateVector {
 public:
  // Throws if the amplitudes are not normalized to 1e-12.
  StateVector(Basis basis, Vector amplitudes);

  const Basis& basis() const { return basis_; }
  const Vector& amplitudes() const { return amps_; }
  double norm() const { return amps_.norm(); }
  // Population in the guard band (top guard_margin() Fock levels).
  double leakage() const;

  // Wraps amplitudes produced by a unitary; renormalizes roundoff drift only.
  static StateVector from_evolved(Basis basis, Vector amplitudes);

 private:
  Basis basis_;
  Vector amps_;
};

// Hermitian, unit-trace matrix. Positivity is not enforced on construction;
// min_eigenvalue() reports it so that non-CP generators can be diagnosed.
class DensityMatrix {
 public:
  DensityMatrix(Basis basis, Matrix entries);

  static DensityMatrix from_state(const StateVector& psi);

  const Basis& basis() const { return basis_; }
  const Matrix& matrix() const { return rho_; }
  Complex trace() const { return rho_.trace(); }
  double purity() const;
  double min_eigenvalue() const;
  double leakage() const;

 private:
  Basis basis_;
  Matrix rho_;
};

struct SqueezeParams {
  double r = 0.0;
  double theta = 0.0;  // stored as given; reduce only for reporting

  SqueezeParams() = default;
  SqueezeParams(double r_, double theta_);
  Complex xi() const { return std::polar(r, theta); }
};

struct DisplacementParams {
  double magnitude = 0.0;
  double phi = 0.0;

  DisplacementParams() = default;
  DisplacementParams(double magnitude_, double phi_);
  static DisplacementParams from_complex(Complex alpha);
  Complex value() const { return std::polar(magnitude, phi); }
};

struct PopulationVector {
  std::vector<double> probs;
  double leakage = 0.0;

  double sum() const;
};

// State constructors accepted by make_state.
struct Vacuum {};
struct Coherent {
  DisplacementParams alpha;
};
struct SqueezedVacuum {
  SqueezeParams xi;
};
struct Thermal {
  double nbar = 0.0;
};
using StateSpec = std::variant<Vacuum, Coherent, SqueezedVacuum, Thermal>;
using AnyState = std::variant<StateVector, DensityMatrix>;

// --- operators ------------------------------------------------------------

// (a, a^dag) on the Fock basis of the given cutoff (>= 2).
std::pair<Operator, Operator> ladder_ops(std::size_t cutoff);
// Ladder operators lifted to an arbitrary basis (a (x) 1 on qubit_fock).
std::pair<Operator, Operator> ladder_ops(const Basis& basis);

Operator number_op(const Basis& basis);
Operator identity_op(const Basis& basis);

// Embeds a Fock-space matrix into `basis` (tensor identity on the qubit).
Matrix lift_fock(const Basis& basis, const Matrix& fock_matrix);

Operator matrix_exponential(const Operator& generator);

// D(alpha) = exp(alpha a^dag - alpha^* a). Throws InsufficientCutoff when the
// guard-band population of D(alpha)|0> exceeds leakage_tol.
Operator displacement_op(const DisplacementParams& alpha, std::size_t cutoff);
// S(xi) = exp((xi^* a^2 - xi a^dag^2) / 2), same cutoff check on S|0>.
Operator squeeze_op(const SqueezeParams& xi, std::size_t cutoff);

// Spectral caches for repeated displacement / squeeze evaluations at one
// cutoff. The theta / phi dependence is a diagonal phase rotation
// exp(i phi n), so a single Hermitian eigendecomposition serves all angles.
class Squeezer {
 public:
  explicit Squeezer(std::size_t cutoff);

  std::size_t cutoff() const { return cutoff_; }
  Matrix matrix(const SqueezeParams& xi) const;
  // S(xi) X for a block of Fock-space column vectors.
  Matrix apply(const SqueezeParams& xi, const Matrix& columns) const;

 private:
  std::size_t cutoff_;
  Matrix vecs_;
  Eigen::VectorXd vals_;
};

class Displacer {
 public:
  explicit Displacer(std::size_t cutoff);

  std::size_t cutoff() const { return cutoff_; }
  Matrix matrix(const DisplacementParams& alpha) const;
  Matrix apply(const DisplacementParams& alpha, const Matrix& columns) const;

 private:
  std::size_t cutoff_;
  Matrix vecs_;
  Eigen::VectorXd vals_;
};

// Applies a Fock-space matrix to the oscillator factor of a state vector.
Vector apply_fock(const Basis& basis, const Matrix& fock_matrix, const Vector& psi);

// --- states ---------------------------------------------------------------

StateVector vacuum_state(const Basis& basis);
StateVector coherent_state(const DisplacementParams& alpha, std::size_t cutoff);
StateVector squeezed_vacuum_state(const SqueezeParams& xi, std::size_t cutoff);
DensityMatrix thermal_state(double nbar, std::size_t cutoff);

AnyState make_state(const StateSpec& spec, std::size_t cutoff);

// Oscillator populations P_0..P_{n_max}; the qubit is traced out.
PopulationVector fock_populations(const StateVector& state, std::size_t n_max);
PopulationVector fock_populations(const DensityMatrix& state, std::size_t n_max);

// <a> (or <a (x) 1>).
Complex mean_displacement(const StateVector& state);
Complex mean_displacement(const DensityMatrix& state);

// --- closed-form populations ------------------------------------------------

std::vector<double> coherent_populations(double alpha_mag, std::size_t count);
std::vector<double> squeezed_vacuum_populations(double r, std::size_t count);
std::vector<double> thermal_populations(double nbar, std::size_t count);

// --- comparisons ------------------------------------------------------------

// max_ij |A_ij e^{-i phi} - B_ij| over the leading `block` rows/cols, with
// the global phase phi fixed by the largest-magnitude entry of B.
double max_abs_diff_up_to_phase(const Matrix& a, const Matrix& b, std::size_t block);
double max_abs_diff(const Matrix& a, const Matrix& b, std::size_t block);

// |<a|b>|^2
double fidelity(const StateVector& a, const StateVector& b);

}  // namespace squeeze_amp
