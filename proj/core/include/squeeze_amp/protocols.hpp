#pragma once

// Pulse-sequence builders and the sequence interpreter for squeezing-based
// amplification: phase-sensitive squeeze/displace/anti-squeeze, the
// phase-independent two-quadrature displacement sequence, and Trotterized
// amplification of a general oscillator coupling (Jaynes-Cummings preset).

#include "squeeze_amp/expm.hpp"
#include "squeeze_amp/fock.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace squeeze_amp::protocols {

// Squeeze and displacement pulses are instantaneous unitaries; duration_s is
// carried for reporting only.
struct Displace {
  DisplacementParams alpha;
  double duration_s = 0.0;
};
struct Squeeze {
  SqueezeParams xi;
  double duration_s = 0.0;
};
// exp(-i omega H t) with H the registered (unit-strength) Hamiltonian.
struct EvolveH {
  std::string hamiltonian_id;
  double duration_s = 0.0;
  double omega = 1.0;
};
// No-op in the interaction picture.
struct Wait {
  double duration_s = 0.0;
};
using Pulse = std::variant<Displace, Squeeze, EvolveH, Wait>;

// List order is time order: pulses()[0] acts first.
class PulseSequence {
 public:
  PulseSequence() = default;
  explicit PulseSequence(std::vector<Pulse> pulses);

  void push_back(Pulse p);
  void append(const PulseSequence& other);
  void register_hamiltonian(const std::string& id, Operator h);

  const std::vector<Pulse>& pulses() const { return pulses_; }
  const std::map<std::string, Operator>& hamiltonians() const { return hamiltonians_; }
  std::size_t size() const { return pulses_.size(); }
  bool empty() const { return pulses_.empty(); }

  // Nonempty, durations >= 0, every EvolveH id registered.
  void validate() const;

  std::string to_json() const;
  // Parses pulses only; Hamiltonians must be registered by the caller.
  static PulseSequence from_json(const std::string& text);

 private:
  std::vector<Pulse> pulses_;
  std::map<std::string, Operator> hamiltonians_;
};

enum class Scheme { phase_sensitive, phase_independent };

struct GainReport {
  Complex g_complex{1.0, 0.0};
  double g_abs = 1.0;
  double phase_deg = 0.0;
  double r_used = 0.0;
  std::size_t n_used = 0;
  double phi_swept = 0.0;
};

struct HamiltonianSpec {
  enum class Kind { jaynes_cummings, custom_matrix };

  Kind kind = Kind::jaynes_cummings;
  double omega = 2.0 * 3.141592653589793 * 1000.0;  // rad/s
  std::size_t cutoff = 32;
  // Phase chi of the sideband drive, Omega -> Omega e^{i chi}.
  double rsb_phase = 0.0;
  // Unit-strength Hermitian matrix for custom_matrix; scaled by omega.
  std::optional<Operator> custom;

  Basis basis() const;
  void validate() const;
};

// cosh r + e^{i(theta - 2 phi)} sinh r, or cosh r for the phase-independent scheme.
Complex predicted_gain(Scheme scheme, double r, double theta, double phi);

// [Squeeze(xi), Displace(alpha), Squeeze(r, theta + pi)]; bare Displace when r = 0.
PulseSequence build_phase_sensitive(const DisplacementParams& alpha, const SqueezeParams& xi);

// 2N blocks [Squeeze(r, th_k), Displace(alpha / 2N), Squeeze(r, th_k + pi)],
// th_k = theta_offset + (k mod 2) pi.
PulseSequence build_ha_displacement(const DisplacementParams& alpha, double r, std::size_t n_rounds,
                                    double theta_offset = 0.0);

// Ω-scaled H_JC = Ω (σ⁻ a† e^{iχ} + σ⁺ a e^{-iχ}) on the qubit_fock basis.
Operator jc_hamiltonian(const HamiltonianSpec& spec);
// The registered unit-strength Hamiltonian used by EvolveH pulses for `spec`.
Operator unit_hamiltonian(const HamiltonianSpec& spec);

// N repetitions of [S0, H(dt), S0^dag, S_pi, H(dt), S_pi^dag], dt = t_total / 2N.
PulseSequence build_ha_trotter(const HamiltonianSpec& spec, double r, double t_total, std::size_t n_rounds);

// Working cutoff for sequences that squeeze by r and displace by up to
// alpha_mag: the default policy evaluated at the largest intermediate
// displacement alpha_mag e^r.
std::size_t sequence_cutoff(double r, double alpha_mag);

// [Omega sqrt(sinh 2r)]^-1 in seconds; +inf at r = 0.
double trotter_step_bound(double omega, double r);

// Interpreter with spectral caches bound to one basis; immutable and shareable
// between threads once constructed.
class SequenceEngine {
 public:
  SequenceEngine(Basis basis, const std::map<std::string, Operator>& hamiltonians);

  const Basis& basis() const { return basis_; }

  // Throws LeakageBreach naming the first pulse whose output puts more than
  // leakage_tol into the guard band.
  StateVector run(const StateVector& psi, const PulseSequence& seq,
                  double leakage_tol = cutoff_policy::leakage_tol) const;
  DensityMatrix run(const DensityMatrix& rho, const PulseSequence& seq,
                    double leakage_tol = cutoff_policy::leakage_tol) const;

  // Full sequence unitary (no leakage check).
  Matrix unitary(const PulseSequence& seq) const;
  Matrix pulse_unitary(const Pulse& p) const;

 private:
  Matrix apply(const Pulse& p, const Matrix& columns) const;

  Basis basis_;
  Squeezer squeezer_;
  Displacer displacer_;
  std::map<std::string, linalg::HermitianSpectrum> spectra_;
};

StateVector evolve_sequence(const StateVector& psi, const PulseSequence& seq);
DensityMatrix evolve_sequence(const DensityMatrix& rho, const PulseSequence& seq);

// G = <a>_out / alpha_in. Throws std::invalid_argument for alpha_in = 0.
GainReport estimate_gain(const StateVector& out, Complex alpha_in);

// P_up(t) after the Trotterized sequence for each total interaction time,
// starting from |up, 0>.
std::vector<double> jc_upper_population(const HamiltonianSpec& spec, double r, std::size_t n_rounds,
                                        std::span<const double> times);

// jc_upper_population that grows spec.cutoff by a quarter after each
// LeakageBreach, at most max_growths times; spec.cutoff holds the cutoff used.
std::vector<double> jc_upper_population_adaptive(HamiltonianSpec& spec, double r, std::size_t n_rounds,
                                                 std::span<const double> times, std::size_t max_growths = 6);

// max |(U_strobo - exp(-i cosh(r) H t))_ij| over the first guard_levels Fock
// levels (both qubit states).
double trotter_deviation(const HamiltonianSpec& spec, double r, double t_total, std::size_t n_rounds,
                         std::size_t guard_levels);

}  // namespace squeeze_amp::protocols
