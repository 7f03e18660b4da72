#pragma once

// Lindblad dynamics with bosonic number dephasing, stroboscopic squeezing
// under dissipation, and the effective (fast-alternation) Lindbladian.
//
// Superoperators act on column-stacked density matrices:
//   vec(A X B) = (B^T (x) A) vec(X).

#include "squeeze_amp/fock.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace squeeze_amp::open_system {

class Superoperator {
 public:
  Superoperator(Basis basis, Matrix entries);

  static Superoperator zero(const Basis& basis);

  const Basis& basis() const { return basis_; }
  const Matrix& matrix() const { return entries_; }

  // L(X) for a basis-sized matrix X.
  Matrix apply(const Matrix& x) const;

  friend Superoperator operator+(const Superoperator& a, const Superoperator& b);
  friend Superoperator operator*(Complex s, const Superoperator& a);

 private:
  Basis basis_;
  Matrix entries_;
};

struct DephasingConfig {
  double gamma = 0.0;  // rate of D_a = -gamma [n, [n, .]]
  // Optional qubit pure-dephasing preset for D_beta; coherence decays at this rate.
  std::optional<double> qubit_dephasing_rate;

  void validate() const;
};

Superoperator left_multiply(const Operator& a);   // X -> A X
Superoperator right_multiply(const Operator& b);  // X -> X B
Superoperator commutator(const Operator& a);      // X -> [A, X]
Superoperator hamiltonian_generator(const Operator& h);  // X -> -i [H, X]
// X -> L X L^dag - {L^dag L, X} / 2
Superoperator lindblad_dissipator(const Operator& jump);

// -gamma [n, [n, .]] on the oscillator factor of `basis`.
Superoperator dephasing_dissipator(const DephasingConfig& cfg, const Basis& basis);
Superoperator dephasing_dissipator(const DephasingConfig& cfg, std::size_t cutoff);
// (rate / 2)(sigma_z X sigma_z - X) on the qubit factor.
Superoperator qubit_dephasing_dissipator(double rate, const Basis& basis);
// D_beta from the config: the qubit preset if set, otherwise zero.
Superoperator beta_dissipator(const DephasingConfig& cfg, const Basis& basis);

// -i [H, .] + sum of dissipators.
Superoperator lindbladian(const Operator& h, std::span<const Superoperator> dissipators);
// -i [H, .] + D_a + D_beta.
Superoperator lindbladian(const Operator& h, const DephasingConfig& cfg);

enum class EffectiveForm {
  // -i cosh r [H, .] + cosh^2(2r) D_a - (gamma/4) sinh^2(2r) [X, [X, .]] + D_beta,
  // X = a^2 + a^dag^2; the limit of the alternating squeeze sequence.
  derived,
  // Same, with the X term entering as +(1/4) sinh^2(2r) [X, [X, .]] (no rate).
  as_printed,
  // Derived form without the X term: dephasing enters only as cosh^2(2r) D_a.
  without_double_commutator,
};

Superoperator effective_lindbladian(const Operator& h, const DephasingConfig& cfg, double r,
                                    EffectiveForm form = EffectiveForm::derived);

struct PropagationOptions {
  // Require dt * max(|H|, |sum D|) <= 0.05, then compare one step against two
  // half steps; disagreement > 1e-6 in trace distance is a too-coarse step.
  bool validate_step = true;
  double leakage_tol = cutoff_policy::leakage_tol;
};

struct Propagation {
  DensityMatrix rho;
  double trace_error = 0.0;    // |tr - 1| before renormalization
  double min_eigenvalue = 0.0;
  bool positivity_violation = false;  // min_eigenvalue < -1e-7
};

double trace_distance(const Matrix& a, const Matrix& b);
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

// exp(L t) rho with a single Pade exponential.
Propagation propagate(const Superoperator& generator, const DensityMatrix& rho, double t);

// exp(L t) rho built from exact steps of length <= dt.
Propagation lindblad_propagate(const DensityMatrix& rho, const Operator& h,
                               std::span<const Superoperator> dissipators, double t, double dt,
                               const PropagationOptions& opts = {});

// Snapshots rho(k dt), k = 0..steps.
std::vector<DensityMatrix> lindblad_trajectory(const Superoperator& generator, const DensityMatrix& rho,
                                               double dt, std::size_t steps);

// N rounds of [S0, exp(L dt), S0^dag, S_pi, exp(L dt), S_pi^dag] with
// dt = t / 2N and instantaneous squeezes on the oscillator factor.
Propagation stroboscopic_ha_propagate(const DensityMatrix& rho, const Operator& h, const DephasingConfig& cfg,
                                      double r, std::size_t n_rounds, double t,
                                      const PropagationOptions& opts = {});

// Same sequence, with snapshots at k t / samples for k = 0..samples; samples must divide N.
std::vector<DensityMatrix> stroboscopic_ha_trajectory(const DensityMatrix& rho, const Operator& h,
                                                      const DephasingConfig& cfg, double r, std::size_t n_rounds,
                                                      double t, std::size_t samples,
                                                      const PropagationOptions& opts = {});

// Least-squares slope of -ln(y) against t: the rate k of y ~ exp(-k t).
double fit_decay_rate(std::span<const double> t, std::span<const double> y);

}  // namespace squeeze_amp::open_system
