#include "squeeze_amp/open_system.hpp"

#include "squeeze_amp/errors.hpp"
#include "squeeze_amp/expm.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace squeeze_amp::open_system {

namespace {

constexpr Complex kI{0.0, 1.0};

Matrix identity(const Basis& b) {
  const auto n = static_cast<Eigen::Index>(b.size());
  return Matrix::Identity(n, n);
}

Matrix vec(const Matrix& x) { return Eigen::Map<const Matrix>(x.data(), x.size(), 1); }

Matrix unvec(const Matrix& v, Eigen::Index n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

std::size_t guarded_block(const Basis& b) {
  return b.space == Space::fock ? b.guarded_levels() : 2 * b.guarded_levels();
}

double guard_population(const Basis& b, const Matrix& rho) {
  const auto start = static_cast<Eigen::Index>(guarded_block(b));
  return rho.diagonal().tail(rho.rows() - start).real().sum();
}

Propagation finish(const Basis& basis, Matrix rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  Propagation out{DensityMatrix(basis, rho / tr)};
  out.trace_error = std::abs(tr - 1.0);
  if (out.trace_error > 1e-8) {
    std::ostringstream os;
    os << "propagation lost trace: |tr - 1| = " << out.trace_error;
    throw NumericalError(os.str());
  }
  out.min_eigenvalue = out.rho.min_eigenvalue();
  out.positivity_violation = out.min_eigenvalue < -1e-7;
  return out;
}

}  // namespace

// --- Superoperator -------------------------------------------------------------------

Superoperator::Superoperator(Basis basis, Matrix entries) : basis_(basis), entries_(std::move(entries)) {
  const auto n = static_cast<Eigen::Index>(basis_.size() * basis_.size());
  if (entries_.rows() != n || entries_.cols() != n)
    throw std::invalid_argument("Superoperator: shape does not match basis");
  if (!entries_.allFinite()) throw std::invalid_argument("Superoperator: non-finite entries");
}

Superoperator Superoperator::zero(const Basis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size() * basis.size());
  return Superoperator(basis, Matrix::Zero(n, n));
}

Matrix Superoperator::apply(const Matrix& x) const {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (x.rows() != n || x.cols() != n) throw std::invalid_argument("Superoperator::apply: shape mismatch");
  return unvec(entries_ * vec(x), n);
}

Superoperator operator+(const Superoperator& a, const Superoperator& b) {
  if (!(a.basis_ == b.basis_)) throw std::invalid_argument("Superoperator sum: basis mismatch");
  return Superoperator(a.basis_, a.entries_ + b.entries_);
}

Superoperator operator*(Complex s, const Superoperator& a) { return Superoperator(a.basis_, s * a.entries_); }

void DephasingConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("DephasingConfig: gamma must be >= 0");
  if (qubit_dephasing_rate && !(*qubit_dephasing_rate >= 0.0))
    throw std::invalid_argument("DephasingConfig: qubit dephasing rate must be >= 0");
}

// --- building blocks -----------------------------------------------------------------

Superoperator left_multiply(const Operator& a) {
  return Superoperator(a.basis(), Eigen::kroneckerProduct(identity(a.basis()), a.matrix()).eval());
}

Superoperator right_multiply(const Operator& b) {
  return Superoperator(b.basis(), Eigen::kroneckerProduct(Matrix(b.matrix().transpose()), identity(b.basis())).eval());
}

Superoperator commutator(const Operator& a) {
  return Superoperator(a.basis(), left_multiply(a).matrix() - right_multiply(a).matrix());
}

Superoperator hamiltonian_generator(const Operator& h) { return -kI * commutator(h); }

Superoperator lindblad_dissipator(const Operator& jump) {
  const Operator ldl = jump.adjoint() * jump;
  const Matrix sandwich = Eigen::kroneckerProduct(Matrix(jump.matrix().conjugate()), jump.matrix()).eval();
  return Superoperator(jump.basis(),
                       sandwich - 0.5 * (left_multiply(ldl).matrix() + right_multiply(ldl).matrix()));
}

Superoperator dephasing_dissipator(const DephasingConfig& cfg, const Basis& basis) {
  cfg.validate();
  if (cfg.gamma == 0.0) return Superoperator::zero(basis);
  const Matrix c = commutator(number_op(basis)).matrix();
  return Superoperator(basis, -cfg.gamma * (c * c));
}

Superoperator dephasing_dissipator(const DephasingConfig& cfg, std::size_t cutoff) {
  return dephasing_dissipator(cfg, Basis{cutoff, Space::fock});
}

Superoperator qubit_dephasing_dissipator(double rate, const Basis& basis) {
  if (!(rate >= 0.0)) throw std::invalid_argument("qubit_dephasing_dissipator: rate must be >= 0");
  if (basis.space != Space::qubit_fock) throw std::invalid_argument("qubit_dephasing_dissipator: basis has no qubit");
  Matrix sz = Matrix::Zero(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index k = 0; k < sz.rows(); ++k) sz(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return lindblad_dissipator(Operator(basis, std::sqrt(0.5 * rate) * sz, "sqrt(g/2) sz"));
}

Superoperator beta_dissipator(const DephasingConfig& cfg, const Basis& basis) {
  cfg.validate();
  if (!cfg.qubit_dephasing_rate || *cfg.qubit_dephasing_rate == 0.0) return Superoperator::zero(basis);
  return qubit_dephasing_dissipator(*cfg.qubit_dephasing_rate, basis);
}

Superoperator lindbladian(const Operator& h, std::span<const Superoperator> dissipators) {
  Superoperator out = hamiltonian_generator(h);
  for (const Superoperator& d : dissipators) out = out + d;
  return out;
}

Superoperator lindbladian(const Operator& h, const DephasingConfig& cfg) {
  return hamiltonian_generator(h) + dephasing_dissipator(cfg, h.basis()) + beta_dissipator(cfg, h.basis());
}

Superoperator effective_lindbladian(const Operator& h, const DephasingConfig& cfg, double r, EffectiveForm form) {
  cfg.validate();
  if (!(r >= 0.0)) throw std::invalid_argument("effective_lindbladian: r must be >= 0");
  const Basis& basis = h.basis();
  const auto [a, ad] = ladder_ops(basis);
  const Operator x(basis, a.matrix() * a.matrix() + ad.matrix() * ad.matrix(), "a^2 + a^dag^2");
  const Matrix cx = commutator(x).matrix();
  const double s2 = std::sinh(2.0 * r);
  const double c2 = std::cosh(2.0 * r);
  double x_coeff = 0.0;
  switch (form) {
    case EffectiveForm::derived: x_coeff = -0.25 * cfg.gamma * s2 * s2; break;
    case EffectiveForm::as_printed: x_coeff = 0.25 * s2 * s2; break;
    case EffectiveForm::without_double_commutator: break;
  }

  Matrix out = std::cosh(r) * hamiltonian_generator(h).matrix() +
               c2 * c2 * dephasing_dissipator(cfg, basis).matrix() + x_coeff * (cx * cx) +
               beta_dissipator(cfg, basis).matrix();
  return Superoperator(basis, std::move(out));
}

// --- propagation -----------------------------------------------------------------------

double trace_distance(const Matrix& a, const Matrix& b) {
  const Matrix d = a - b;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.basis() == b.basis())) throw std::invalid_argument("trace_distance: basis mismatch");
  return trace_distance(a.matrix(), b.matrix());
}

Propagation propagate(const Superoperator& generator, const DensityMatrix& rho, double t) {
  if (!(generator.basis() == rho.basis())) throw std::invalid_argument("propagate: basis mismatch");
  if (!(t >= 0.0)) throw std::invalid_argument("propagate: t must be >= 0");
  const linalg::ExpmAction e(generator.matrix() * t);
  return finish(rho.basis(), unvec(e.apply(vec(rho.matrix())), rho.matrix().rows()));
}

Propagation lindblad_propagate(const DensityMatrix& rho, const Operator& h,
                               std::span<const Superoperator> dissipators, double t, double dt,
                               const PropagationOptions& opts) {
  if (!(h.basis() == rho.basis())) throw std::invalid_argument("lindblad_propagate: basis mismatch");
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("lindblad_propagate: t must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("lindblad_propagate: dt must be > 0");
  for (const Superoperator& d : dissipators)
    if (!(d.basis() == rho.basis())) throw std::invalid_argument("lindblad_propagate: dissipator basis mismatch");
  if (t == 0.0) return finish(rho.basis(), rho.matrix());

  const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-12));
  const double step = t / static_cast<double>(steps);
  const Superoperator gen = lindbladian(h, dissipators);
  const linalg::ExpmAction e(gen.matrix() * step);
  const auto n = rho.matrix().rows();

  Matrix v = vec(rho.matrix());
  if (opts.validate_step) {
    Matrix d_sum = Matrix::Zero(gen.matrix().rows(), gen.matrix().cols());
    for (const Superoperator& d : dissipators) d_sum += d.matrix();
    const double h_norm = linalg::HermitianSpectrum(h.matrix()).eigenvalues().cwiseAbs().maxCoeff();
    const double d_norm = d_sum.cwiseAbs().rowwise().sum().maxCoeff();
    const double scale = std::max(h_norm, d_norm);
    if (step * scale > 0.05) {
      std::ostringstream os;
      os << "lindblad_propagate: step-size too coarse (dt*rate " << step * scale << " > 0.05)";
      throw NumericalError(os.str());
    }
    const linalg::ExpmAction e_half(gen.matrix() * (0.5 * step));
    const Matrix one = e.apply(v);
    const Matrix two = e_half.apply(e_half.apply(v));
    const double disagreement = trace_distance(unvec(one, n), unvec(two, n));
    if (disagreement > 1e-6) {
      std::ostringstream os;
      os << "lindblad_propagate: step-size too coarse (halving disagreement " << disagreement << ")";
      throw NumericalError(os.str());
    }
  }
  for (std::size_t k = 0; k < steps; ++k) v = e.apply(v);
  return finish(rho.basis(), unvec(v, n));
}

std::vector<DensityMatrix> lindblad_trajectory(const Superoperator& generator, const DensityMatrix& rho, double dt,
                                               std::size_t steps) {
  if (!(generator.basis() == rho.basis())) throw std::invalid_argument("lindblad_trajectory: basis mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("lindblad_trajectory: dt must be > 0");
  const linalg::ExpmAction e(generator.matrix() * dt);
  const auto n = rho.matrix().rows();
  std::vector<DensityMatrix> out{rho};
  out.reserve(steps + 1);
  Matrix v = vec(rho.matrix());
  for (std::size_t k = 0; k < steps; ++k) {
    v = e.apply(v);
    out.push_back(finish(rho.basis(), unvec(v, n)).rho);
  }
  return out;
}

namespace {

// Runs the alternating sequence and calls `sample(rho)` after every
// `rounds_per_sample` rounds.
template <class Sample>
void run_strobe(const DensityMatrix& rho, const Operator& h, const DephasingConfig& cfg, double r, std::size_t n_rounds,
                double t, std::size_t rounds_per_sample, const PropagationOptions& opts, Sample&& sample) {
  if (!(h.basis() == rho.basis())) throw std::invalid_argument("stroboscopic_ha_propagate: basis mismatch");
  if (n_rounds < 1) throw std::invalid_argument("stroboscopic_ha_propagate: N must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("stroboscopic_ha_propagate: t must be >= 0");
  if (!(r >= 0.0)) throw std::invalid_argument("stroboscopic_ha_propagate: r must be >= 0");
  const Basis& basis = rho.basis();
  const auto n = rho.matrix().rows();

  const double dt = t / (2.0 * static_cast<double>(n_rounds));
  const linalg::ExpmAction lambda(lindbladian(h, cfg).matrix() * dt);
  const Squeezer squeezer(basis.cutoff);
  const Matrix s0 = lift_fock(basis, squeezer.matrix(SqueezeParams(r, 0.0)));
  const Matrix s_pi = lift_fock(basis, squeezer.matrix(SqueezeParams(r, std::numbers::pi)));
  const Matrix s0_dag = s0.adjoint();
  const Matrix s_pi_dag = s_pi.adjoint();

  Matrix x = rho.matrix();
  std::size_t segment = 0;
  auto check = [&](const Matrix& m) {
    const double leak = guard_population(basis, m);
    if (leak > opts.leakage_tol) {
      std::ostringstream os;
      os << "stroboscopic_ha_propagate: segment " << segment << " put " << leak
         << " population into the guard band (cutoff " << basis.cutoff << ")";
      throw LeakageBreach(os.str(), basis.cutoff, leak, segment);
    }
  };
  auto evolve = [&](const Matrix& m) { return unvec(lambda.apply(vec(m)), n); };

  for (std::size_t k = 0; k < n_rounds; ++k) {
    x = s0 * x * s0_dag;
    check(x);
    x = s0_dag * evolve(x) * s0;
    check(x);
    ++segment;
    x = s_pi * x * s_pi_dag;
    check(x);
    x = s_pi_dag * evolve(x) * s_pi;
    check(x);
    ++segment;
    if ((k + 1) % rounds_per_sample == 0) sample(x);
  }
}

}  // namespace

Propagation stroboscopic_ha_propagate(const DensityMatrix& rho, const Operator& h, const DephasingConfig& cfg,
                                      double r, std::size_t n_rounds, double t, const PropagationOptions& opts) {
  Matrix last = rho.matrix();
  run_strobe(rho, h, cfg, r, n_rounds, t, n_rounds, opts, [&](const Matrix& x) { last = x; });
  return finish(rho.basis(), std::move(last));
}

std::vector<DensityMatrix> stroboscopic_ha_trajectory(const DensityMatrix& rho, const Operator& h,
                                                      const DephasingConfig& cfg, double r, std::size_t n_rounds,
                                                      double t, std::size_t samples, const PropagationOptions& opts) {
  if (samples < 1 || n_rounds % samples != 0)
    throw std::invalid_argument("stroboscopic_ha_trajectory: samples must divide N");
  std::vector<DensityMatrix> out{rho};
  out.reserve(samples + 1);
  run_strobe(rho, h, cfg, r, n_rounds, t, n_rounds / samples, opts,
             [&](const Matrix& x) { out.push_back(finish(rho.basis(), x).rho); });
  return out;
}

double fit_decay_rate(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2) throw std::invalid_argument("fit_decay_rate: need >= 2 matched points");
  double st = 0.0;
  double sl = 0.0;
  double stt = 0.0;
  double stl = 0.0;
  const double m = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(y[i] > 0.0)) throw std::invalid_argument("fit_decay_rate: values must be positive");
    const double l = std::log(y[i]);
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
  }
  const double denom = m * stt - st * st;
  if (denom <= 0.0) throw std::invalid_argument("fit_decay_rate: degenerate time grid");
  return -(m * stl - st * sl) / denom;
}

}  // namespace squeeze_amp::open_system
