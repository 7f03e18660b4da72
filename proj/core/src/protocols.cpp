#include "squeeze_amp/protocols.hpp"

#include "squeeze_amp/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace squeeze_amp::protocols {

namespace {

using nlohmann::json;
using Strided = Eigen::Map<Matrix, 0, Eigen::Stride<Eigen::Dynamic, 2>>;

constexpr const char* kJcId = "jc";
constexpr const char* kCustomId = "custom";

double pulse_duration(const Pulse& p) {
  return std::visit([](const auto& x) { return x.duration_s; }, p);
}

std::size_t guarded_block(const Basis& b) {
  return b.space == Space::fock ? b.guarded_levels() : 2 * b.guarded_levels();
}

double guard_population(const Basis& b, const Vector& v) {
  const auto start = static_cast<Eigen::Index>(guarded_block(b));
  return v.tail(v.size() - start).squaredNorm();
}

// Applies an oscillator-only map f (acting on cutoff x k blocks) to columns of
// the full basis, leaving the qubit index untouched.
template <typename F>
Matrix apply_oscillator(const Basis& basis, const Matrix& x, F&& f) {
  if (basis.space == Space::fock) return f(x);
  Matrix out(x.rows(), x.cols());
  const auto c = static_cast<Eigen::Index>(basis.cutoff);
  for (Eigen::Index q = 0; q < 2; ++q) {
    Strided in(const_cast<Complex*>(x.data()) + q, c, x.cols(),
               Eigen::Stride<Eigen::Dynamic, 2>(x.rows(), 2));
    Strided dst(out.data() + q, c, x.cols(), Eigen::Stride<Eigen::Dynamic, 2>(out.rows(), 2));
    dst = f(Matrix(in));
  }
  return out;
}

}  // namespace

// --- PulseSequence ----------------------------------------------------------------

PulseSequence::PulseSequence(std::vector<Pulse> pulses) : pulses_(std::move(pulses)) {}

void PulseSequence::push_back(Pulse p) { pulses_.push_back(std::move(p)); }

void PulseSequence::append(const PulseSequence& other) {
  pulses_.insert(pulses_.end(), other.pulses_.begin(), other.pulses_.end());
  for (const auto& [id, h] : other.hamiltonians_) hamiltonians_.insert_or_assign(id, h);
}

void PulseSequence::register_hamiltonian(const std::string& id, Operator h) {
  if (!h.is_hermitian(1e-10)) throw std::invalid_argument("register_hamiltonian: '" + id + "' is not Hermitian");
  hamiltonians_.insert_or_assign(id, std::move(h));
}

void PulseSequence::validate() const {
  if (pulses_.empty()) throw std::invalid_argument("PulseSequence: empty sequence");
  for (std::size_t i = 0; i < pulses_.size(); ++i) {
    const double d = pulse_duration(pulses_[i]);
    if (!(d >= 0.0) || !std::isfinite(d))
      throw std::invalid_argument("PulseSequence: pulse " + std::to_string(i) + " has negative duration");
    if (const auto* e = std::get_if<EvolveH>(&pulses_[i])) {
      if (!hamiltonians_.contains(e->hamiltonian_id))
        throw std::invalid_argument("PulseSequence: unknown hamiltonian '" + e->hamiltonian_id + "'");
      if (!std::isfinite(e->omega)) throw std::invalid_argument("PulseSequence: non-finite omega");
    }
  }
}

std::string PulseSequence::to_json() const {
  json out = json::array();
  for (const Pulse& p : pulses_) {
    json j = {{"type", ""}, {"r", 0.0}, {"theta", 0.0}, {"alpha_mag", 0.0}, {"alpha_phase", 0.0},
              {"duration_s", pulse_duration(p)}};
    std::visit(
        [&j](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Squeeze>) {
            j["type"] = "squeeze";
            j["r"] = x.xi.r;
            j["theta"] = x.xi.theta;
          } else if constexpr (std::is_same_v<T, Displace>) {
            j["type"] = "displace";
            j["alpha_mag"] = x.alpha.magnitude;
            j["alpha_phase"] = x.alpha.phi;
          } else if constexpr (std::is_same_v<T, EvolveH>) {
            j["type"] = "evolve_h";
            j["hamiltonian_id"] = x.hamiltonian_id;
            j["omega"] = x.omega;
          } else {
            j["type"] = "wait";
          }
        },
        p);
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

PulseSequence PulseSequence::from_json(const std::string& text) {
  const json doc = json::parse(text);
  if (!doc.is_array()) throw std::invalid_argument("PulseSequence::from_json: expected a JSON list");
  PulseSequence seq;
  for (const json& j : doc) {
    const std::string type = j.at("type").get<std::string>();
    const double duration = j.value("duration_s", 0.0);
    if (type == "squeeze") {
      seq.push_back(Squeeze{SqueezeParams(j.at("r").get<double>(), j.value("theta", 0.0)), duration});
    } else if (type == "displace") {
      seq.push_back(
          Displace{DisplacementParams(j.at("alpha_mag").get<double>(), j.value("alpha_phase", 0.0)), duration});
    } else if (type == "evolve_h") {
      seq.push_back(EvolveH{j.at("hamiltonian_id").get<std::string>(), duration, j.value("omega", 1.0)});
    } else if (type == "wait") {
      seq.push_back(Wait{duration});
    } else {
      throw std::invalid_argument("PulseSequence::from_json: unknown pulse type '" + type + "'");
    }
  }
  return seq;
}

// --- HamiltonianSpec ---------------------------------------------------------------------

Basis HamiltonianSpec::basis() const {
  if (kind == Kind::custom_matrix) {
    if (!custom) throw std::invalid_argument("HamiltonianSpec: custom_matrix kind without a matrix");
    return custom->basis();
  }
  return Basis{cutoff, Space::qubit_fock};
}

void HamiltonianSpec::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("HamiltonianSpec: omega must be >= 0");
  if (!std::isfinite(rsb_phase)) throw std::invalid_argument("HamiltonianSpec: non-finite phase");
  if (kind == Kind::jaynes_cummings) {
    if (cutoff < 2) throw std::invalid_argument("HamiltonianSpec: cutoff must be >= 2");
  } else {
    if (!custom) throw std::invalid_argument("HamiltonianSpec: custom_matrix kind without a matrix");
    if (!custom->is_hermitian(1e-10)) throw std::invalid_argument("HamiltonianSpec: custom matrix not Hermitian");
  }
}

// --- gain prediction & builders -----------------------------------------------------------

Complex predicted_gain(Scheme scheme, double r, double theta, double phi) {
  if (!(r >= 0.0)) throw std::invalid_argument("predicted_gain: r must be >= 0");
  if (scheme == Scheme::phase_independent) return {std::cosh(r), 0.0};
  return std::cosh(r) + std::polar(std::sinh(r), theta - 2.0 * phi);
}

PulseSequence build_phase_sensitive(const DisplacementParams& alpha, const SqueezeParams& xi) {
  PulseSequence seq;
  if (xi.r == 0.0) {
    seq.push_back(Displace{alpha});
    return seq;
  }
  seq.push_back(Squeeze{xi});
  seq.push_back(Displace{alpha});
  seq.push_back(Squeeze{SqueezeParams(xi.r, xi.theta + std::numbers::pi)});
  return seq;
}

PulseSequence build_ha_displacement(const DisplacementParams& alpha, double r, std::size_t n_rounds,
                                    double theta_offset) {
  if (n_rounds < 1) throw std::invalid_argument("build_ha_displacement: N must be >= 1");
  if (!(r >= 0.0)) throw std::invalid_argument("build_ha_displacement: r must be >= 0");
  const std::size_t blocks = 2 * n_rounds;
  const DisplacementParams piece(alpha.magnitude / static_cast<double>(blocks), alpha.phi);
  PulseSequence seq;
  for (std::size_t k = 0; k < blocks; ++k) {
    const double th = theta_offset + (k % 2 == 0 ? 0.0 : std::numbers::pi);
    seq.push_back(Squeeze{SqueezeParams(r, th)});
    seq.push_back(Displace{piece});
    seq.push_back(Squeeze{SqueezeParams(r, th + std::numbers::pi)});
  }
  return seq;
}

Operator unit_hamiltonian(const HamiltonianSpec& spec) {
  if (spec.kind == HamiltonianSpec::Kind::custom_matrix) {
    spec.validate();
    return *spec.custom;
  }
  HamiltonianSpec unit = spec;
  unit.omega = 1.0;
  return jc_hamiltonian(unit);
}

Operator jc_hamiltonian(const HamiltonianSpec& spec) {
  if (spec.kind != HamiltonianSpec::Kind::jaynes_cummings)
    throw std::invalid_argument("jc_hamiltonian: spec kind is not jaynes_cummings");
  spec.validate();
  const Basis basis{spec.cutoff, Space::qubit_fock};
  const auto n = static_cast<Eigen::Index>(basis.size());
  Matrix h = Matrix::Zero(n, n);
  const Complex coupling = std::polar(spec.omega, spec.rsb_phase);
  for (Eigen::Index k = 0; k + 1 < static_cast<Eigen::Index>(spec.cutoff); ++k) {
    // sigma^- a^dag : |up, k> -> sqrt(k+1) |down, k+1>
    const Eigen::Index up_k = 2 * k;
    const Eigen::Index down_k1 = 2 * (k + 1) + 1;
    const double amp = std::sqrt(static_cast<double>(k + 1));
    h(down_k1, up_k) = coupling * amp;
    h(up_k, down_k1) = std::conj(coupling) * amp;
  }
  return Operator(basis, std::move(h), "H_JC");
}

PulseSequence build_ha_trotter(const HamiltonianSpec& spec, double r, double t_total, std::size_t n_rounds) {
  spec.validate();
  if (n_rounds < 1) throw std::invalid_argument("build_ha_trotter: N must be >= 1");
  if (!(t_total > 0.0) || !std::isfinite(t_total)) throw std::invalid_argument("build_ha_trotter: t_total must be > 0");
  if (!(r >= 0.0)) throw std::invalid_argument("build_ha_trotter: r must be >= 0");

  const std::string id = spec.kind == HamiltonianSpec::Kind::jaynes_cummings ? kJcId : kCustomId;
  const double dt = t_total / (2.0 * static_cast<double>(n_rounds));
  const SqueezeParams s0(r, 0.0);
  const SqueezeParams s0_dag(r, std::numbers::pi);
  const SqueezeParams s_pi(r, std::numbers::pi);
  const SqueezeParams s_pi_dag(r, 2.0 * std::numbers::pi);

  PulseSequence seq;
  seq.register_hamiltonian(id, unit_hamiltonian(spec));
  for (std::size_t k = 0; k < n_rounds; ++k) {
    seq.push_back(Squeeze{s0});
    seq.push_back(EvolveH{id, dt, spec.omega});
    seq.push_back(Squeeze{s0_dag});
    seq.push_back(Squeeze{s_pi});
    seq.push_back(EvolveH{id, dt, spec.omega});
    seq.push_back(Squeeze{s_pi_dag});
  }
  return seq;
}

std::size_t sequence_cutoff(double r, double alpha_mag) {
  if (!(r >= 0.0) || !(alpha_mag >= 0.0)) throw std::invalid_argument("sequence_cutoff: r and alpha_mag must be >= 0");
  return cutoff_policy::default_cutoff(r, alpha_mag * std::exp(r));
}

double trotter_step_bound(double omega, double r) {
  if (!(omega > 0.0)) throw std::invalid_argument("trotter_step_bound: omega must be > 0");
  if (!(r >= 0.0)) throw std::invalid_argument("trotter_step_bound: r must be >= 0");
  if (r == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (omega * std::sqrt(std::sinh(2.0 * r)));
}

// --- SequenceEngine ------------------------------------------------------------------------

SequenceEngine::SequenceEngine(Basis basis, const std::map<std::string, Operator>& hamiltonians)
    : basis_(basis), squeezer_(basis.cutoff), displacer_(basis.cutoff) {
  for (const auto& [id, h] : hamiltonians) {
    if (!(h.basis() == basis_))
      throw std::invalid_argument("SequenceEngine: hamiltonian '" + id + "' lives on a different basis");
    spectra_.emplace(id, linalg::HermitianSpectrum(h.matrix()));
  }
}

Matrix SequenceEngine::apply(const Pulse& p, const Matrix& x) const {
  return std::visit(
      [&](const auto& pulse) -> Matrix {
        using T = std::decay_t<decltype(pulse)>;
        if constexpr (std::is_same_v<T, Squeeze>) {
          return apply_oscillator(basis_, x, [&](const Matrix& b) { return squeezer_.apply(pulse.xi, b); });
        } else if constexpr (std::is_same_v<T, Displace>) {
          return apply_oscillator(basis_, x, [&](const Matrix& b) { return displacer_.apply(pulse.alpha, b); });
        } else if constexpr (std::is_same_v<T, EvolveH>) {
          const auto it = spectra_.find(pulse.hamiltonian_id);
          if (it == spectra_.end())
            throw std::invalid_argument("SequenceEngine: unknown hamiltonian '" + pulse.hamiltonian_id + "'");
          return it->second.apply(pulse.omega * pulse.duration_s, x);
        } else {
          return x;
        }
      },
      p);
}

StateVector SequenceEngine::run(const StateVector& psi, const PulseSequence& seq, double leakage_tol) const {
  if (!(psi.basis() == basis_)) throw std::invalid_argument("SequenceEngine::run: state basis mismatch");
  seq.validate();
  Matrix x = psi.amplitudes();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    x = apply(seq.pulses()[i], x);
    const double leak = guard_population(basis_, x.col(0));
    if (leak > leakage_tol) {
      std::ostringstream os;
      os << "pulse " << i << " pushed " << leak << " population into the guard band (cutoff " << basis_.cutoff
         << ")";
      throw LeakageBreach(os.str(), basis_.cutoff, leak, i);
    }
  }
  return StateVector::from_evolved(basis_, x.col(0));
}

DensityMatrix SequenceEngine::run(const DensityMatrix& rho, const PulseSequence& seq, double leakage_tol) const {
  if (!(rho.basis() == basis_)) throw std::invalid_argument("SequenceEngine::run: state basis mismatch");
  seq.validate();
  Matrix x = rho.matrix();
  const auto start = static_cast<Eigen::Index>(guarded_block(basis_));
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Matrix ux = apply(seq.pulses()[i], x);
    x = apply(seq.pulses()[i], Matrix(ux.adjoint())).adjoint();
    const double leak = x.diagonal().tail(x.rows() - start).real().sum();
    if (leak > leakage_tol) {
      std::ostringstream os;
      os << "pulse " << i << " pushed " << leak << " population into the guard band (cutoff " << basis_.cutoff
         << ")";
      throw LeakageBreach(os.str(), basis_.cutoff, leak, i);
    }
  }
  x = 0.5 * (x + x.adjoint()).eval();
  const double tr = x.trace().real();
  if (std::abs(tr - 1.0) > 1e-8) throw NumericalError("SequenceEngine::run: trace drifted to " + std::to_string(tr));
  return DensityMatrix(basis_, x / tr);
}

Matrix SequenceEngine::pulse_unitary(const Pulse& p) const {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  return apply(p, Matrix::Identity(n, n));
}

Matrix SequenceEngine::unitary(const PulseSequence& seq) const {
  seq.validate();
  const auto n = static_cast<Eigen::Index>(basis_.size());
  Matrix u = Matrix::Identity(n, n);
  for (const Pulse& p : seq.pulses()) u = apply(p, u);
  return u;
}

StateVector evolve_sequence(const StateVector& psi, const PulseSequence& seq) {
  return SequenceEngine(psi.basis(), seq.hamiltonians()).run(psi, seq);
}

DensityMatrix evolve_sequence(const DensityMatrix& rho, const PulseSequence& seq) {
  return SequenceEngine(rho.basis(), seq.hamiltonians()).run(rho, seq);
}

GainReport estimate_gain(const StateVector& out, Complex alpha_in) {
  if (std::abs(alpha_in) == 0.0) throw std::invalid_argument("estimate_gain: input amplitude is zero");
  GainReport rep;
  rep.g_complex = mean_displacement(out) / alpha_in;
  rep.g_abs = std::abs(rep.g_complex);
  rep.phase_deg = std::arg(rep.g_complex) * 180.0 / std::numbers::pi;
  rep.phi_swept = std::arg(alpha_in);
  return rep;
}

std::vector<double> jc_upper_population(const HamiltonianSpec& spec, double r, std::size_t n_rounds,
                                        std::span<const double> times) {
  spec.validate();
  const Basis basis = spec.basis();
  if (basis.space != Space::qubit_fock) throw std::invalid_argument("jc_upper_population: needs a qubit_fock basis");
  const std::string id = spec.kind == HamiltonianSpec::Kind::jaynes_cummings ? kJcId : kCustomId;
  const SequenceEngine engine(basis, {{id, unit_hamiltonian(spec)}});
  const StateVector psi0 = vacuum_state(basis);  // index 0 = |up, 0>

  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t == 0.0) {
      out.push_back(1.0);
      continue;
    }
    const StateVector psi = engine.run(psi0, build_ha_trotter(spec, r, t, n_rounds));
    double p_up = 0.0;
    for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(basis.cutoff); ++n) p_up += std::norm(psi.amplitudes()(2 * n));
    out.push_back(p_up);
  }
  return out;
}

std::vector<double> jc_upper_population_adaptive(HamiltonianSpec& spec, double r, std::size_t n_rounds,
                                                 std::span<const double> times, std::size_t max_growths) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return jc_upper_population(spec, r, n_rounds, times);
    } catch (const LeakageBreach&) {
      if (attempt == max_growths) throw;
      spec.cutoff += std::max<std::size_t>(8, spec.cutoff / 4);
    }
  }
}

double trotter_deviation(const HamiltonianSpec& spec, double r, double t_total, std::size_t n_rounds,
                         std::size_t guard_levels) {
  spec.validate();
  const Basis basis = spec.basis();
  if (guard_levels < 1 || guard_levels > basis.cutoff)
    throw std::invalid_argument("trotter_deviation: guard_levels out of range");
  const Operator h = unit_hamiltonian(spec);
  const std::string id = spec.kind == HamiltonianSpec::Kind::jaynes_cummings ? kJcId : kCustomId;
  const SequenceEngine engine(basis, {{id, h}});

  const PulseSequence one_round =
      build_ha_trotter(spec, r, t_total / static_cast<double>(n_rounds), 1);
  const Matrix step = engine.unitary(one_round);
  Matrix u = step;
  for (std::size_t k = 1; k < n_rounds; ++k) u = step * u;

  const Matrix target = linalg::HermitianSpectrum(h.matrix()).propagator(std::cosh(r) * spec.omega * t_total);
  const std::size_t block = basis.space == Space::fock ? guard_levels : 2 * guard_levels;
  return max_abs_diff(u, target, block);
}

}  // namespace squeeze_amp::protocols
