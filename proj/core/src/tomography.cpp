#include "squeeze_amp/tomography.hpp"

#include "squeeze_amp/errors.hpp"
#include "squeeze_amp/parallel.hpp"

#include "json.hpp"

#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace squeeze_amp::tomography {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPi = std::numbers::pi;
constexpr double kTail = 1e-12;
constexpr std::size_t kGrid = 201;
constexpr double kLowQuantile = 0.15865525393145707;
constexpr double kHighQuantile = 0.8413447460685429;

VectorXd centered(const BsbTrace& trace) {
  VectorXd b(static_cast<Eigen::Index>(trace.size()));
  for (std::size_t i = 0; i < trace.size(); ++i) b(static_cast<Eigen::Index>(i)) = trace.p_down[i] - 0.5;
  return b;
}

double rms(const VectorXd& r) { return r.size() == 0 ? 0.0 : std::sqrt(r.squaredNorm() / static_cast<double>(r.size())); }

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Interval percentile_interval(const std::vector<double>& samples) {
  return {quantile(samples, kLowQuantile), quantile(samples, kHighQuantile)};
}

// b* = fit + resampled residuals, one stream per resample.
template <class Refit>
std::vector<VectorXd> bootstrap(const VectorXd& fitted, const VectorXd& residuals, const FitOptions& opts,
                                Refit&& refit) {
  std::vector<VectorXd> out(opts.bootstrap_resamples);
  const auto m = residuals.size();
  parallel_for(opts.bootstrap_resamples, opts.jobs, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(opts.seed, k));
    std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
    VectorXd b = fitted;
    for (Eigen::Index i = 0; i < m; ++i) b(i) += residuals(pick(rng));
    out[k] = refit(b);
  });
  return out;
}

std::size_t levels_for(Model model) {
  const double top = model_parameter_range(model).hi;
  std::vector<double> p;
  std::size_t count = 16;
  for (;; count *= 2) {
    switch (model) {
      case Model::coherent: p = coherent_populations(top, count); break;
      case Model::squeezed_vacuum: p = squeezed_vacuum_populations(top, count); break;
      case Model::thermal: p = thermal_populations(top, count); break;
      default: throw std::invalid_argument("levels_for: not a population model");
    }
    double s = 0.0;
    for (double x : p) s += x;
    if (1.0 - s < kTail) break;
  }
  return count;
}

std::string param_name(Model model) {
  switch (model) {
    case Model::coherent: return "alpha";
    case Model::squeezed_vacuum: return "r";
    case Model::thermal: return "nbar";
    default: throw std::invalid_argument("param_name: not a scalar population model");
  }
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

// --- types ----------------------------------------------------------------------------

void BsbTrace::validate() const {
  if (times.empty()) throw std::invalid_argument("BsbTrace: empty");
  if (p_down.size() != times.size() || shots.size() != times.size())
    throw std::invalid_argument("BsbTrace: times, p_down and shots must have equal length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw std::invalid_argument("BsbTrace: times must be finite, >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw std::invalid_argument("BsbTrace: times must be strictly increasing");
    if (!(p_down[i] >= 0.0 && p_down[i] <= 1.0)) throw std::invalid_argument("BsbTrace: p_down outside [0, 1]");
    if (shots[i] < 0) throw std::invalid_argument("BsbTrace: negative shot count");
  }
}

void SidebandCal::validate() const {
  if (!(omega_sb > 0.0) || !std::isfinite(omega_sb)) throw std::invalid_argument("SidebandCal: Omega_SB must be > 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("SidebandCal: gamma must be >= 0");
  if (decay_exponent != 0.5 && decay_exponent != 0.7)
    throw std::invalid_argument("SidebandCal: decay exponent must be 0.5 or 0.7");
}

std::string to_string(Model m) {
  switch (m) {
    case Model::model_free: return "model_free";
    case Model::coherent: return "coherent";
    case Model::squeezed_vacuum: return "squeezed_vacuum";
    case Model::thermal: return "thermal";
    case Model::rabi_sinusoid: return "rabi_sinusoid";
  }
  return "unknown";
}

std::string FitResult::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = to_string(model);
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (const auto& [k, v] : params) p[k] = finite_or_null(v);
  j["params"] = p;
  nlohmann::ordered_json ci = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ci68) ci[k] = {finite_or_null(v.lo), finite_or_null(v.hi)};
  j["ci68"] = ci;
  j["residual_rms"] = finite_or_null(residual_rms);
  if (populations) {
    j["populations"] = populations->probs;
  } else {
    j["populations"] = nullptr;
  }
  if (rank > 0) {
    j["rank"] = rank;
    j["condition_number"] = finite_or_null(condition_number);
  }
  j["at_boundary"] = at_boundary;
  return j.dump(2);
}

// --- signal model -----------------------------------------------------------------------

MatrixXd design_matrix(const SidebandCal& cal, std::span<const double> times, std::size_t levels) {
  cal.validate();
  MatrixXd f(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(levels));
  for (std::size_t n = 0; n < levels; ++n) {
    const double m = static_cast<double>(n + 1);
    const double w = cal.omega_sb * std::sqrt(m);
    const double g = cal.gamma * std::pow(m, cal.decay_exponent);
    for (std::size_t i = 0; i < times.size(); ++i)
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = 0.5 * std::exp(-g * times[i]) * std::cos(w * times[i]);
  }
  return f;
}

BsbTrace bsb_signal(const PopulationVector& p, const SidebandCal& cal, std::span<const double> times) {
  if (p.probs.empty()) throw std::invalid_argument("bsb_signal: empty population vector");
  for (double x : p.probs)
    if (!(x >= 0.0)) throw std::invalid_argument("bsb_signal: populations must be >= 0");
  if (p.sum() > 1.0 + 1e-8) throw std::invalid_argument("bsb_signal: populations sum above 1");
  const MatrixXd f = design_matrix(cal, times, p.probs.size());
  const VectorXd y = f * Eigen::Map<const VectorXd>(p.probs.data(), static_cast<Eigen::Index>(p.probs.size()));
  BsbTrace out;
  out.times.assign(times.begin(), times.end());
  out.p_down.resize(times.size());
  out.shots.assign(times.size(), 0);
  for (std::size_t i = 0; i < times.size(); ++i)
    out.p_down[i] = std::clamp(0.5 + y(static_cast<Eigen::Index>(i)), 0.0, 1.0);
  out.validate();
  return out;
}

std::vector<double> default_time_grid(const SidebandCal& cal, std::size_t points, double periods) {
  cal.validate();
  if (points < 2) throw std::invalid_argument("default_time_grid: need >= 2 points");
  if (!(periods > 0.0)) throw std::invalid_argument("default_time_grid: periods must be > 0");
  const double span = periods * 2.0 * kPi / cal.omega_sb;
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i) t[i] = span * static_cast<double>(i) / static_cast<double>(points - 1);
  return t;
}

BsbTrace sample_trace(const BsbTrace& trace, int shots, std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("sample_trace: shots must be >= 1");
  trace.validate();
  std::mt19937_64 rng(seed);
  BsbTrace out = trace;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::binomial_distribution<int> draw(shots, std::clamp(trace.p_down[i], 0.0, 1.0));
    out.p_down[i] = static_cast<double>(draw(rng)) / static_cast<double>(shots);
    out.shots[i] = shots;
  }
  out.seed = seed;
  return out;
}

// --- model-free ---------------------------------------------------------------------------

VectorXd simplex_least_squares(const MatrixXd& a, const VectorXd& b) {
  const Eigen::Index n = a.cols();
  if (n == 0 || a.rows() != b.size()) throw std::invalid_argument("simplex_least_squares: shape mismatch");
  const MatrixXd q = a.transpose() * a;
  const VectorXd c = a.transpose() * b;
  const double mu_tol = 1e-12 * std::max(1.0, q.norm());

  VectorXd x = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<bool> free(static_cast<std::size_t>(n), true);

  for (int iter = 0; iter < 20 * n + 100; ++iter) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(idx.size());

    MatrixXd kkt = MatrixXd::Zero(k + 1, k + 1);
    VectorXd rhs(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) kkt(i, j) = q(idx[i], idx[j]);
      kkt(i, k) = 1.0;
      kkt(k, i) = 1.0;
      rhs(i) = c(idx[i]);
    }
    rhs(k) = 1.0;
    const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);

    VectorXd step(k);
    for (Eigen::Index i = 0; i < k; ++i) step(i) = sol(i) - x(idx[i]);

    if (step.lpNorm<Eigen::Infinity>() <= 1e-13) {
      const double nu = sol(k);
      const VectorXd g = q * x - c;
      Eigen::Index release = -1;
      double worst = -mu_tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[static_cast<std::size_t>(i)]) continue;
        const double mu = g(i) + nu;
        if (mu < worst) {
          worst = mu;
          release = i;
        }
      }
      if (release < 0) return x;
      free[static_cast<std::size_t>(release)] = true;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (step(i) < 0.0) {
        const double ratio = -x(idx[i]) / step(i);
        if (ratio < alpha) {
          alpha = ratio;
          blocking = idx[i];
        }
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) x(idx[i]) += alpha * step(i);
    if (blocking >= 0) {
      x(blocking) = 0.0;
      free[static_cast<std::size_t>(blocking)] = false;
    }
  }
  throw FitError("simplex_least_squares: active set did not converge");
}

FitResult fit_model_free(const BsbTrace& trace, const SidebandCal& cal, std::size_t n_max, const FitOptions& opts) {
  trace.validate();
  cal.validate();
  const std::size_t levels = n_max + 1;
  if (levels > trace.size()) throw std::invalid_argument("fit_model_free: n_max + 1 exceeds the number of points");

  const MatrixXd f = design_matrix(cal, trace.times, levels);
  Eigen::JacobiSVD<MatrixXd> svd(f);
  const VectorXd& sv = svd.singularValues();
  const double tol = sv(0) * 1e-10 * static_cast<double>(std::max(f.rows(), f.cols()));
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;

  FitResult out;
  out.model = Model::model_free;
  out.rank = rank;
  out.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (rank < levels) {
    std::ostringstream os;
    os << "fit_model_free: design matrix rank " << rank << " < " << levels
       << " (condition " << out.condition_number << "); time grid too short or aliased";
    throw FitError(os.str());
  }

  const VectorXd b = centered(trace);
  const VectorXd p = simplex_least_squares(f, b);
  const VectorXd fitted = f * p;
  const VectorXd resid = b - fitted;
  out.residual_rms = rms(resid);

  PopulationVector pv;
  pv.probs.assign(p.data(), p.data() + p.size());
  pv.leakage = std::max(0.0, 1.0 - pv.sum());
  out.populations = pv;
  for (std::size_t n = 0; n < levels; ++n) out.params["P" + std::to_string(n)] = p(static_cast<Eigen::Index>(n));

  if (opts.bootstrap_resamples > 0) {
    const auto reps = bootstrap(fitted, resid, opts, [&](const VectorXd& bs) { return simplex_least_squares(f, bs); });
    for (std::size_t n = 0; n < levels; ++n) {
      std::vector<double> s(reps.size());
      for (std::size_t k = 0; k < reps.size(); ++k) s[k] = reps[k](static_cast<Eigen::Index>(n));
      out.ci68["P" + std::to_string(n)] = percentile_interval(s);
    }
  }
  return out;
}

// --- model-based ----------------------------------------------------------------------------

Interval model_parameter_range(Model model) {
  switch (model) {
    case Model::coherent: return {0.0, 4.0};
    case Model::squeezed_vacuum: return {0.0, 2.5};
    case Model::thermal: return {0.0, 4.0};
    default: throw std::invalid_argument("model_parameter_range: not a scalar population model");
  }
}

std::vector<double> model_populations(Model model, double value) {
  static const std::size_t coherent_levels = levels_for(Model::coherent);
  static const std::size_t squeezed_levels = levels_for(Model::squeezed_vacuum);
  static const std::size_t thermal_levels = levels_for(Model::thermal);
  switch (model) {
    case Model::coherent: return coherent_populations(value, coherent_levels);
    case Model::squeezed_vacuum: return squeezed_vacuum_populations(value, squeezed_levels);
    case Model::thermal: return thermal_populations(value, thermal_levels);
    default: throw std::invalid_argument("model_populations: not a scalar population model");
  }
}

FitResult fit_model(const BsbTrace& trace, Model model, const SidebandCal& cal, const FitOptions& opts) {
  trace.validate();
  cal.validate();
  const Interval range = model_parameter_range(model);
  const std::string name = param_name(model);
  const std::size_t levels = model_populations(model, range.lo).size();
  const MatrixXd f = design_matrix(cal, trace.times, levels);
  const VectorXd b = centered(trace);

  auto predict = [&](double v) {
    const std::vector<double> p = model_populations(model, v);
    return VectorXd(f * Eigen::Map<const VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
  };

  const double h = (range.hi - range.lo) / static_cast<double>(kGrid - 1);
  auto refine = [&](const VectorXd& target, double lo, double hi) {
    auto cost = [&](double v) { return (predict(v) - target).squaredNorm(); };
    std::uintmax_t iters = 200;
    const auto [v, c] = boost::math::tools::brent_find_minima(cost, lo, hi, 40, iters);
    if (iters >= 200 || !std::isfinite(c)) throw FitError("fit_model: refinement did not converge");
    return v;
  };
  auto solve = [&](const VectorXd& target, double lo, double hi, std::size_t grid) {
    double best = lo;
    double best_cost = std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / static_cast<double>(grid - 1);
    for (std::size_t i = 0; i < grid; ++i) {
      const double v = lo + step * static_cast<double>(i);
      const double c = (predict(v) - target).squaredNorm();
      if (c < best_cost) {
        best_cost = c;
        best = v;
      }
    }
    if (!std::isfinite(best_cost)) throw FitError("fit_model: objective not finite on the search grid");
    return refine(target, std::max(lo, best - step), std::min(hi, best + step));
  };

  const double v = solve(b, range.lo, range.hi, kGrid);
  const VectorXd fitted = predict(v);
  const VectorXd resid = b - fitted;

  FitResult out;
  out.model = model;
  out.params[name] = v;
  out.residual_rms = rms(resid);
  const double edge = 1e-6 * (range.hi - range.lo);
  out.at_boundary = v - range.lo < edge || range.hi - v < edge;

  std::vector<double> p = model_populations(model, v);
  PopulationVector pv;
  pv.probs.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(p.size(), 16)));
  pv.leakage = std::max(0.0, 1.0 - pv.sum());
  out.populations = pv;

  if (opts.bootstrap_resamples > 0) {
    const double lo = std::max(range.lo, v - 10.0 * h);
    const double hi = std::min(range.hi, v + 10.0 * h);
    const auto reps = bootstrap(fitted, resid, opts, [&](const VectorXd& bs) {
      VectorXd r(1);
      r(0) = solve(bs, lo, hi, 21);
      return r;
    });
    std::vector<double> s(reps.size());
    for (std::size_t k = 0; k < reps.size(); ++k) s[k] = reps[k](0);
    out.ci68[name] = percentile_interval(s);
  }
  return out;
}

// --- decaying sinusoid ------------------------------------------------------------------------

namespace {

// x = [amplitude, decay_rate, f, phase, offset]
struct SinusoidFunctor {
  using Scalar = double;
  using InputType = VectorXd;
  using ValueType = VectorXd;
  using JacobianType = MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::span<const double> t;
  std::span<const double> y;

  int inputs() const { return 5; }
  int values() const { return static_cast<int>(t.size()); }

  int operator()(const VectorXd& x, VectorXd& fvec) const {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = std::exp(-x(1) * t[i]);
      fvec(static_cast<Eigen::Index>(i)) = x(0) * e * std::cos(2.0 * kPi * x(2) * t[i] + x(3)) + x(4) - y[i];
    }
    return 0;
  }

  int df(const VectorXd& x, MatrixXd& jac) const {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double e = std::exp(-x(1) * t[i]);
      const double arg = 2.0 * kPi * x(2) * t[i] + x(3);
      const double c = std::cos(arg);
      const double s = std::sin(arg);
      jac(r, 0) = e * c;
      jac(r, 1) = -t[i] * x(0) * e * c;
      jac(r, 2) = -2.0 * kPi * t[i] * x(0) * e * s;
      jac(r, 3) = -x(0) * e * s;
      jac(r, 4) = 1.0;
    }
    return 0;
  }
};

}  // namespace

FitResult fit_rabi(std::span<const double> times, std::span<const double> values, const RabiOptions& opts) {
  const std::size_t m = times.size();
  if (values.size() != m) throw std::invalid_argument("fit_rabi: times and values differ in length");
  if (m < opts.min_points) throw std::invalid_argument("fit_rabi: too few points");
  for (std::size_t i = 1; i < m; ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("fit_rabi: times must be strictly increasing");
  const double span = times[m - 1] - times[0];

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(m);

  // Periodogram over [1/(2 span), m/(2 span)] at 1/(8 span) resolution.
  const double df = 1.0 / (8.0 * span);
  const auto bins = static_cast<std::size_t>(std::ceil((static_cast<double>(m) / 2.0 - 0.5) * 8.0)) + 1;
  std::vector<double> power(bins);
  std::vector<std::complex<double>> coef(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double fk = 0.5 / span + df * static_cast<double>(k);
    std::complex<double> s{0.0, 0.0};
    for (std::size_t i = 0; i < m; ++i) s += (values[i] - mean) * std::polar(1.0, -2.0 * kPi * fk * (times[i] - times[0]));
    coef[k] = s;
    power[k] = std::norm(s);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  std::vector<double> sorted = power;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(bins / 2), sorted.end());
  const double floor = sorted[bins / 2];
  if (!(power[peak] > opts.peak_to_floor * floor) || power[peak] == 0.0)
    throw FitError("fit_rabi: no spectral peak above the noise floor");

  const double f0 = 0.5 / span + df * static_cast<double>(peak);
  if (f0 * span < opts.min_periods) throw FitError("fit_rabi: data span fewer than the required oscillation periods");

  VectorXd x(5);
  x << 2.0 * std::abs(coef[peak]) / static_cast<double>(m), 0.0, f0,
      std::arg(coef[peak]) - 2.0 * kPi * f0 * times[0], mean;

  SinusoidFunctor fun{times, values};
  Eigen::LevenbergMarquardt<SinusoidFunctor> lm(fun);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-14;
  const auto status = lm.minimize(x);
  using namespace Eigen::LevenbergMarquardtSpace;
  if (status == ImproperInputParameters || status == TooManyFunctionEvaluation || !x.allFinite())
    throw FitError("fit_rabi: Levenberg-Marquardt did not converge");

  if (x(0) < 0.0) {
    x(0) = -x(0);
    x(3) += kPi;
  }
  x(3) = std::remainder(x(3), 2.0 * kPi);
  x(2) = std::abs(x(2));
  if (x(2) * span < opts.min_periods) throw FitError("fit_rabi: fitted frequency spans fewer than the required periods");

  VectorXd resid(static_cast<Eigen::Index>(m));
  fun(x, resid);
  MatrixXd jac(static_cast<Eigen::Index>(m), 5);
  fun.df(x, jac);

  FitResult out;
  out.model = Model::rabi_sinusoid;
  out.residual_rms = rms(resid);
  out.params["amplitude"] = x(0);
  out.params["decay_rate"] = x(1);
  out.params["tau"] = x(1) > 0.0 ? 1.0 / x(1) : std::numeric_limits<double>::infinity();
  out.params["f"] = x(2);
  out.params["Omega"] = kPi * x(2);
  out.params["phase"] = x(3);
  out.params["offset"] = x(4);

  if (m > 5) {
    const double sigma2 = resid.squaredNorm() / static_cast<double>(m - 5);
    const MatrixXd cov = sigma2 * (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse();
    auto band = [&](double v, double var) { return Interval{v - std::sqrt(var), v + std::sqrt(var)}; };
    out.ci68["amplitude"] = band(x(0), cov(0, 0));
    out.ci68["decay_rate"] = band(x(1), cov(1, 1));
    out.ci68["f"] = band(x(2), cov(2, 2));
    out.ci68["Omega"] = band(kPi * x(2), kPi * kPi * cov(2, 2));
    out.ci68["phase"] = band(x(3), cov(3, 3));
    out.ci68["offset"] = band(x(4), cov(4, 4));
  }
  return out;
}

FitResult fit_rabi(const BsbTrace& trace, const RabiOptions& opts) {
  trace.validate();
  return fit_rabi(trace.times, trace.p_down, opts);
}

// --- CSV ---------------------------------------------------------------------------------------

void write_trace_csv(std::ostream& os, const BsbTrace& trace) {
  trace.validate();
  std::ostringstream buf;
  buf.precision(17);
  buf << "time_s,p_down,shots\n";
  for (std::size_t i = 0; i < trace.size(); ++i) buf << trace.times[i] << ',' << trace.p_down[i] << ',' << trace.shots[i] << '\n';
  os << buf.str();
}

BsbTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("read_trace_csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_s,p_down,shots") throw std::invalid_argument("read_trace_csv: header must be time_s,p_down,shots");
  BsbTrace out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
      throw std::invalid_argument("read_trace_csv: line " + std::to_string(lineno) + ": expected 3 fields");
    try {
      out.times.push_back(std::stod(a));
      out.p_down.push_back(std::stod(b));
      out.shots.push_back(std::stoi(c));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("read_trace_csv: line " + std::to_string(lineno) + ": malformed number");
    }
  }
  out.validate();
  return out;
}

}  // namespace squeeze_amp::tomography
