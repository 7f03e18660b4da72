#include "squeeze_amp/cli/runner.hpp"

#include "squeeze_amp/errors.hpp"
#include "squeeze_amp/fock.hpp"
#include "squeeze_amp/open_system.hpp"
#include "squeeze_amp/parallel.hpp"
#include "squeeze_amp/protocols.hpp"
#include "squeeze_amp/tomography.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace squeeze_amp::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;
constexpr const char* kVersion = "0.1.0";

const std::map<std::string, Experiment>& experiment_names() {
  static const std::map<std::string, Experiment> names{
      {"phase_sweep", Experiment::phase_sweep},
      {"jc_ha", Experiment::jc_ha},
      {"trotter_convergence", Experiment::trotter_convergence},
      {"lindblad_compare", Experiment::lindblad_compare},
      {"tomography_roundtrip", Experiment::tomography_roundtrip},
  };
  return names;
}

// Defaults per experiment kind. The key set is also the set of accepted fields.
json defaults_for(Experiment e) {
  const double omega = 2.0 * kPi * 1000.0;
  json d;
  d["experiment"] = to_string(e);
  switch (e) {
    case Experiment::phase_sweep: {
      std::vector<double> phis(10);
      for (std::size_t k = 0; k < phis.size(); ++k) phis[k] = kPi * static_cast<double>(k) / 10.0;
      d["r"] = 1.38;
      d["theta"] = 0.0;
      d["alpha_mag"] = 0.55;
      d["phi_list"] = phis;
      d["N"] = 1;
      d["cutoff"] = 0;
      d["leakage_tol"] = cutoff_policy::leakage_tol;
      break;
    }
    case Experiment::jc_ha:
      d["r"] = 1.1;
      d["N"] = 6;
      d["Omega"] = omega;
      d["t_total"] = 0.0;
      d["cutoff"] = 0;
      d["points"] = 41;
      break;
    case Experiment::trotter_convergence:
      d["r"] = 0.5;
      d["N_list"] = std::vector<std::size_t>{2, 4, 8, 16, 32, 64};
      d["Omega"] = omega;
      d["t_total"] = 2.5e-4;
      d["cutoff"] = 32;
      d["guard_levels"] = 4;
      break;
    case Experiment::lindblad_compare:
      d["r"] = 0.3;
      d["N"] = 64;
      d["Omega"] = omega;
      d["Gamma"] = 0.01 * omega;
      d["qubit_dephasing_rate"] = 0.0;
      d["t_total"] = 5e-5;
      d["cutoff"] = 16;
      d["points"] = 9;
      d["hamiltonian"] = "jc";
      d["leakage_tol"] = 1e-3;
      break;
    case Experiment::tomography_roundtrip:
      d["state"] = "coherent";
      d["alpha_mag"] = 0.55;
      d["r"] = 1.38;
      d["nbar"] = 0.06;
      d["points"] = 50;
      d["shots"] = 300;
      d["repetitions"] = 20;
      d["omega_sb"] = 2.0 * kPi * 40e3;
      d["gamma_sb"] = 300.0;
      d["decay_exponent"] = 0.5;
      break;
  }
  d["seed"] = 1;
  d["output_path"] = "results";
  return d;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  if (a.is_array() && b.is_array()) return true;
  return a.type() == b.type();
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size())), '\n'));
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "config parse error at line " << line_of(text, e.byte) << ": " << e.what();
    throw ConfigError(exit_code::parse, os.str());
  }
}

json resolve(const json& raw) {
  if (!raw.is_object()) throw ConfigError(exit_code::parse, "config: top level must be a JSON object");
  if (!raw.contains("experiment")) throw ConfigError(exit_code::validation, "config: missing required field 'experiment'");
  if (!raw["experiment"].is_string()) throw ConfigError(exit_code::parse, "config field 'experiment': expected a string");
  const std::string name = raw["experiment"].get<std::string>();
  const auto it = experiment_names().find(name);
  if (it == experiment_names().end()) throw ConfigError(exit_code::validation, "config: unknown experiment '" + name + "'");

  json out = defaults_for(it->second);
  for (const auto& [key, value] : raw.items()) {
    if (!out.contains(key))
      throw ConfigError(exit_code::validation, "config field '" + key + "' is not used by experiment " + name);
    if (!same_kind(out[key], value)) {
      std::ostringstream os;
      os << "config field '" << key << "': expected " << out[key].type_name() << ", got " << value.type_name();
      throw ConfigError(exit_code::parse, os.str());
    }
    out[key] = value;
  }
  return out;
}

template <class T>
T get_integral(const json& j, const std::string& key) {
  const json& v = j.at(key);
  const double d = v.get<double>();
  if (!std::isfinite(d) || std::floor(d) != d)
    throw ConfigError(exit_code::parse, "config field '" + key + "': expected an integer");
  if (d < 0.0) throw ConfigError(exit_code::validation, "config field '" + key + "': must be >= 0");
  return static_cast<T>(d);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(exit_code::validation, "config: " + msg);
}

ExperimentConfig from_resolved(const json& j) {
  ExperimentConfig c;
  c.experiment = experiment_names().at(j.at("experiment").get<std::string>());
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  num("r", c.r);
  num("theta", c.theta);
  num("alpha_mag", c.alpha_mag);
  num("nbar", c.nbar);
  num("Omega", c.Omega);
  num("Gamma", c.Gamma);
  num("qubit_dephasing_rate", c.qubit_dephasing_rate);
  num("t_total", c.t_total);
  num("omega_sb", c.omega_sb);
  num("gamma_sb", c.gamma_sb);
  num("decay_exponent", c.decay_exponent);
  num("leakage_tol", c.leakage_tol);
  if (j.contains("phi_list")) {
    for (const json& v : j.at("phi_list")) {
      if (!v.is_number()) throw ConfigError(exit_code::parse, "config field 'phi_list': expected numbers");
      c.phi_list.push_back(v.get<double>());
    }
  }
  if (j.contains("N_list")) {
    for (const json& v : j.at("N_list")) {
      if (!v.is_number()) throw ConfigError(exit_code::parse, "config field 'N_list': expected numbers");
      const double d = v.get<double>();
      require(d >= 1.0 && std::floor(d) == d, "N_list entries must be integers >= 1");
      c.N_list.push_back(static_cast<std::size_t>(d));
    }
  }
  if (j.contains("N")) c.N = get_integral<std::size_t>(j, "N");
  if (j.contains("cutoff")) c.cutoff = get_integral<std::size_t>(j, "cutoff");
  if (j.contains("guard_levels")) c.guard_levels = get_integral<std::size_t>(j, "guard_levels");
  if (j.contains("points")) c.points = get_integral<std::size_t>(j, "points");
  if (j.contains("shots")) c.shots = get_integral<int>(j, "shots");
  if (j.contains("repetitions")) c.repetitions = get_integral<std::size_t>(j, "repetitions");
  c.seed = get_integral<std::uint64_t>(j, "seed");
  if (j.contains("state")) c.state = j.at("state").get<std::string>();
  if (j.contains("hamiltonian")) c.hamiltonian = j.at("hamiltonian").get<std::string>();
  c.output_path = j.at("output_path").get<std::string>();

  require(std::isfinite(c.r) && c.r >= 0.0, "r must be finite and >= 0");
  require(std::isfinite(c.theta), "theta must be finite");
  require(c.output_path.size() > 0, "output_path must be nonempty");
  switch (c.experiment) {
    case Experiment::phase_sweep:
      require(c.alpha_mag > 0.0 && std::isfinite(c.alpha_mag), "alpha_mag must be > 0");
      require(!c.phi_list.empty(), "phi_list must be nonempty");
      require(c.N >= 1, "N must be >= 1");
      require(c.leakage_tol > 0.0, "leakage_tol must be > 0");
      break;
    case Experiment::jc_ha:
      require(c.N >= 1, "N must be >= 1");
      require(c.Omega > 0.0, "Omega must be > 0");
      require(c.t_total >= 0.0, "t_total must be >= 0 (0 selects two expected periods)");
      require(c.cutoff == 0 || c.cutoff >= 4, "cutoff must be 0 (auto) or >= 4");
      require(c.points >= 12, "points must be >= 12");
      break;
    case Experiment::trotter_convergence:
      require(!c.N_list.empty(), "N_list must be nonempty");
      require(c.Omega > 0.0, "Omega must be > 0");
      require(c.t_total > 0.0, "t_total must be > 0");
      require(c.cutoff >= 4, "cutoff must be >= 4");
      require(c.guard_levels >= 1 && c.guard_levels <= c.cutoff, "guard_levels must be in [1, cutoff]");
      break;
    case Experiment::lindblad_compare:
      require(c.N >= 1, "N must be >= 1");
      require(c.Omega >= 0.0, "Omega must be >= 0");
      require(c.Gamma >= 0.0, "Gamma must be >= 0");
      require(c.qubit_dephasing_rate >= 0.0, "qubit_dephasing_rate must be >= 0");
      require(c.t_total > 0.0, "t_total must be > 0");
      require(c.cutoff >= 4 && c.cutoff <= 48, "cutoff must be in [4, 48] (dense superoperators)");
      require(c.points >= 2, "points must be >= 2");
      require(c.N % (c.points - 1) == 0, "N must be a multiple of points - 1");
      require(c.hamiltonian == "jc" || c.hamiltonian == "none", "hamiltonian must be \"jc\" or \"none\"");
      require(c.hamiltonian == "jc" || c.qubit_dephasing_rate == 0.0,
              "qubit_dephasing_rate needs the qubit (hamiltonian \"jc\")");
      require(c.leakage_tol > 0.0, "leakage_tol must be > 0");
      break;
    case Experiment::tomography_roundtrip:
      require(c.state == "coherent" || c.state == "squeezed_vacuum" || c.state == "thermal",
              "state must be coherent, squeezed_vacuum or thermal");
      require(c.points >= 13, "points must be >= 13");
      require(c.shots >= 1, "shots must be >= 1");
      require(c.repetitions >= 1, "repetitions must be >= 1");
      require(c.omega_sb > 0.0 && c.gamma_sb >= 0.0, "omega_sb must be > 0 and gamma_sb >= 0");
      require(c.decay_exponent == 0.5 || c.decay_exponent == 0.7, "decay_exponent must be 0.5 or 0.7");
      require(c.alpha_mag >= 0.0 && c.nbar >= 0.0, "alpha_mag and nbar must be >= 0");
      break;
  }
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(exit_code::parse, "cannot read config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// --- experiments ----------------------------------------------------------------------

RunResult run_phase_sweep(const ExperimentConfig& c, std::size_t jobs) {
  const std::size_t cutoff = c.cutoff > 0 ? c.cutoff : protocols::sequence_cutoff(c.r, c.alpha_mag);
  const Basis basis{cutoff, Space::fock};
  const protocols::SequenceEngine engine(basis, {});
  const StateVector vac = vacuum_state(basis);
  const double g_ha_theory = std::abs(protocols::predicted_gain(protocols::Scheme::phase_independent, c.r, c.theta, 0.0));

  RunResult out;
  out.table.columns = {"phi",      "r",        "theta",          "N",          "g_ha_abs",       "g_ha_phase_deg",
                       "g_ha_theory", "g_ps_abs", "g_ps_phase_deg", "g_ps_theory", "cutoff"};
  std::vector<std::vector<Cell>> rows(c.phi_list.size());
  std::vector<double> g_ha(c.phi_list.size());
  std::vector<double> g_ps(c.phi_list.size());
  parallel_for(c.phi_list.size(), jobs, [&](std::size_t k) {
    const double phi = c.phi_list[k];
    const DisplacementParams alpha(c.alpha_mag, phi);
    const auto ha = protocols::estimate_gain(
        engine.run(vac, protocols::build_ha_displacement(alpha, c.r, c.N, c.theta), c.leakage_tol), alpha.value());
    const auto ps = protocols::estimate_gain(
        engine.run(vac, protocols::build_phase_sensitive(alpha, SqueezeParams(c.r, c.theta)), c.leakage_tol),
        alpha.value());
    const double ps_theory = std::abs(protocols::predicted_gain(protocols::Scheme::phase_sensitive, c.r, c.theta, phi));
    g_ha[k] = ha.g_abs;
    g_ps[k] = ps.g_abs;
    rows[k] = {phi, c.r, c.theta, static_cast<std::int64_t>(c.N), ha.g_abs, ha.phase_deg, g_ha_theory,
               ps.g_abs, ps.phase_deg, ps_theory, static_cast<std::int64_t>(cutoff)};
  });
  out.table.rows = std::move(rows);
  double mean = 0.0;
  for (double g : g_ha) mean += g;
  out.summary["mean_gain_ha"] = mean / static_cast<double>(g_ha.size());
  out.summary["gain_theory_ha"] = g_ha_theory;
  out.summary["max_gain_ps"] = *std::max_element(g_ps.begin(), g_ps.end());
  out.summary["min_gain_ps"] = *std::min_element(g_ps.begin(), g_ps.end());
  out.summary["cutoff"] = static_cast<double>(cutoff);
  return out;
}

std::vector<double> linspace(double hi, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = hi * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

RunResult run_jc_ha(const ExperimentConfig& c, std::size_t jobs) {
  protocols::HamiltonianSpec spec;
  spec.omega = c.Omega;
  spec.cutoff = c.cutoff > 0 ? c.cutoff : protocols::sequence_cutoff(c.r, 1.0);
  const double span_ha = c.t_total > 0.0 ? c.t_total : 2.0 * kPi / (c.Omega * std::cosh(c.r));
  const double span_ref = c.t_total > 0.0 ? c.t_total : 2.0 * kPi / c.Omega;
  const std::vector<double> t_ha = linspace(span_ha, c.points);
  const std::vector<double> t_ref = linspace(span_ref, c.points);

  std::vector<double> p_ha;
  std::vector<double> p_ref;
  protocols::HamiltonianSpec spec_ref = spec;
  parallel_for(2, jobs, [&](std::size_t k) {
    if (k == 0) p_ha = c.cutoff > 0 ? protocols::jc_upper_population(spec, c.r, c.N, t_ha)
                                    : protocols::jc_upper_population_adaptive(spec, c.r, c.N, t_ha);
    else p_ref = c.cutoff > 0 ? protocols::jc_upper_population(spec_ref, 0.0, c.N, t_ref)
                              : protocols::jc_upper_population_adaptive(spec_ref, 0.0, c.N, t_ref);
  });
  const double omega_ha = tomography::fit_rabi(t_ha, p_ha).params.at("Omega");
  const double omega_ref = tomography::fit_rabi(t_ref, p_ref).params.at("Omega");
  const double ratio = omega_ha / omega_ref;

  RunResult out;
  out.table.columns = {"t_ha_s", "p_up_ha", "t_ref_s", "p_up_ref", "omega_fit_ha", "omega_fit_ref", "omega_ratio", "cosh_r"};
  for (std::size_t i = 0; i < c.points; ++i)
    out.table.rows.push_back({t_ha[i], p_ha[i], t_ref[i], p_ref[i], omega_ha, omega_ref, ratio, std::cosh(c.r)});
  out.summary["omega_fit_ha"] = omega_ha;
  out.summary["omega_fit_ref"] = omega_ref;
  out.summary["omega_ratio"] = ratio;
  out.summary["cosh_r"] = std::cosh(c.r);
  out.summary["cutoff"] = static_cast<double>(spec.cutoff);
  out.summary["trotter_step_s"] = span_ha / (2.0 * static_cast<double>(c.N));
  out.summary["trotter_step_bound_s"] = protocols::trotter_step_bound(c.Omega, c.r);
  return out;
}

RunResult run_trotter(const ExperimentConfig& c, std::size_t jobs) {
  protocols::HamiltonianSpec spec;
  spec.omega = c.Omega;
  spec.cutoff = c.cutoff;
  std::vector<double> dev(c.N_list.size());
  parallel_for(c.N_list.size(), jobs, [&](std::size_t k) {
    dev[k] = protocols::trotter_deviation(spec, c.r, c.t_total, c.N_list[k], c.guard_levels);
  });
  RunResult out;
  out.table.columns = {"N", "dt_s", "deviation", "ratio_to_prev", "step_bound_s"};
  const double bound = protocols::trotter_step_bound(c.Omega, c.r);
  bool monotone = true;
  for (std::size_t k = 0; k < dev.size(); ++k) {
    const double ratio = k == 0 ? std::nan("") : dev[k - 1] / dev[k];
    if (k > 0 && !(dev[k] < dev[k - 1])) monotone = false;
    out.table.rows.push_back({static_cast<std::int64_t>(c.N_list[k]), c.t_total / (2.0 * static_cast<double>(c.N_list[k])),
                              dev[k], ratio, bound});
  }
  out.summary["monotone"] = monotone ? 1.0 : 0.0;
  out.summary["deviation_first"] = dev.front();
  out.summary["deviation_last"] = dev.back();
  return out;
}

RunResult run_lindblad(const ExperimentConfig& c, std::size_t jobs) {
  using namespace open_system;
  const bool jc = c.hamiltonian == "jc";
  protocols::HamiltonianSpec spec;
  spec.omega = c.Omega;
  spec.cutoff = c.cutoff;
  const Basis basis = jc ? spec.basis() : Basis{c.cutoff, Space::fock};
  const auto n = static_cast<Eigen::Index>(basis.size());
  const Operator h = jc ? protocols::jc_hamiltonian(spec) : Operator(basis, Matrix::Zero(n, n), "0");

  Vector psi = Vector::Zero(n);
  Eigen::Index partner = 1;
  if (jc) {
    psi(0) = 1.0;  // |up, 0>
    partner = 3;   // |down, 1>
  } else {
    psi(0) = psi(1) = 1.0 / std::sqrt(2.0);
  }
  const DensityMatrix rho0 = DensityMatrix::from_state(StateVector(basis, psi));
  DephasingConfig cfg{c.Gamma, {}};
  if (c.qubit_dephasing_rate > 0.0) cfg.qubit_dephasing_rate = c.qubit_dephasing_rate;

  const std::size_t segments = c.points - 1;
  const double dt = c.t_total / static_cast<double>(segments);

  std::vector<DensityMatrix> strobe;
  std::vector<DensityMatrix> eff;
  std::vector<DensityMatrix> printed;
  parallel_for(3, jobs, [&](std::size_t k) {
    if (k == 0) {
      PropagationOptions opts;
      opts.leakage_tol = c.leakage_tol;
      strobe = stroboscopic_ha_trajectory(rho0, h, cfg, c.r, c.N, c.t_total, segments, opts);
    } else if (k == 1) {
      eff = lindblad_trajectory(effective_lindbladian(h, cfg, c.r, EffectiveForm::derived), rho0, dt, segments);
    } else {
      printed = lindblad_trajectory(effective_lindbladian(h, cfg, c.r, EffectiveForm::as_printed), rho0, dt, segments);
    }
  });

  RunResult out;
  out.table.columns = {"t_s", "trace_distance", "trace_distance_printed", "coherence_strobe",
                       "coherence_effective", "coherence_printed", "min_eig_printed"};
  std::vector<double> t(c.points);
  std::vector<double> coh_s(c.points);
  std::vector<double> coh_e(c.points);
  double min_eig_printed = 0.0;
  for (std::size_t k = 0; k < c.points; ++k) {
    t[k] = dt * static_cast<double>(k);
    coh_s[k] = std::abs(strobe[k].matrix()(0, partner));
    coh_e[k] = std::abs(eff[k].matrix()(0, partner));
    const double me = printed[k].min_eigenvalue();
    min_eig_printed = std::min(min_eig_printed, me);
    out.table.rows.push_back({t[k], trace_distance(strobe[k], eff[k]), trace_distance(strobe[k], printed[k]), coh_s[k],
                              coh_e[k], std::abs(printed[k].matrix()(0, partner)), me});
  }
  out.summary["trace_distance_final"] = trace_distance(strobe.back(), eff.back());
  out.summary["trace_distance_printed_final"] = trace_distance(strobe.back(), printed.back());
  out.summary["min_eigenvalue_printed"] = min_eig_printed;
  out.summary["cosh2_2r"] = std::pow(std::cosh(2.0 * c.r), 2);
  if (!jc && c.Gamma > 0.0) {
    out.summary["rate_strobe_over_gamma"] = fit_decay_rate(t, coh_s) / c.Gamma;
    out.summary["rate_effective_over_gamma"] = fit_decay_rate(t, coh_e) / c.Gamma;
  }
  return out;
}

RunResult run_tomography(const ExperimentConfig& c, std::size_t jobs) {
  using namespace tomography;
  const Model model = c.state == "coherent" ? Model::coherent
                      : c.state == "squeezed_vacuum" ? Model::squeezed_vacuum
                                                     : Model::thermal;
  const double truth = model == Model::coherent ? c.alpha_mag : model == Model::squeezed_vacuum ? c.r : c.nbar;
  const double tol = model == Model::coherent ? 0.02 : model == Model::squeezed_vacuum ? 0.08 : 0.01;
  const std::string name = model == Model::coherent ? "alpha" : model == Model::squeezed_vacuum ? "r" : "nbar";
  SidebandCal cal{c.omega_sb, c.gamma_sb, c.decay_exponent};
  const std::vector<double> times = default_time_grid(cal, c.points);
  PopulationVector p;
  p.probs = model_populations(model, truth);
  const BsbTrace clean = bsb_signal(p, cal, times);
  FitOptions fo;
  fo.bootstrap_resamples = 0;
  const double noiseless = fit_model(clean, model, cal, fo).params.at(name);

  RunResult out;
  out.table.columns = {"rep", "seed", "state", "value_true", "value_fit", "abs_error", "hit", "residual_rms", "at_boundary"};
  std::vector<std::vector<Cell>> rows(c.repetitions);
  std::vector<int> hits(c.repetitions);
  parallel_for(c.repetitions, jobs, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(c.seed, k);
    const FitResult f = fit_model(sample_trace(clean, c.shots, seed), model, cal, fo);
    const double v = f.params.at(name);
    hits[k] = std::abs(v - truth) <= tol ? 1 : 0;
    rows[k] = {static_cast<std::int64_t>(k), seed, c.state, truth, v, std::abs(v - truth),
               static_cast<std::int64_t>(hits[k]), f.residual_rms, static_cast<std::int64_t>(f.at_boundary)};
  });
  out.table.rows = std::move(rows);
  double h = 0.0;
  for (int x : hits) h += x;
  out.summary["noiseless_fit"] = noiseless;
  out.summary["noiseless_abs_error"] = std::abs(noiseless - truth);
  out.summary["hit_rate"] = h / static_cast<double>(c.repetitions);
  out.summary["tolerance"] = tol;
  return out;
}

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("squeeze-amp");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("SQUEEZE_AMP_LOG");
    const std::string level = env ? env : "warn";
    if (level == "error") l->set_level(spdlog::level::err);
    else if (level == "info") l->set_level(spdlog::level::info);
    else if (level == "debug") l->set_level(spdlog::level::debug);
    else l->set_level(spdlog::level::warn);
    return l;
  }();
  return log;
}

std::size_t resolve_jobs(std::size_t jobs) { return jobs == 0 ? default_jobs() : jobs; }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

json summary_json(const std::map<std::string, double>& s) {
  json j = json::object();
  for (const auto& [k, v] : s) j[k] = std::isfinite(v) ? json(v) : json(nullptr);
  return j;
}

json versions_json() {
  json j;
  j["squeeze_amp"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  return j;
}

template <class Body>
int guarded(Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    logger()->error("{}", e.what());
    return e.code();
  } catch (const InsufficientCutoff& e) {
    logger()->error("numerical failure: {}", e.what());
    return exit_code::numerical;
  } catch (const NumericalError& e) {
    logger()->error("numerical failure: {}", e.what());
    return exit_code::numerical;
  } catch (const FitError& e) {
    logger()->error("numerical failure: {}", e.what());
    return exit_code::numerical;
  } catch (const std::invalid_argument& e) {
    logger()->error("invalid input: {}", e.what());
    return exit_code::validation;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return exit_code::numerical;
  }
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::phase_sweep: return "phase_sweep";
    case Experiment::jc_ha: return "jc_ha";
    case Experiment::trotter_convergence: return "trotter_convergence";
    case Experiment::lindblad_compare: return "lindblad_compare";
    case Experiment::tomography_roundtrip: return "tomography_roundtrip";
  }
  return "unknown";
}

std::string ExperimentConfig::to_json() const {
  json d = defaults_for(experiment);
  for (auto& [key, value] : d.items()) {
    if (key == "experiment") continue;
    if (key == "r") value = r;
    else if (key == "theta") value = theta;
    else if (key == "alpha_mag") value = alpha_mag;
    else if (key == "nbar") value = nbar;
    else if (key == "phi_list") value = phi_list;
    else if (key == "N") value = N;
    else if (key == "N_list") value = N_list;
    else if (key == "Omega") value = Omega;
    else if (key == "Gamma") value = Gamma;
    else if (key == "qubit_dephasing_rate") value = qubit_dephasing_rate;
    else if (key == "t_total") value = t_total;
    else if (key == "cutoff") value = cutoff;
    else if (key == "guard_levels") value = guard_levels;
    else if (key == "points") value = points;
    else if (key == "shots") value = shots;
    else if (key == "repetitions") value = repetitions;
    else if (key == "state") value = state;
    else if (key == "hamiltonian") value = hamiltonian;
    else if (key == "omega_sb") value = omega_sb;
    else if (key == "gamma_sb") value = gamma_sb;
    else if (key == "decay_exponent") value = decay_exponent;
    else if (key == "leakage_tol") value = leakage_tol;
    else if (key == "seed") value = seed;
    else if (key == "output_path") value = output_path;
  }
  return d.dump(2);
}

ExperimentConfig parse_config(const std::string& text) {
  try {
    return from_resolved(resolve(parse_json(text)));
  } catch (const json::exception& e) {
    throw ConfigError(exit_code::parse, std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string override_param(const std::string& text, const std::string& param, double value) {
  json raw = parse_json(text);
  const json resolved = resolve(raw);
  if (param == "experiment" || !resolved.contains(param) || !resolved[param].is_number())
    throw ConfigError(exit_code::validation, "sweep: '" + param + "' is not a numeric field of this experiment");
  raw[param] = value;
  return raw.dump();
}

RunResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
  jobs = resolve_jobs(jobs);
  switch (cfg.experiment) {
    case Experiment::phase_sweep: return run_phase_sweep(cfg, jobs);
    case Experiment::jc_ha: return run_jc_ha(cfg, jobs);
    case Experiment::trotter_convergence: return run_trotter(cfg, jobs);
    case Experiment::lindblad_compare: return run_lindblad(cfg, jobs);
    case Experiment::tomography_roundtrip: return run_tomography(cfg, jobs);
  }
  throw std::logic_error("run_experiment: unknown experiment");
}

std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          if (std::isnan(v)) return "nan";
          if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
          char buf[64];
          const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
          return std::string(buf, res.ptr);
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else {
          return std::to_string(v);
        }
      },
      c);
}

std::string format_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + table.columns[i];
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += '\n';
  }
  return out;
}

int command_run(const CommandOptions& opts) {
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg = load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.output) cfg.output_path = *opts.output;
    const std::size_t jobs = resolve_jobs(opts.jobs);
    logger()->info("running {} with {} worker(s)", to_string(cfg.experiment), jobs);
    const RunResult res = run_experiment(cfg, jobs);

    const fs::path dir(cfg.output_path);
    fs::create_directories(dir);
    write_text(dir / "results.csv", format_csv(res.table));
    json report;
    report["config"] = json::parse(cfg.to_json());
    report["summary"] = summary_json(res.summary);
    report["rows"] = res.table.rows.size();
    report["columns"] = res.table.columns;
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["versions"] = versions_json();
    write_text(dir / "report.json", report.dump(2) + "\n");
    logger()->info("wrote {}", (dir / "results.csv").string());
    return exit_code::ok;
  });
}

int command_sweep(const CommandOptions& opts) {
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    if (opts.values.empty()) throw ConfigError(exit_code::validation, "sweep: empty value list");
    const std::string text = read_file(opts.config_path);
    const ExperimentConfig base = parse_config(text);
    std::vector<ExperimentConfig> cfgs;
    for (double v : opts.values) {
      ExperimentConfig c = parse_config(override_param(text, opts.param, v));
      if (opts.seed) c.seed = *opts.seed;
      cfgs.push_back(std::move(c));
    }
    const std::size_t jobs = resolve_jobs(opts.jobs);
    std::vector<RunResult> results(cfgs.size());
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      logger()->info("sweep {} = {}", opts.param, opts.values[k]);
      results[k] = run_experiment(cfgs[k], jobs);
    }

    Table merged;
    merged.columns = {"sweep_param", "sweep_value"};
    merged.columns.insert(merged.columns.end(), results.front().table.columns.begin(), results.front().table.columns.end());
    json groups = json::array();
    for (std::size_t k = 0; k < results.size(); ++k) {
      for (const auto& row : results[k].table.rows) {
        std::vector<Cell> full{opts.param, opts.values[k]};
        full.insert(full.end(), row.begin(), row.end());
        merged.rows.push_back(std::move(full));
      }
      json g;
      g["value"] = opts.values[k];
      g["config"] = json::parse(cfgs[k].to_json());
      g["summary"] = summary_json(results[k].summary);
      groups.push_back(g);
    }

    const fs::path dir(opts.output ? *opts.output : base.output_path);
    fs::create_directories(dir);
    write_text(dir / "results.csv", format_csv(merged));
    json report;
    report["config"] = json::parse(base.to_json());
    report["sweep"] = {{"param", opts.param}, {"values", opts.values}};
    report["groups"] = groups;
    report["rows"] = merged.rows.size();
    report["columns"] = merged.columns;
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["versions"] = versions_json();
    write_text(dir / "report.json", report.dump(2) + "\n");
    return exit_code::ok;
  });
}

int main_entry(int argc, char** argv) {
  CLI::App app{"squeeze-amp: squeezing-based amplification experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommandOptions run_opts;
  std::uint64_t seed = 0;
  std::string out;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", run_opts.config_path, "Experiment config (JSON)")->required();
  run->add_option("--jobs,-j", run_opts.jobs, "Worker threads (default: available parallelism)");
  auto* run_seed = run->add_option("--seed,-s", seed, "Override the config seed");
  auto* run_out = run->add_option("--output,-o", out, "Override output_path");

  CommandOptions sweep_opts;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per value of a numeric field");
  sweep->add_option("config", sweep_opts.config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--param,-p", sweep_opts.param, "Field to sweep")->required();
  sweep->add_option("--values,-v", values, "Comma-separated values")->required();
  sweep->add_option("--jobs,-j", sweep_opts.jobs, "Worker threads (default: available parallelism)");
  auto* sweep_seed = sweep->add_option("--seed,-s", seed, "Override the config seed");
  auto* sweep_out = sweep->add_option("--output,-o", out, "Override output_path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  if (run->parsed()) {
    if (run_seed->count() > 0) run_opts.seed = seed;
    if (run_out->count() > 0) run_opts.output = out;
    return command_run(run_opts);
  }
  if (sweep_seed->count() > 0) sweep_opts.seed = seed;
  if (sweep_out->count() > 0) sweep_opts.output = out;
  std::stringstream ss(values);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      logger()->error("sweep: '{}' is not a number", item);
      return exit_code::validation;
    }
    sweep_opts.values.push_back(v);
  }
  return command_sweep(sweep_opts);
}

}  // namespace squeeze_amp::cli
