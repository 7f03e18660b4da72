// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 on any failure
// not marked as a documented statistical limit.

#include "oracles.hpp"

#include "squeeze_amp/cli/runner.hpp"
#include "squeeze_amp/fock.hpp"
#include "squeeze_amp/open_system.hpp"
#include "squeeze_amp/protocols.hpp"
#include "squeeze_amp/tomography.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef SQUEEZE_AMP_CLI_PATH
#error "SQUEEZE_AMP_CLI_PATH must point at the squeeze-amp executable"
#endif

namespace fs = std::filesystem;
using namespace squeeze_amp;
namespace cli = squeeze_amp::cli;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
  // Set when a failure is a documented statistical limit rather than a defect.
  std::string known_limit;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

cli::RunResult run(const std::string& config) { return cli::run_experiment(cli::parse_config(config), 4); }

double column_value(const cli::RunResult& r, std::size_t row, const std::string& name) {
  for (std::size_t i = 0; i < r.table.columns.size(); ++i)
    if (r.table.columns[i] == name) return std::get<double>(r.table.rows[row][i]);
  throw std::runtime_error("no column " + name);
}

// 1. |G| = cosh r at ten phases for the phase-independent displacement.
Outcome criterion_1() {
  const auto res = run(R"({"experiment": "phase_sweep", "r": 1.38, "alpha_mag": 0.55, "N": 1})");
  const double target = std::cosh(1.38);
  double worst = 0.0;
  for (std::size_t k = 0; k < res.table.rows.size(); ++k)
    worst = std::max(worst, std::abs(column_value(res, k, "g_ha_abs") / target - 1.0));
  return {res.table.rows.size() == 10 && worst <= 1e-6,
          fmt("10 phases, max rel dev from cosh(1.38)=%.6f is %.2e", target, worst)};
}

// 2. Phase-sensitive envelope cosh r + cos(theta - 2 phi) sinh r.
Outcome criterion_2() {
  const double r = 1.38;
  const auto res = run(R"({"experiment": "phase_sweep", "r": 1.38, "alpha_mag": 0.55, "theta": 0.0})");
  double worst = 0.0;
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < res.table.rows.size(); ++k) {
    const double phi = column_value(res, k, "phi");
    const double g = column_value(res, k, "g_ps_abs");
    const double theory = std::abs(std::cosh(r) + std::polar(std::sinh(r), -2.0 * phi));
    worst = std::max(worst, std::abs(g / theory - 1.0));
    hi = std::max(hi, g);
    lo = std::min(lo, g);
  }
  const bool ok = worst <= 1e-6 && std::abs(hi / std::exp(r) - 1.0) <= 1e-6 && std::abs(lo / std::exp(-r) - 1.0) <= 1e-6;
  return {ok, fmt("max %.6f (e^r %.6f), min %.6f (e^-r %.6f), max rel dev %.2e", hi, std::exp(r), lo, std::exp(-r), worst)};
}

// 3. S^dag(xi) D(alpha) S(xi) = D(alpha cosh r + alpha^* e^{i theta} sinh r) on the guarded block.
Outcome criterion_3() {
  const std::size_t block = 16;
  const std::size_t cutoff = 1024;
  const Squeezer sq(cutoff);
  const Displacer dp(cutoff);
  std::mt19937_64 rng(20240503);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix cols = Matrix::Identity(static_cast<Eigen::Index>(cutoff), static_cast<Eigen::Index>(block));
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double amag = u(rng);
    const double aph = 2 * kPi * u(rng);
    const double r = 1.5 * u(rng);
    const double th = 2 * kPi * u(rng);
    const Matrix x = sq.apply(SqueezeParams(r, th + kPi), dp.apply(DisplacementParams(amag, aph), sq.apply(SqueezeParams(r, th), cols)));
    const Complex a = std::polar(amag, aph);
    const Complex beta = a * std::cosh(r) + std::conj(a) * std::polar(std::sinh(r), th);
    const Matrix ref = oracle::displacement_block(beta, block);
    worst = std::max(worst, oracle::block_norm(x.topRows(static_cast<Eigen::Index>(block)), ref, block));
  }
  return {worst <= 1e-7, fmt("100 draws |alpha|<=1, r<=1.5, cutoff %zu, %zux%zu block: max operator-norm dev %.2e", cutoff,
                             block, block, worst)};
}

// 4. Fitted JC Rabi-frequency ratio tracks cosh r.
Outcome criterion_4() {
  const double target = std::cosh(1.1);
  const auto n6 = run(R"({"experiment": "jc_ha", "r": 1.1, "N": 6})");
  const auto n48 = run(R"({"experiment": "jc_ha", "r": 1.1, "N": 48})");
  const double d6 = n6.summary.at("omega_ratio") / target - 1.0;
  const double d48 = n48.summary.at("omega_ratio") / target - 1.0;
  return {std::abs(d6) <= 0.05 && std::abs(d48) <= 0.005,
          fmt("N=6 ratio %.4f (%+.2f%%, cutoff %.0f), N=48 ratio %.4f (%+.3f%%), cosh(1.1)=%.4f", n6.summary.at("omega_ratio"),
              100 * d6, n6.summary.at("cutoff"), n48.summary.at("omega_ratio"), 100 * d48, target)};
}

// 5. Trotter deviation halves per doubling of N.
Outcome criterion_5() {
  const auto res = run(R"({"experiment": "trotter_convergence", "r": 0.5, "cutoff": 32, "N_list": [2, 4, 8, 16, 32, 64]})");
  bool ok = res.summary.at("monotone") == 1.0;
  std::string ratios;
  for (std::size_t k = 1; k < res.table.rows.size(); ++k) {
    const double q = column_value(res, k, "ratio_to_prev");
    ok = ok && q >= 1.4 && q <= 2.6;
    ratios += fmt("%s%.3f", k == 1 ? "" : ",", q);
  }
  return {ok, fmt("ratios per doubling [%s], deviation %.3e -> %.3e, dt(N=2)/bound %.2f", ratios.c_str(),
                  res.summary.at("deviation_first"), res.summary.at("deviation_last"),
                  column_value(res, 0, "dt_s") / column_value(res, 0, "step_bound_s"))};
}

// 6. Stroboscopic dephasing follows the effective Lindbladian.
Outcome criterion_6() {
  bool ok = true;
  std::string detail;
  for (double r : {0.3, 0.6}) {
    const std::string rs = fmt("%.1f", r);
    const auto jc = run(R"({"experiment": "lindblad_compare", "hamiltonian": "jc", "cutoff": 16, "N": 64, "t_total": 5e-5, "r": )" + rs + "}");
    const double td = jc.summary.at("trace_distance_final");
    const auto bare = run(R"({"experiment": "lindblad_compare", "hamiltonian": "none", "cutoff": 16, "N": 64, "t_total": 5e-5, "r": )" + rs + "}");
    const double amp_strobe = bare.summary.at("rate_strobe_over_gamma");
    const double amp_full = bare.summary.at("rate_effective_over_gamma");

    // Same coherence, generator restricted to the cosh^2(2r) D_a part.
    const cli::ExperimentConfig cfg = cli::parse_config(R"({"experiment": "lindblad_compare", "hamiltonian": "none"})");
    const Basis b{16, Space::fock};
    Vector psi = Vector::Zero(16);
    psi(0) = psi(1) = 1.0 / std::sqrt(2.0);
    const DensityMatrix rho0 = DensityMatrix::from_state(StateVector(b, psi));
    const auto l = open_system::effective_lindbladian(Operator(b, Matrix::Zero(16, 16)), open_system::DephasingConfig{cfg.Gamma, {}},
                                                      r, open_system::EffectiveForm::without_double_commutator);
    const auto traj = open_system::lindblad_trajectory(l, rho0, 5e-5 / 8, 8);
    std::vector<double> t;
    std::vector<double> coh;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      t.push_back(5e-5 / 8 * static_cast<double>(k));
      coh.push_back(std::abs(traj[k].matrix()(0, 1)));
    }
    const double amp_plain = open_system::fit_decay_rate(t, coh) / cfg.Gamma;
    const double c2 = std::pow(std::cosh(2 * r), 2);

    const bool pass_r = td <= 1e-3 && std::abs(amp_strobe / amp_full - 1.0) <= 0.05 && std::abs(amp_plain / c2 - 1.0) <= 0.05;
    ok = ok && pass_r;
    detail += fmt("%sr=%.1f: TD %.2e, amp strobe %.3f vs full %.3f, cosh^2-only %.3f vs cosh^2(2r) %.3f", detail.empty() ? "" : "; ",
                  r, td, amp_strobe, amp_full, amp_plain, c2);
  }
  return {ok, detail};
}

// 7. Qubit dephasing is untouched by the squeeze sandwich.
Outcome criterion_7() {
  const Basis b{8, Space::qubit_fock};
  const double rate = 2 * kPi * 50.0;
  Vector psi = Vector::Zero(16);
  psi(0) = psi(1) = 1.0 / std::sqrt(2.0);
  const DensityMatrix rho0 = DensityMatrix::from_state(StateVector(b, psi));
  const Operator zero(b, Matrix::Zero(16, 16));
  open_system::PropagationOptions opts;
  opts.leakage_tol = std::numeric_limits<double>::infinity();
  const open_system::DephasingConfig cfg{0.0, rate};
  double worst = 0.0;
  double worst_closed = 0.0;
  for (double t : {1e-4, 5e-4, 2e-3}) {
    const double c0 = std::abs(open_system::stroboscopic_ha_propagate(rho0, zero, cfg, 0.0, 16, t, opts).rho.matrix()(0, 1));
    const double c1 = std::abs(open_system::stroboscopic_ha_propagate(rho0, zero, cfg, 1.1, 16, t, opts).rho.matrix()(0, 1));
    worst = std::max(worst, std::abs(c1 / c0 - 1.0));
    worst_closed = std::max(worst_closed, std::abs(c0 / (0.5 * std::exp(-rate * t)) - 1.0));
  }
  return {worst <= 1e-6, fmt("max rel diff r=1.1 vs r=0 %.2e; r=0 vs e^{-gamma t} %.2e", worst, worst_closed)};
}

// 8. Tomography round-trips at 300 shots x 50 points.
Outcome criterion_8() {
  bool ok = true;
  bool only_thermal_hits = true;
  std::string detail;
  std::string limit;
  struct Case {
    const char* state;
    const char* config;
    bool noisy;
  };
  const Case cases[] = {
      {"coherent", R"({"experiment": "tomography_roundtrip", "state": "coherent", "alpha_mag": 0.55})", true},
      {"squeezed", R"({"experiment": "tomography_roundtrip", "state": "squeezed_vacuum", "r": 1.38})", true},
      {"thermal", R"({"experiment": "tomography_roundtrip", "state": "thermal", "nbar": 0.06})", true},
      {"vacuum", R"({"experiment": "tomography_roundtrip", "state": "coherent", "alpha_mag": 0.0})", false},
  };
  for (const Case& c : cases) {
    const auto res = run(c.config);
    const double err = res.summary.at("noiseless_abs_error");
    const double hit = res.summary.at("hit_rate");
    const double tol = res.summary.at("tolerance");
    double mean = 0.0;
    double sq = 0.0;
    const auto reps = static_cast<double>(res.table.rows.size());
    for (std::size_t k = 0; k < res.table.rows.size(); ++k) mean += column_value(res, k, "value_fit") / reps;
    for (std::size_t k = 0; k < res.table.rows.size(); ++k) sq += std::pow(column_value(res, k, "value_fit") - mean, 2);
    const double sd = std::sqrt(sq / (reps - 1.0));
    const bool noiseless_ok = err <= 1e-3;
    const bool hits_ok = !c.noisy || hit >= 0.9;
    ok = ok && noiseless_ok && hits_ok;
    if (!noiseless_ok || (!hits_ok && std::string(c.state) != "thermal")) only_thermal_hits = false;
    if (!hits_ok && std::string(c.state) == "thermal")
      limit = fmt("thermal fit sd %.4f makes +-%.2f a %.2f sigma window, expected hit rate %.2f", sd, tol, tol / sd,
                  std::erf(tol / (sd * std::sqrt(2.0))));
    detail += fmt("%s%s noiseless err %.1e, hit %.2f, sd %.4f", detail.empty() ? "" : "; ", c.state, err, hit, sd);
  }
  Outcome o{ok, detail, {}};
  if (!ok && only_thermal_hits) o.known_limit = limit;
  return o;
}

// 9. Squeeze followed by anti-squeeze returns to vacuum.
Outcome criterion_9() {
  double worst = 0.0;
  for (double r : {0.5, 1.1, 1.38}) {
    const std::size_t cutoff = cutoff_policy::default_cutoff(r, 0.0);
    const Squeezer sq(cutoff);
    Vector vac = Vector::Zero(static_cast<Eigen::Index>(cutoff));
    vac(0) = 1.0;
    const Matrix out = sq.apply(SqueezeParams(r, kPi), sq.apply(SqueezeParams(r, 0.0), Matrix(vac)));
    worst = std::max(worst, 1.0 - std::norm(out(0, 0)));
  }
  return {worst <= 1e-8, fmt("r in {0.5,1.1,1.38}: max 1 - F %.2e", worst)};
}

// 10. The executable writes byte-identical CSVs for a fixed seed.
Outcome criterion_10() {
  const fs::path dir = fs::temp_directory_path() / "squeeze_amp_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::string> configs = {
      R"({"experiment": "tomography_roundtrip", "state": "thermal", "nbar": 0.06, "seed": 77})",
      R"({"experiment": "phase_sweep", "r": 1.38, "alpha_mag": 0.55})",
  };
  bool ok = true;
  std::size_t bytes = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const fs::path cfg = dir / ("c" + std::to_string(k) + ".json");
    std::ofstream(cfg) << configs[k];
    std::string first;
    for (const char* jobs : {"1", "4"}) {
      const fs::path out = dir / ("o" + std::to_string(k) + "_" + jobs);
      const std::string cmd = std::string("\"") + SQUEEZE_AMP_CLI_PATH + "\" run \"" + cfg.string() + "\" --jobs " + jobs +
                              " --output \"" + out.string() + "\"";
      if (std::system(cmd.c_str()) != 0) return {false, "cli exited non-zero: " + cmd};
      std::ifstream in(out / "results.csv", std::ios::binary);
      std::ostringstream os;
      os << in.rdbuf();
      if (first.empty())
        first = os.str();
      else
        ok = ok && os.str() == first;
    }
    bytes += first.size();
  }
  fs::remove_all(dir);
  return {ok, fmt("2 configs x 2 runs (--jobs 1 and 4), %zu bytes compared", bytes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"displacement HA gain", criterion_1},
      {"phase-sensitive envelope", criterion_2},
      {"amplifier identity", criterion_3},
      {"JC HA frequency gain", criterion_4},
      {"Trotter scaling", criterion_5},
      {"effective Lindbladian", criterion_6},
      {"qubit dephasing invariance", criterion_7},
      {"tomography round-trip", criterion_8},
      {"squeeze/anti-squeeze coherence", criterion_9},
      {"determinism", criterion_10},
  };
  int failures = 0;
  int defects = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2zu %s: %s | %s | %.2f s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    if (!o.pass && !o.known_limit.empty()) std::printf("             documented limit: %s\n", o.known_limit.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
    if (!o.pass && o.known_limit.empty()) ++defects;
  }
  std::printf("%d of %zu criteria passed, %d undocumented failure(s)\n", static_cast<int>(criteria.size()) - failures,
              criteria.size(), defects);
  return defects == 0 ? 0 : 1;
}
