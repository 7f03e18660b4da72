#pragma once

// Synthetic blue-sideband readout and the fits used to recover motional
// states from it.
//
// Signal model, for Fock populations P_n:
//   P_down(t) = 1/2 [1 + sum_n P_n exp(-gamma (n+1)^p t) cos(Omega_SB sqrt(n+1) t)]

#include "squeeze_amp/fock.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace squeeze_amp::tomography {

struct BsbTrace {
  std::vector<double> times;  // s, strictly increasing
  std::vector<double> p_down;
  std::vector<int> shots;     // per point; 0 = noiseless
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

struct SidebandCal {
  double omega_sb = 2.0 * 3.141592653589793 * 40e3;  // rad/s
  double gamma = 300.0;                              // 1/s
  double decay_exponent = 0.5;                       // 0.5 or 0.7

  void validate() const;
};

enum class Model { model_free, coherent, squeezed_vacuum, thermal, rabi_sinusoid };

std::string to_string(Model m);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FitResult {
  Model model = Model::model_free;
  std::map<std::string, double> params;
  std::optional<PopulationVector> populations;
  double residual_rms = 0.0;
  std::map<std::string, Interval> ci68;
  // Design-matrix diagnostics for population fits.
  double condition_number = 0.0;
  std::size_t rank = 0;
  // Scalar fits: the optimum sits on the search boundary.
  bool at_boundary = false;

  std::string to_json() const;
};

struct FitOptions {
  std::size_t bootstrap_resamples = 200;  // 0 disables ci68
  std::uint64_t seed = 0x5eed;
  std::size_t jobs = 1;
};

// 1/2 exp(-gamma (n+1)^p t) cos(Omega sqrt(n+1) t) for n = 0..levels-1.
Eigen::MatrixXd design_matrix(const SidebandCal& cal, std::span<const double> times, std::size_t levels);

BsbTrace bsb_signal(const PopulationVector& p, const SidebandCal& cal, std::span<const double> times);

// Uniform grid from 0 over `periods` vacuum Rabi periods 2 pi / Omega_SB.
std::vector<double> default_time_grid(const SidebandCal& cal, std::size_t points = 50, double periods = 4.0);

// Each point becomes k / shots with k ~ Binomial(shots, p); mt19937_64 seeded with `seed`.
BsbTrace sample_trace(const BsbTrace& trace, int shots, std::uint64_t seed);

// min ||A x - b|| subject to x >= 0, sum x = 1 (primal active set).
Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

FitResult fit_model_free(const BsbTrace& trace, const SidebandCal& cal, std::size_t n_max = 12,
                         const FitOptions& opts = {});

// Scalar-parameter fit: alpha for coherent, r for squeezed_vacuum, nbar for thermal.
FitResult fit_model(const BsbTrace& trace, Model model, const SidebandCal& cal, const FitOptions& opts = {});

// Search interval of the scalar parameter of `model`.
Interval model_parameter_range(Model model);
// Populations of the model law, enough levels for a tail below 1e-12 over the search range.
std::vector<double> model_populations(Model model, double value);

struct RabiOptions {
  std::size_t min_points = 12;
  double min_periods = 1.5;
  // Periodogram peak must exceed this multiple of the median periodogram power.
  double peak_to_floor = 4.0;
};

// A exp(-t/tau) cos(2 pi f t + phase) + offset by Levenberg-Marquardt; reports
// Omega = pi f (flop convention P = cos^2(Omega t)).
FitResult fit_rabi(std::span<const double> times, std::span<const double> values, const RabiOptions& opts = {});
FitResult fit_rabi(const BsbTrace& trace, const RabiOptions& opts = {});

// CSV with header `time_s,p_down,shots`.
void write_trace_csv(std::ostream& os, const BsbTrace& trace);
BsbTrace read_trace_csv(std::istream& is);

}  // namespace squeeze_amp::tomography
