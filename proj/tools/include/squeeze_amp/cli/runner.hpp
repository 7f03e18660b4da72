#pragma once

// Experiment runner behind the squeeze-amp executable: config parsing and
// resolution, the five experiment kinds, deterministic CSV and report output.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace squeeze_amp::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int parse = 2;
inline constexpr int validation = 3;
inline constexpr int numerical = 4;
}  // namespace exit_code

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

enum class Experiment { phase_sweep, jc_ha, trotter_convergence, lindblad_compare, tomography_roundtrip };

std::string to_string(Experiment e);

// Fully resolved configuration. All physical quantities in SI units.
struct ExperimentConfig {
  Experiment experiment = Experiment::phase_sweep;
  double r = 0.0;
  double theta = 0.0;
  double alpha_mag = 0.0;
  double nbar = 0.0;
  std::vector<double> phi_list;
  std::size_t N = 1;
  std::vector<std::size_t> N_list;
  double Omega = 0.0;
  double Gamma = 0.0;
  double qubit_dephasing_rate = 0.0;
  double t_total = 0.0;
  std::size_t cutoff = 0;
  std::size_t guard_levels = 0;
  std::size_t points = 0;
  int shots = 0;
  std::size_t repetitions = 0;
  std::string state;
  std::string hamiltonian;
  double omega_sb = 0.0;
  double gamma_sb = 0.0;
  double decay_exponent = 0.5;
  double leakage_tol = 0.0;
  std::uint64_t seed = 0;
  std::string output_path;

  // Resolved config as pretty JSON, keys in a fixed order; only keys that
  // apply to the experiment kind are emitted.
  std::string to_json() const;
};

// Throws ConfigError with exit_code::parse (malformed JSON, wrong field type)
// or exit_code::validation (unknown experiment or field, out-of-range value).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Returns a copy of the raw config text with `param` set to `value`; throws
// ConfigError(validation) if `param` is not a numeric field of the resolved config.
std::string override_param(const std::string& text, const std::string& param, double value);

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct RunResult {
  Table table;
  std::map<std::string, double> summary;
};

RunResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs);

// Doubles at 12 significant digits; fixed, locale-independent formatting.
std::string format_csv(const Table& table);
std::string format_cell(const Cell& c);

struct CommandOptions {
  std::string config_path;
  std::size_t jobs = 0;  // 0 = available parallelism
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  // sweep only
  std::string param;
  std::vector<double> values;
};

// Each returns a process exit code and prints diagnostics to stderr.
int command_run(const CommandOptions& opts);
int command_sweep(const CommandOptions& opts);

int main_entry(int argc, char** argv);

}  // namespace squeeze_amp::cli
