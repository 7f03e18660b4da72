#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace squeeze_amp {

// Thrown when a truncated Fock basis is too small for the requested state or
// operator. Carries the measured guard-band population.
class InsufficientCutoff : public std::runtime_error {
 public:
  InsufficientCutoff(const std::string& what, std::size_t cutoff, double leakage)
      : std::runtime_error(what), cutoff_(cutoff), leakage_(leakage) {}

  std::size_t cutoff() const noexcept { return cutoff_; }
  double leakage() const noexcept { return leakage_; }

 private:
  std::size_t cutoff_;
  double leakage_;
};

// Leakage breach detected while interpreting a pulse sequence or a
// stroboscopic propagation; pulse_index is the offending step.
class LeakageBreach : public InsufficientCutoff {
 public:
  LeakageBreach(const std::string& what, std::size_t cutoff, double leakage,
                std::size_t pulse_index)
      : InsufficientCutoff(what, cutoff, leakage), pulse_index_(pulse_index) {}

  std::size_t pulse_index() const noexcept { return pulse_index_; }

 private:
  std::size_t pulse_index_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace squeeze_amp
