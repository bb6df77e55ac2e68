#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smmimo {

/// Invalid system / experiment configuration (bad alphabet order, K < 1, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg), messages_{msg} {}
  explicit ConfigError(std::vector<std::string> msgs)
      : std::runtime_error(join(msgs)), messages_(std::move(msgs)) {}
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& msgs) {
    std::string out;
    for (const auto& m : msgs) {
      if (!out.empty()) out += '\n';
      out += m;
    }
    return out;
  }
  std::vector<std::string> messages_;
};

/// Caller broke an API precondition (dimension mismatch, invalid index, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

/// Numerical failure inside a detector (singular factorization, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A Monte Carlo run breached its quality budget (erasure rate > 0.1%).
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace smmimo
