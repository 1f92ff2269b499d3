#pragma once

#include <stdexcept>
#include <string>

namespace abdris {

/// A power budget that cannot be met (e.g. RIS static noise alone exceeds P_A).
class InfeasibleBudget : public std::runtime_error {
 public:
  explicit InfeasibleBudget(const std::string& what) : std::runtime_error(what) {}
};

class SingularSystem : public std::runtime_error {
 public:
  explicit SingularSystem(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or argument shape.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace abdris
