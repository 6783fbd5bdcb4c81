#pragma once

#include <stdexcept>
#include <string>

namespace biomass {

/// Malformed or inconsistent user input: files, configs, arguments.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical or shape failure inside the model code.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace biomass
