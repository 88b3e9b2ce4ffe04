#pragma once

#include <stdexcept>

namespace spred {

/// Invalid configuration values; the message names every offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spred
