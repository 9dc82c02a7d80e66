#ifndef MVLDP_ERRORS_HPP
#define MVLDP_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace mvldp {

// Error taxonomy mirrored by the CLI exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration: rejected before any compute starts.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
  ConfigError(const std::string& msg, std::vector<std::string> details)
      : Error(msg), details_(std::move(details)) {}
  const std::vector<std::string>& details() const { return details_; }

 private:
  std::vector<std::string> details_;
};

// Invalid model definition or a coefficient misbehaving under probes.
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& msg) : Error(msg) {}
};

// Numerical failure at run time: blow-up, divergence, infeasibility.
class NumericsError : public Error {
 public:
  explicit NumericsError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace mvldp

#endif
