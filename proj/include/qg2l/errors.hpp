#pragma once

#include <stdexcept>
#include <string>

namespace qg2l {

/// Invalid configuration or inconsistent model setup (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CFL violation, contraction failure, non-convergence (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File read/write failures and corrupt snapshots (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

}  // namespace qg2l
