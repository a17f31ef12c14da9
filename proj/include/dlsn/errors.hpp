#pragma once

#include <stdexcept>
#include <string>

namespace dlsn {

/// Invalid hyperparameters, shapes or command-line options.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A call outside an operation's domain (i == j, single-class labels, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Factorization or sampling failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Process exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Rethrows the exception being handled with `prefix` in front of its message, keeping its type.
[[noreturn]] inline void rethrow_with_prefix(const std::string& prefix) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  }
}

/// Exit code for the exception being handled. Anything unclassified counts as numerical.
inline int exit_code_for_current() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const DataError&) {
    return kExitData;
  } catch (const DomainError&) {
    return kExitData;
  } catch (...) {
    return kExitNumerical;
  }
}

}  // namespace dlsn
