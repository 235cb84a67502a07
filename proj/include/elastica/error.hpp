// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace elastica {

enum class ErrorKind {
  invalid_input,   // a precondition or type invariant was violated
  numeric_failure  // the computation itself could not produce a valid result
};

/// Exception carrying the module and the invariant that failed, so that the
/// CLI can emit a machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string invariant,
        const std::string& message)
      : std::runtime_error(message),
        kind_(kind),
        module_(std::move(module)),
        invariant_(std::move(invariant)) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& module() const noexcept { return module_; }
  [[nodiscard]] const std::string& invariant() const noexcept {
    return invariant_;
  }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string invariant_;
};

namespace detail {

inline void require(bool condition, const char* module, const char* invariant,
                    const std::string& message) {
  if (!condition) {
    throw Error(ErrorKind::invalid_input, module, invariant, message);
  }
}

}  // namespace detail
}  // namespace elastica
