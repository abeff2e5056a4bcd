#pragma once

#include <stdexcept>
#include <string>

namespace gpsm {

/// Broad failure class. The numeric values double as CLI exit codes and as
/// the status codes of the C API.
enum class ErrorKind : int {
  Internal = 1,
  Config = 2,
  Data = 3,
  Numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

inline Error config_error(std::string module, const std::string& msg) {
  return Error(ErrorKind::Config, std::move(module), msg);
}
inline Error data_error(std::string module, const std::string& msg) {
  return Error(ErrorKind::Data, std::move(module), msg);
}
inline Error numerical_error(std::string module, const std::string& msg) {
  return Error(ErrorKind::Numerical, std::move(module), msg);
}

}  // namespace gpsm
