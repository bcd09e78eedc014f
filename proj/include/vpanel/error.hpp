#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpanel {

enum class ErrorKind {
  InvalidPolicy,
  EmptyVideo,
  InsufficientFrames,
  SourceError,
  IndexError,
  InvalidGeometry,
  PlanViolation,
  DatasetError,
  TemplateError,
  EndpointError,
  ConfigError,
  ReportError,
  InvalidSpec,
};

std::string_view to_string(ErrorKind kind);

// Every domain failure carries a machine-readable kind; the CLI prints it as
// the error class and maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vpanel
