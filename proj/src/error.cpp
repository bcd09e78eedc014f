#include "vpanel/error.hpp"

namespace vpanel {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidPolicy: return "InvalidPolicy";
    case ErrorKind::EmptyVideo: return "EmptyVideo";
    case ErrorKind::InsufficientFrames: return "InsufficientFrames";
    case ErrorKind::SourceError: return "SourceError";
    case ErrorKind::IndexError: return "IndexError";
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::PlanViolation: return "PlanViolation";
    case ErrorKind::DatasetError: return "DatasetError";
    case ErrorKind::TemplateError: return "TemplateError";
    case ErrorKind::EndpointError: return "EndpointError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ReportError: return "ReportError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

}  // namespace vpanel
