#pragma once

#include <stdexcept>
#include <string>

namespace debris {

enum class ErrorKind {
  MalformedFile,
  DimensionMismatch,
  UnknownClassIndex,
  NonOrthonormalRotation,
  IoError,
  DegenerateGeometry,
  MissingDensity,
  DomainError,
  InvalidConfig,
  InvalidSpec,
};

/// Structured error carrying an error family so the CLI can map it to a
/// stable exit code.
class DebrisError : public std::runtime_error {
 public:
  DebrisError(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::MalformedFile: return 2;
      case ErrorKind::DimensionMismatch: return 3;
      case ErrorKind::UnknownClassIndex: return 4;
      case ErrorKind::NonOrthonormalRotation: return 5;
      case ErrorKind::IoError: return 6;
      case ErrorKind::DegenerateGeometry: return 7;
      case ErrorKind::MissingDensity: return 8;
      case ErrorKind::DomainError: return 9;
      case ErrorKind::InvalidConfig: return 10;
      case ErrorKind::InvalidSpec: return 11;
    }
    return 1;
  }

  static const char* kind_name(ErrorKind k) {
    switch (k) {
      case ErrorKind::MalformedFile: return "MalformedFile";
      case ErrorKind::DimensionMismatch: return "DimensionMismatch";
      case ErrorKind::UnknownClassIndex: return "UnknownClassIndex";
      case ErrorKind::NonOrthonormalRotation: return "NonOrthonormalRotation";
      case ErrorKind::IoError: return "IoError";
      case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
      case ErrorKind::MissingDensity: return "MissingDensity";
      case ErrorKind::DomainError: return "DomainError";
      case ErrorKind::InvalidConfig: return "InvalidConfig";
      case ErrorKind::InvalidSpec: return "InvalidSpec";
    }
    return "Unknown";
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw DebrisError(kind, msg);
}

/// Parse failure with a file/line location, e.g. "cameras.txt:12: bad token".
[[noreturn]] inline void fail_at(ErrorKind kind, const std::string& file,
                                 std::size_t line, const std::string& msg) {
  throw DebrisError(kind, file + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace debris
