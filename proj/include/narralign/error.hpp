#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace narralign {

enum class ErrorKind {
  EmptyInput,
  NoScenesFound,
  MalformedRecord,
  InvariantViolation,
  DegenerateDistribution,
  CapacityExceeded,
  UndefinedRatio,
  MissingGenderData,
  MissingInput,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoScenesFound: return "NoScenesFound";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::CapacityExceeded: return "CapacityExceeded";
    case ErrorKind::UndefinedRatio: return "UndefinedRatio";
    case ErrorKind::MissingGenderData: return "MissingGenderData";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised while reading line-oriented files; line numbers are 1-based.
class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line_no, const std::string& message)
      : Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": " + message),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace narralign
