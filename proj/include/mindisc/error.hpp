#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mindisc {

enum class ErrorKind {
  DegenerateBatch,
  ShapeMismatch,
  EmptyBatch,
  LabelOutOfRange,
  InvalidSpec,
  InvalidParam,
  FileNotFound,
  MalformedRow,
  NonFiniteValue,
  NonFiniteLoss,
  IoError,
  VersionMismatch,
  CorruptCheckpoint,
  UnlabeledDataset,
  EmptyDataset,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateBatch: return "DegenerateBatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::UnlabeledDataset: return "UnlabeledDataset";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and meant for
/// dispatch (the CLI maps it onto exit codes); `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the trainer when any loss term stops being finite.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::size_t step, const std::string& term)
      : Error(ErrorKind::NonFiniteLoss,
              "loss term '" + term + "' is not finite at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Raised by the CSV reader; carries the 1-based row and column of the bad cell.
class RowError : public Error {
 public:
  RowError(ErrorKind kind, std::size_t row, std::size_t column, const std::string& message)
      : Error(kind, "row " + std::to_string(row) + ", column " + std::to_string(column) + ": " +
                        message),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace mindisc
