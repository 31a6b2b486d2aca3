#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tabkde {

enum class ErrorKind {
  Io,
  EmptyFile,
  Parse,
  UnknownCategory,
  MissingValue,
  SchemaMismatch,
  Config,
  TooFewRows,
  NoRows,
  EmptyTable,
  DegenerateMatrix,
  DegenerateSamples,
  CoresetTooLarge,
  GenerationStalled,
  ModelFormat,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::NoRows: return "NoRows";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::DegenerateSamples: return "DegenerateSamples";
    case ErrorKind::CoresetTooLarge: return "CoresetTooLarge";
    case ErrorKind::GenerationStalled: return "GenerationStalled";
    case ErrorKind::ModelFormat: return "ModelFormat";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and machine-readable;
/// `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Failure tied to a cell of an input file. Rows are 1-based data rows (header
/// excluded), columns are 0-based.
class CellError : public Error {
 public:
  CellError(ErrorKind kind, std::size_t row, std::size_t col, const std::string& message)
      : Error(kind, message + " (row " + std::to_string(row) + ", column " +
                        std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace tabkde
