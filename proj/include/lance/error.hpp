#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lance {

/// Broad failure class. The CLI maps these onto its exit codes.
enum class ErrorCategory { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define LANCE_DEFINE_ERROR(Name, Category)                      \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what)                      \
        : Error(ErrorCategory::Category, #Name ": " + what) {}  \
  };

LANCE_DEFINE_ERROR(ConfigError, Config)
LANCE_DEFINE_ERROR(SpecError, Config)
LANCE_DEFINE_ERROR(TemplateError, Config)
LANCE_DEFINE_ERROR(ShapeError, Data)
LANCE_DEFINE_ERROR(InvalidValue, Data)
LANCE_DEFINE_ERROR(FormatError, Data)
LANCE_DEFINE_ERROR(UnsupportedFormat, Data)
LANCE_DEFINE_ERROR(ManifestError, Data)
LANCE_DEFINE_ERROR(EmptyBank, Data)
LANCE_DEFINE_ERROR(IndexError, Data)
LANCE_DEFINE_ERROR(EmptySet, Data)
LANCE_DEFINE_ERROR(DegenerateShift, Data)
LANCE_DEFINE_ERROR(IoError, Data)
LANCE_DEFINE_ERROR(CapacityError, Config)
LANCE_DEFINE_ERROR(DivergenceError, Numeric)

#undef LANCE_DEFINE_ERROR

/// A zero-norm row where a direction is required. Carries the offending row.
class DegenerateRow : public Error {
 public:
  DegenerateRow(std::size_t row, const std::string& what)
      : Error(ErrorCategory::Data, "DegenerateRow: " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace lance
