#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mia {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input line (not valid JSON / CSV, wrong value types).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A record violates a field contract (length, sign, uniqueness).
class ValidationError : public Error {
 public:
  ValidationError(std::string id, std::string field, const std::string& message)
      : Error("record '" + id + "', field '" + field + "': " + message),
        id_(std::move(id)),
        field_(std::move(field)) {}
  const std::string& id() const noexcept { return id_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string id_;
  std::string field_;
};

#define MIA_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

MIA_DEFINE_ERROR(SplitError);
MIA_DEFINE_ERROR(ConfigError);
MIA_DEFINE_ERROR(EmptyInput);
MIA_DEFINE_ERROR(DegenerateInput);
MIA_DEFINE_ERROR(DegenerateFit);
MIA_DEFINE_ERROR(WindowError);
MIA_DEFINE_ERROR(MissingContext);
MIA_DEFINE_ERROR(MissingText);
MIA_DEFINE_ERROR(FeatureError);
MIA_DEFINE_ERROR(PoolError);
MIA_DEFINE_ERROR(DomainError);
MIA_DEFINE_ERROR(TrainError);
MIA_DEFINE_ERROR(NumericalError);
MIA_DEFINE_ERROR(StateError);
MIA_DEFINE_ERROR(MetricError);

#undef MIA_DEFINE_ERROR

}  // namespace mia
