#pragma once

#include <stdexcept>
#include <string>

namespace bankdist {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileNotFoundError : Error {
  explicit FileNotFoundError(const std::string& path)
      : Error("file not found: " + path) {}
};

struct InvalidSpecError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct LlmUnavailableError : Error {
  using Error::Error;
};

struct SchemaViolationError : Error {
  std::string field;
  SchemaViolationError(std::string field_, const std::string& reason)
      : Error("schema violation on '" + field_ + "': " + reason),
        field(std::move(field_)) {}
};

struct TooManyArticlesError : Error {
  explicit TooManyArticlesError(std::size_t n)
      : Error("episode query limited to 25 articles, got " + std::to_string(n)) {}
};

struct UnresolvedBankError : Error {
  using Error::Error;
};

struct InconsistentEventsError : Error {
  using Error::Error;
};

struct MissingDenominatorError : Error {
  using Error::Error;
};

struct RankDeficientError : Error {
  using Error::Error;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

struct NonFiniteInputError : Error {
  using Error::Error;
};

struct MissingSeriesError : Error {
  using Error::Error;
};

struct MissingDependencyError : Error {
  using Error::Error;
};

}  // namespace bankdist
