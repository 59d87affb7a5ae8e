#pragma once

#include <stdexcept>
#include <string>

namespace acr {

// Exit-code mapping used by the CLI: usage 1, data 2, numeric 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : UsageError {
  explicit ConfigError(const std::string& msg) : UsageError(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyAudio : DataError {
  explicit EmptyAudio(const std::string& msg) : DataError(msg) {}
};

struct DegenerateAudio : DataError {
  explicit DegenerateAudio(const std::string& msg) : DataError(msg) {}
};

struct EmptyQuery : DataError {
  explicit EmptyQuery(const std::string& msg) : DataError(msg) {}
};

struct EmptyCaptionSet : DataError {
  explicit EmptyCaptionSet(const std::string& msg) : DataError(msg) {}
};

struct InsufficientData : DataError {
  explicit InsufficientData(const std::string& msg) : DataError(msg) {}
};

struct TruncatedFile : DataError {
  explicit TruncatedFile(const std::string& msg) : DataError(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace acr
