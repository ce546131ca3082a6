#pragma once

#include <stdexcept>
#include <string>

namespace crfiqa {

// Base type for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NormalizationError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct LabelError : Error { using Error::Error; };
struct InsufficientClassesError : Error { using Error::Error; };
struct PairConstructionError : Error { using Error::Error; };
struct EmptyScoresError : Error { using Error::Error; };
struct InsufficientPointsError : Error { using Error::Error; };
struct DegenerateWeightsError : Error { using Error::Error; };
struct ConstantInputError : Error { using Error::Error; };
struct LookupError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Bad command invocation (missing/contradictory flags), as opposed to bad data.
struct UsageError : Error { using Error::Error; };

// File parse failure with the offending position attached.
struct ParseError : IoError {
  ParseError(std::string file_in, long long line_in, long long column_in,
             const std::string& message)
      : IoError(file_in + ":" + std::to_string(line_in) + ":" +
                std::to_string(column_in) + ": " + message),
        file(std::move(file_in)),
        line(line_in),
        column(column_in) {}

  std::string file;
  long long line;
  long long column;
};

// Training produced a non-finite loss or parameter.
struct DivergenceError : Error {
  DivergenceError(long long iteration_in, const std::string& message)
      : Error("iteration " + std::to_string(iteration_in) + ": " + message),
        iteration(iteration_in) {}

  long long iteration;
};

}  // namespace crfiqa
