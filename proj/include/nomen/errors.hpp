#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nomen {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define NOMEN_ERROR_TYPE(Name)               \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

// name codec
NOMEN_ERROR_TYPE(EmptyAfterNormalization)
NOMEN_ERROR_TYPE(MalformedEncoding)

// numeric core
NOMEN_ERROR_TYPE(ShapeMismatch)
NOMEN_ERROR_TYPE(LabelOutOfRange)
NOMEN_ERROR_TYPE(NoRecordedForward)
NOMEN_ERROR_TYPE(InvalidConfig)

// training
NOMEN_ERROR_TYPE(EmptyTrainingSet)
NOMEN_ERROR_TYPE(ClassIndexOutOfRange)

// persistence
NOMEN_ERROR_TYPE(IoError)
NOMEN_ERROR_TYPE(FormatVersionMismatch)
NOMEN_ERROR_TYPE(ChecksumMismatch)

// dataset ingestion
NOMEN_ERROR_TYPE(EmptyFile)
NOMEN_ERROR_TYPE(UnknownLabel)
NOMEN_ERROR_TYPE(TooFewSamples)

// evaluation
NOMEN_ERROR_TYPE(LengthMismatch)
NOMEN_ERROR_TYPE(EmptyMatrix)

// pseudo labeling
NOMEN_ERROR_TYPE(Unclassifiable)
NOMEN_ERROR_TYPE(InvalidWeights)

// prevalence aggregation
NOMEN_ERROR_TYPE(UnknownOrigin)
NOMEN_ERROR_TYPE(MissingMapping)
NOMEN_ERROR_TYPE(MissingHomeSet)

#undef NOMEN_ERROR_TYPE

/// Parse failure in a structured input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace nomen
