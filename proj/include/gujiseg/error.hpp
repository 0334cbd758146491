#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gujiseg {

// Base of every error the library throws on bad input data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid UTF-8; offset is the byte position of the offending sequence.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : Error("invalid UTF-8 at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Line-oriented format violation. Line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A document that has no characters left once punctuation is stripped.
class EmptySequenceError : public Error {
 public:
  explicit EmptySequenceError(const std::string& doc_id)
      : Error("document '" + doc_id + "' is empty after stripping punctuation"),
        doc_id_(doc_id) {}
  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string doc_id_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Model file problems. line() is 0 when the error is not tied to a line.
class ModelFormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

}  // namespace gujiseg
