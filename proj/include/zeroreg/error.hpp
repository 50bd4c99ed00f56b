#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace zeroreg {

/// Base of every error the engine raises. Callers that only need to report
/// failures catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input rejected because it is malformed or violates a documented invariant.
class InputError : public Error {
 public:
  using Error::Error;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  ValidationError(std::string field, const std::string& what)
      : InputError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class WriteError : public Error {
 public:
  WriteError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class EmptyInputError : public InputError {
 public:
  using InputError::InputError;
};

class ZeroVectorError : public InputError {
 public:
  using InputError::InputError;
};

class SizeLimitError : public InputError {
 public:
  using InputError::InputError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateConfigError : public Error {
 public:
  using Error::Error;
};

class NoConsensusError : public Error {
 public:
  using Error::Error;
};

class EmptySceneError : public Error {
 public:
  using Error::Error;
};

class EmptyRenderError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name and the underlying reason.
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& reason)
      : Error(stage + ": " + reason), stage_(std::move(stage)), reason_(reason) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string stage_;
  std::string reason_;
};

}  // namespace zeroreg
