#pragma once

#include <stdexcept>
#include <string>

namespace dq {

// Every error raised by the engine derives from Error so the CLI can map
// operational failures to exit code 2 in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  EncodingError(std::string column, const std::string& what)
      : Error(what), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class SnapshotError : public Error {
 public:
  using Error::Error;
};

class ModelRunError : public Error {
 public:
  ModelRunError(std::string model, const std::string& what)
      : Error("model '" + model + "': " + what), model_(std::move(model)) {}
  const std::string& model() const { return model_; }

 private:
  std::string model_;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

class InjectionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace dq
