#pragma once

#include <stdexcept>
#include <string>

namespace xaikit {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A precondition stated by an operation's contract was violated.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Tensor shapes do not line up.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// A file could not be read or decoded during dataset ingestion.
class IngestError : public Error {
 public:
  explicit IngestError(const std::string& what) : Error(what) {}
};

// Checkpoint parsing failures keep their cause so callers can distinguish
// a corrupt file from a file for a different model.
class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, bad_version, shape_mismatch, truncated };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A linear system handed to the ridge solver was singular.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(what) {}
};

}  // namespace xaikit
