#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdr {

// Bad argument: shape mismatch, non-finite value, invalid distribution.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// H(Y) == 0, so correlation strength is undefined.
class DegenerateTarget : public std::domain_error {
 public:
  explicit DegenerateTarget(const std::string& what) : std::domain_error(what) {}
};

class DegenerateLabels : public std::domain_error {
 public:
  explicit DegenerateLabels(const std::string& what) : std::domain_error(what) {}
};

class InsufficientEvidence : public std::runtime_error {
 public:
  explicit InsufficientEvidence(const std::string& what) : std::runtime_error(what) {}
};

class InvalidPolicy : public std::invalid_argument {
 public:
  explicit InvalidPolicy(const std::string& what) : std::invalid_argument(what) {}
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cdr
