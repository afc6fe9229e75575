#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ncmart {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: exponents out of range, malformed specs, non-projections.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidInput {
 public:
  DimensionMismatch(long expected, long got)
      : InvalidInput("dimension mismatch: expected " + std::to_string(expected) +
                     ", got " + std::to_string(got)) {}
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::uint64_t matrix_hash)
      : Error(what + " (matrix hash " + std::to_string(matrix_hash) + ")"),
        hash_(matrix_hash) {}
  std::uint64_t matrix_hash() const { return hash_; }

 private:
  std::uint64_t hash_;
};

}  // namespace ncmart
