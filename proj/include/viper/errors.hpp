#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace viper {

// Error taxonomy shared across the library. The CLI maps these onto its
// exit-code contract (2 = invalid input, 3 = incompatibility).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched tensor shapes or inner dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Math domain violations: log of a non-positive value, fractional power of a
// negative base, overflow in exp/pow.
struct DomainError : Error {
  using Error::Error;
};

// Formally valid inputs that are numerically unusable (near-zero norm).
struct DegenerateInputError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar root, repeated backward without reset,
// retrieval against an empty database.
struct ContractError : Error {
  using Error::Error;
};

// Malformed binary files; carries the byte offset of the first bad byte.
struct FormatError : Error {
  FormatError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

// Well-formed inputs that do not fit together: unsupported format versions,
// checkpoint/dataset environment-count mismatches, dataset hash mismatches.
struct IncompatibilityError : Error {
  using Error::Error;
};

}  // namespace viper
