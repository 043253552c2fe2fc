#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace grelu {

// Base of every error thrown by the library. The CLI maps subclasses to exit
// codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix/vector shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated (index range, symmetry, bounds).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable input values.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text file. `offset` is the byte position where parsing
// stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Requested computation exceeds the enumerated-cost cap.
class CostError : public Error {
 public:
  using Error::Error;
};

// Equivalence transform could not reproduce a layer to tolerance.
class ConversionError : public Error {
 public:
  ConversionError(std::size_t layer, double residual, double bound)
      : Error("conversion failed at layer " + std::to_string(layer) +
              ": residual " + std::to_string(residual) + " > " +
              std::to_string(bound)),
        layer_(layer),
        residual_(residual) {}
  std::size_t layer() const noexcept { return layer_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t layer_;
  double residual_;
};

}  // namespace grelu
