#pragma once

#include <stdexcept>
#include <string>

namespace gantrust {

// One exception family; subtypes name the contract that was violated.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };        // matrix/layer dimension mismatch
struct DomainError : Error { using Error::Error; };       // argument outside its valid range
struct StateError : Error { using Error::Error; };        // call sequence violated (e.g. backward before forward)
struct NumericError : Error { using Error::Error; };      // non-finite value produced
struct EvidenceError : Error { using Error::Error; };     // not enough evidence bits for the requested window math
struct DataError : Error { using Error::Error; };         // dataset too small / malformed for training
struct ParseError : Error { using Error::Error; };        // config or file syntax
struct ValidationError : Error { using Error::Error; };   // config semantic checks
struct IoError : Error { using Error::Error; };           // file system failures

}  // namespace gantrust
