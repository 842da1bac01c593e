#pragma once

#include <stdexcept>
#include <string>

namespace normlab {

// Base class for all errors raised by the library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rejected input: a caller-supplied value violates a precondition
// (non-finite coordinate, dimension mismatch, negative mass, ...).
struct input_error : error {
  using error::error;
};

// Validation failure of a structured object (metric axioms, JSON schema).
struct validation_error : input_error {
  using input_error::input_error;
};

// Two sketches that are not comparable were combined (fingerprint or
// config mismatch between protocol parties).
struct protocol_error : error {
  using error::error;
};

// A generator produced a pair outside the DTEP promise.
struct generator_error : error {
  using error::error;
};

// A separating hyperplane handed to witness extraction is not actually
// separating (e.g. no mass on far pairs).
struct invalid_hyperplane_error : error {
  using error::error;
};

}  // namespace normlab
