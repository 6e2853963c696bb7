#pragma once

#include <stdexcept>

namespace molcom {

// Malformed input data: bad file contents, inconsistent record sets.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-finite losses or gradients, failed fits.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace molcom
