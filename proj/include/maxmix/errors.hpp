#pragma once

#include <stdexcept>

namespace maxmix {

// Contract violations: bad arguments, malformed input files.
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Algorithm breakdowns: non-convergence, indefinite matrices, quadrature failure.
struct numeric_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace maxmix
