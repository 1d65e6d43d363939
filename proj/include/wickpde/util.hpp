#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wickpde {

inline constexpr const char* kVersion = "0.1.0";

// Malformed or inconsistent input (scenario files, shape mismatches, size
// gates).  The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during a run (singular step matrix, non-convergent
// quadrature, counter overflow).  The CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal representation that round-trips to the same double.
// All CSV and report emission goes through this so golden files are stable.
std::string format_double(double x);

// FNV-1a 64-bit hash, used to fingerprint scenario inputs in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace wickpde
