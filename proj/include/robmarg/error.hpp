#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robmarg {

// Bad input: violated preconditions, malformed files, unknown config values.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not produce a valid answer for valid input
// (degenerate scale, logistic separation, flat score, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Warnings go to stderr unless silenced; tests and the Monte Carlo loops
// silence them.
void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);
bool warnings_enabled();

}  // namespace robmarg
