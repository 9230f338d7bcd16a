#pragma once

#include <stdexcept>
#include <string>

namespace mergelaw {

// Bad or inconsistent input (files, tables, arguments). CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation that cannot produce a meaningful result. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mergelaw
