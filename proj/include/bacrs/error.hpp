#pragma once

#include <stdexcept>
#include <string>

namespace bacrs {

// Error categories map onto the CLI exit codes: usage 1, data 2, numeric 3.

class usage_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace bacrs
