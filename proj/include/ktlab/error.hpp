#pragma once

#include <stdexcept>
#include <string>

namespace ktlab {

/// Bad or missing input data / configuration. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A selector matched nothing. The CLI maps this to exit code 3.
class EmptySelection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string where(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line);
}

}  // namespace ktlab
