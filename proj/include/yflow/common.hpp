#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace yflow {

// Thrown on malformed configs / CLI arguments. CLI maps this to exit code 2.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values or otherwise cannot
// continue numerically. CLI maps this to exit code 3.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

}  // namespace yflow
