#pragma once

#include <stdexcept>
#include <string>

namespace mffssim {

/// Inputs whose shapes (image size, channel count, patch grid, map size)
/// do not agree with each other.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Unreadable or unwritable files, undecodable image data.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Bad parameter values (probabilities, sigmas, bit depths) are reported
// as plain std::invalid_argument.

}  // namespace mffssim
