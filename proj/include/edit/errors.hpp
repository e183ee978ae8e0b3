#pragma once

#include <stdexcept>
#include <string>

namespace edit {

/// Incompatible tensor shapes passed to an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Image or patch geometry that does not tile (e.g. h mod p != 0).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse: wrong record type, backward twice, unsupported combination.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Index or size outside the valid range.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed external data (dataset files, images).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A set of per-layer inputs does not cover every layer.
class CoverageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace edit
