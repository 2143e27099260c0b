#pragma once

#include <stdexcept>
#include <string>

namespace spoofdet {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/extent disagreement between tensors or grids.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input whose contents are unusable (bad label value,
// non-finite sample, empty batch, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A configuration object or config file violates its schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The caller misused an API (non-scalar loss handed to backward, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; message carries the offending line when known.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Filesystem/stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file is readable but not in a flavor this library supports.
class FormatError : public Error {
 public:
  using Error::Error;
};

// FFT input whose length is not a power of two.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Signal too short to cut a single analysis frame from.
class TooShortError : public Error {
 public:
  using Error::Error;
};

// All-zero / constant signals that make dB or min-max scaling meaningless.
class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

// A requested split cannot represent every class in every part.
class StratificationError : public Error {
 public:
  using Error::Error;
};

// Training could not run or diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined on the given inputs (e.g. AUC with one class).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Checkpoint deserialization failure; message names the offending field.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace spoofdet
