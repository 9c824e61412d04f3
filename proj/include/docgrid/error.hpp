#ifndef DOCGRID_ERROR_HPP
#define DOCGRID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace docgrid {

// Shape/argument contract violations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Experiment wiring errors, e.g. multi-scale evaluation without SPP.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad magic or unsupported version in a binary file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncated payload or checksum mismatch.
class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergedTraining : public std::runtime_error {
 public:
  DivergedTraining(long long update, const std::string& what)
      : std::runtime_error(what), update_(update) {}
  long long update() const noexcept { return update_; }

 private:
  long long update_;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace docgrid

#endif  // DOCGRID_ERROR_HPP
