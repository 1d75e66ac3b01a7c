#pragma once

#include <stdexcept>
#include <string>

namespace trackbench {

// Base class of every error thrown by the library. The CLI maps
// ValidationError subclasses to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

#define TRACKBENCH_DEFINE_ERROR(Name, Base)                               \
  class Name : public Base {                                              \
   public:                                                                \
    explicit Name(const std::string& what) : Base(#Name ": " + what) {}  \
  };

// geometry
TRACKBENCH_DEFINE_ERROR(NonPositiveDepth, Error)
// sequence io
TRACKBENCH_DEFINE_ERROR(FormatError, ValidationError)
TRACKBENCH_DEFINE_ERROR(MissingStream, ValidationError)
TRACKBENCH_DEFINE_ERROR(DimensionMismatch, ValidationError)
TRACKBENCH_DEFINE_ERROR(KeyframeSkipped, ValidationError)
// trackers
TRACKBENCH_DEFINE_ERROR(WindowOutOfBounds, Error)
// ground truth
TRACKBENCH_DEFINE_ERROR(NoValidDepth, Error)
// synth / experiments
TRACKBENCH_DEFINE_ERROR(InvalidSpec, ValidationError)
TRACKBENCH_DEFINE_ERROR(ProtocolMismatch, ValidationError)

#undef TRACKBENCH_DEFINE_ERROR

}  // namespace trackbench
