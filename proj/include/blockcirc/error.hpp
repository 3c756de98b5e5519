#pragma once

#include <stdexcept>
#include <string>

namespace blockcirc {

// Error categories map one-to-one onto CLI exit codes (see tools/main.cpp).
enum class ErrorKind {
  kDomain,
  kShape,
  kLength,
  kFeasibility,
  kCycle,
  kUnschedulable,
  kIo,
  kValidation,
  kUsage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define BLOCKCIRC_ERROR_TYPE(Name, Kind)                         \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

BLOCKCIRC_ERROR_TYPE(DomainError, ErrorKind::kDomain)
BLOCKCIRC_ERROR_TYPE(ShapeError, ErrorKind::kShape)
BLOCKCIRC_ERROR_TYPE(LengthError, ErrorKind::kLength)
BLOCKCIRC_ERROR_TYPE(FeasibilityError, ErrorKind::kFeasibility)
BLOCKCIRC_ERROR_TYPE(CycleError, ErrorKind::kCycle)
BLOCKCIRC_ERROR_TYPE(UnschedulableError, ErrorKind::kUnschedulable)
BLOCKCIRC_ERROR_TYPE(IoError, ErrorKind::kIo)
BLOCKCIRC_ERROR_TYPE(ValidationError, ErrorKind::kValidation)
BLOCKCIRC_ERROR_TYPE(UsageError, ErrorKind::kUsage)

#undef BLOCKCIRC_ERROR_TYPE

}  // namespace blockcirc
