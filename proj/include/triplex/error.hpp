#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace triplex {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TRIPLEX_DEFINE_ERROR(Name)         \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// hrv
TRIPLEX_DEFINE_ERROR(InvalidSignal);
TRIPLEX_DEFINE_ERROR(InsufficientBeats);
TRIPLEX_DEFINE_ERROR(InvalidConfig);

// mqtt
TRIPLEX_DEFINE_ERROR(EncodeError);
TRIPLEX_DEFINE_ERROR(ProtocolError);
TRIPLEX_DEFINE_ERROR(SessionClosed);
TRIPLEX_DEFINE_ERROR(DeliveryError);
TRIPLEX_DEFINE_ERROR(StartupError);

// store
TRIPLEX_DEFINE_ERROR(NoSuchCollection);

// faas
TRIPLEX_DEFINE_ERROR(RegistrationError);
TRIPLEX_DEFINE_ERROR(NoSuchFunction);
TRIPLEX_DEFINE_ERROR(TriggerError);

// emulator
class ReplayError : public Error {
 public:
  ReplayError(const std::string& what, std::int64_t published_so_far = 0)
      : Error(what), published_so_far_(published_so_far) {}
  std::int64_t published_so_far() const noexcept { return published_so_far_; }

 private:
  std::int64_t published_so_far_;
};

/// Flow parse failure; `location` names the offending node, wire, or text offset.
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& reason)
      : Error(location + ": " + reason), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

#undef TRIPLEX_DEFINE_ERROR

}  // namespace triplex
