#pragma once

#include <stdexcept>
#include <string>

namespace iolw {

// Base of every error thrown by the toolkit. Protocol-level outcomes that are
// part of normal operation (a failed tag check, a rejected replay) are returned
// as status values instead, see secure_link.hpp.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define IOLW_DEFINE_ERROR(NAME)                                     \
  class NAME : public Error {                                       \
  public:                                                           \
    explicit NAME(const std::string& what = #NAME) : Error(what) {} \
  }

IOLW_DEFINE_ERROR(CapacityExceeded);
IOLW_DEFINE_ERROR(DuplicateId);
IOLW_DEFINE_ERROR(ConfigInvalid);
IOLW_DEFINE_ERROR(UnknownTrack);
IOLW_DEFINE_ERROR(MalformedFrame);
IOLW_DEFINE_ERROR(ChannelOutOfRange);
IOLW_DEFINE_ERROR(TooFewChannels);
IOLW_DEFINE_ERROR(WeakSecret);
IOLW_DEFINE_ERROR(LinkInFailState);
IOLW_DEFINE_ERROR(CounterExhausted);
IOLW_DEFINE_ERROR(NotInFailState);
IOLW_DEFINE_ERROR(InvalidParams);
IOLW_DEFINE_ERROR(NotInServiceMode);
IOLW_DEFINE_ERROR(PortOccupied);
IOLW_DEFINE_ERROR(PortNotPreconfigured);
IOLW_DEFINE_ERROR(OOBUnavailable);
IOLW_DEFINE_ERROR(NotAllowlisted);
IOLW_DEFINE_ERROR(LeaseActiveElsewhere);
IOLW_DEFINE_ERROR(InvalidScenario);
IOLW_DEFINE_ERROR(PrerequisiteUnmet);
IOLW_DEFINE_ERROR(IncompleteTrace);
IOLW_DEFINE_ERROR(IOFailure);

#undef IOLW_DEFINE_ERROR

} // namespace iolw
