#pragma once

#include <stdexcept>
#include <string>

namespace gravmatch {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GRAVMATCH_DEFINE_ERROR(Name)              \
    class Name : public Error {                   \
    public:                                       \
        explicit Name(const std::string& what)    \
            : Error(#Name ": " + what) {}         \
    }

GRAVMATCH_DEFINE_ERROR(OutOfBounds);
GRAVMATCH_DEFINE_ERROR(WindowClipped);
GRAVMATCH_DEFINE_ERROR(MalformedFile);
GRAVMATCH_DEFINE_ERROR(DegenerateSigma);
GRAVMATCH_DEFINE_ERROR(LengthMismatch);
GRAVMATCH_DEFINE_ERROR(EmptyCandidates);
GRAVMATCH_DEFINE_ERROR(TooLarge);
GRAVMATCH_DEFINE_ERROR(NoContour);
GRAVMATCH_DEFINE_ERROR(Degenerate);
GRAVMATCH_DEFINE_ERROR(InvalidArgument);

#undef GRAVMATCH_DEFINE_ERROR

}  // namespace gravmatch
