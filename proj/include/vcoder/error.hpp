#pragma once

#include <stdexcept>
#include <string>

namespace vcoder {

// Base of every error raised by the library. `kind()` is a short stable tag
// used in machine-readable error lines.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

#define VCODER_DEFINE_ERROR(Name, tag)                                  \
    class Name : public Error {                                         \
    public:                                                             \
        using Error::Error;                                             \
        const char* kind() const noexcept override { return tag; }      \
    }

VCODER_DEFINE_ERROR(IoError, "io");
VCODER_DEFINE_ERROR(ParseError, "parse");
VCODER_DEFINE_ERROR(FormatError, "format");
VCODER_DEFINE_ERROR(DomainError, "domain");
VCODER_DEFINE_ERROR(ShapeError, "shape");
VCODER_DEFINE_ERROR(NumericError, "numeric");
VCODER_DEFINE_ERROR(SpecError, "spec");
VCODER_DEFINE_ERROR(ConfigError, "config");
VCODER_DEFINE_ERROR(SelectionError, "selection");
VCODER_DEFINE_ERROR(ReportError, "report");
VCODER_DEFINE_ERROR(ComparisonError, "comparison");
VCODER_DEFINE_ERROR(LineageError, "lineage");

#undef VCODER_DEFINE_ERROR

} // namespace vcoder
