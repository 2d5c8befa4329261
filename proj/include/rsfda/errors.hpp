#pragma once

#include <stdexcept>
#include <string>

namespace rsfda {

// Every library failure derives from Error so the CLI can report a single
// machine-readable category per exception type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

#define RSFDA_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(what) {}          \
        const char* kind() const noexcept override { return tag; }      \
    };

RSFDA_DEFINE_ERROR(DimensionError, "dimension")
RSFDA_DEFINE_ERROR(NumericError, "numeric")
RSFDA_DEFINE_ERROR(StateError, "state")
RSFDA_DEFINE_ERROR(LabelError, "label")
RSFDA_DEFINE_ERROR(CoverageError, "coverage")
RSFDA_DEFINE_ERROR(ConfigError, "config")
RSFDA_DEFINE_ERROR(DomainError, "domain")
RSFDA_DEFINE_ERROR(DegenerateError, "degenerate")
RSFDA_DEFINE_ERROR(ParseError, "parse")
RSFDA_DEFINE_ERROR(SchemaError, "schema")
RSFDA_DEFINE_ERROR(IoError, "io")

#undef RSFDA_DEFINE_ERROR

}  // namespace rsfda
