#pragma once

#include <stdexcept>
#include <string>

namespace pairvoice {

// Base of every error the library raises. Each subclass corresponds to one
// failure category so callers (and the CLI) can react per category.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "Error"; }
};

#define PAIRVOICE_DEFINE_ERROR(Name)                                      \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& what) : Error(what) {}           \
        const char* kind() const noexcept override { return #Name; }      \
    };

PAIRVOICE_DEFINE_ERROR(FormatError)
PAIRVOICE_DEFINE_ERROR(UnsupportedError)
PAIRVOICE_DEFINE_ERROR(TooShortError)
PAIRVOICE_DEFINE_ERROR(ConfigError)
PAIRVOICE_DEFINE_ERROR(ShapeError)
PAIRVOICE_DEFINE_ERROR(InsufficientVoicingError)
PAIRVOICE_DEFINE_ERROR(ParseError)
PAIRVOICE_DEFINE_ERROR(SchemaError)
PAIRVOICE_DEFINE_ERROR(DegenerateError)
PAIRVOICE_DEFINE_ERROR(InsufficientDataError)
PAIRVOICE_DEFINE_ERROR(NumericalError)
PAIRVOICE_DEFINE_ERROR(AlignmentError)
PAIRVOICE_DEFINE_ERROR(DuplicateError)
PAIRVOICE_DEFINE_ERROR(DivergenceError)
PAIRVOICE_DEFINE_ERROR(RefusalError)
PAIRVOICE_DEFINE_ERROR(IoError)

#undef PAIRVOICE_DEFINE_ERROR

}  // namespace pairvoice
