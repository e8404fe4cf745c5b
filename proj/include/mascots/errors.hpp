#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mascots {

// Error category used by the CLI to pick exit codes: bad input exits 2,
// broken internal invariants exit 3.
enum class ErrorKind { Input, Internal };

class Error : public std::runtime_error {
public:
    Error(std::string code, ErrorKind kind, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)), kind_(kind) {}

    const std::string& code() const noexcept { return code_; }
    ErrorKind kind() const noexcept { return kind_; }

private:
    std::string code_;
    ErrorKind kind_;
};

#define MASCOTS_ERROR_TYPE(Name, Kind)                                        \
    struct Name : Error {                                                     \
        explicit Name(const std::string& message)                             \
            : Error(#Name, ErrorKind::Kind, message) {}                       \
    }

MASCOTS_ERROR_TYPE(ParseError, Input);
MASCOTS_ERROR_TYPE(ShapeError, Input);
MASCOTS_ERROR_TYPE(EmptyDataset, Input);
MASCOTS_ERROR_TYPE(InvalidAlphabet, Input);
MASCOTS_ERROR_TYPE(LengthError, Input);
MASCOTS_ERROR_TYPE(WindowTooLarge, Input);
MASCOTS_ERROR_TYPE(SeriesTooShort, Input);
MASCOTS_ERROR_TYPE(UnknownHash, Input);
MASCOTS_ERROR_TYPE(LengthMismatch, Input);
MASCOTS_ERROR_TYPE(IndexOutOfRange, Input);
MASCOTS_ERROR_TYPE(ConfigError, Input);
MASCOTS_ERROR_TYPE(SchemaError, Input);
MASCOTS_ERROR_TYPE(NonFiniteLoss, Input);
MASCOTS_ERROR_TYPE(EmptyTrace, Input);
MASCOTS_ERROR_TYPE(NoSwapAvailable, Input);
MASCOTS_ERROR_TYPE(NoContainedPattern, Input);
MASCOTS_ERROR_TYPE(OutOfBounds, Internal);
MASCOTS_ERROR_TYPE(InternalError, Internal);

#undef MASCOTS_ERROR_TYPE

}  // namespace mascots
