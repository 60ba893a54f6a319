#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace callerspace {

enum class ErrorCode {
    Io,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    NonFiniteValue,
    DimensionOrEmpty,
    InvalidStore,
    InsufficientData,
    InsufficientUnits,
    TooFewSamples,
    DimensionMismatch,
    SingleClass,
    KernelNumericalError,
    DegenerateBoost,
    OneClassOnly,
    TooFewGroups,
    InvalidArgument,
    Config,
    Internal,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable code; every failure raised by the
/// library goes through this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace callerspace
