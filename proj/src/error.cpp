#include "callerspace/error.hpp"

namespace callerspace {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DimensionOrEmpty: return "DimensionOrEmpty";
    case ErrorCode::InvalidStore: return "InvalidStore";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientUnits: return "InsufficientUnits";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::KernelNumericalError: return "KernelNumericalError";
    case ErrorCode::DegenerateBoost: return "DegenerateBoost";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

} // namespace callerspace
