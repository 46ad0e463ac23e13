#include "focuslab/error.hpp"

namespace focuslab {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::RowNotStochastic: return "RowNotStochastic";
    case ErrorCode::RewardOutOfRange: return "RewardOutOfRange";
    case ErrorCode::BadInitialDist: return "BadInitialDist";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyVector: return "EmptyVector";
    case ErrorCode::NegativeH: return "NegativeH";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NonpositiveArgument: return "NonpositiveArgument";
    case ErrorCode::BOutOfRange: return "BOutOfRange";
    case ErrorCode::BadTreeParams: return "BadTreeParams";
    case ErrorCode::TargetNotLeaf: return "TargetNotLeaf";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OracleMismatch: return "OracleMismatch";
    case ErrorCode::SnapshotsMissing: return "SnapshotsMissing";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::NonpositiveRegret: return "NonpositiveRegret";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace focuslab
