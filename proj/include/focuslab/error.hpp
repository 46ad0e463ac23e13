#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace focuslab {

/// Every failure the library reports carries one of these codes so callers
/// (and tests) can branch on the kind of rejection instead of the message.
enum class ErrorCode {
    RowNotStochastic,
    RewardOutOfRange,
    BadInitialDist,
    DimensionMismatch,
    LengthMismatch,
    EmptyVector,
    NegativeH,
    NotConverged,
    NonpositiveArgument,
    BOutOfRange,
    BadTreeParams,
    TargetNotLeaf,
    InvalidArgument,
    OracleMismatch,
    SnapshotsMissing,
    EmptyCell,
    NonpositiveRegret,
    ParseError,
    SchemaError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace focuslab
