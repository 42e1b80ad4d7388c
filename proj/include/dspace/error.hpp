#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dspace {

enum class ErrorCode {
    KindMismatch,
    SchemaMismatch,
    UnknownPid,
    UnknownField,
    UntagMissing,
    MissingTag,
    JoinColumnMissing,
    CollisionAfterRename,
    FnNotTotal,
    ForbiddenFieldWrite,
    DomainPredUnsound,
    UnknownGroup,
    MissingInput,
    TypeError,
    ParseError,
    InvalidArgument,
    Overflow,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code. Configuration and
/// wiring problems throw; bad data rows never do.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message)
        , code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace dspace
