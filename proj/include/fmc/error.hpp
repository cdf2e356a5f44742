#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmc {

enum class ErrorCode {
    Io,              // E_IO
    Parse,           // E_PARSE
    Schema,          // E_SCHEMA
    Config,          // E_CONFIG
    Dim,             // E_DIM
    Empty,           // E_EMPTY
    GroupDegenerate, // E_GROUP_DEGENERATE
    GroupMissing,    // E_GROUP_MISSING
    ZeroVector,      // E_ZERO_VECTOR
    Simplex,         // E_SIMPLEX
    NonFinite,       // E_NONFINITE
    Precondition,    // E_PRECONDITION
};

std::string_view code_name(ErrorCode code);

// Every library failure surfaces as this exception; the CLI prints
// `code_name(code())` as a one-line machine-parseable prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace fmc
