// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gsdanchor {

/// Machine-readable error categories surfaced by the tool API.
enum class ErrorCode
{
    invalid_argument,
    degenerate_input,
    schema,
    io,
    internal
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::degenerate_input: return "degenerate_input";
        case ErrorCode::schema: return "schema_error";
        case ErrorCode::io: return "io_error";
        case ErrorCode::internal: return "internal_error";
    }
    return "internal_error";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(message), code_(code), field_(std::move(field))
    {}

    ErrorCode code() const noexcept { return code_; }

    /// Offending field path for schema errors, e.g. "detections[2].conf".
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

} // namespace gsdanchor
