#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace duplexweave {

enum class ErrorCode {
    NegativeTime,
    OutOfRange,
    InvalidInput,
    EmptyIpuList,
    EmptyStream,
    TextOverflow,
    MalformedSequence,
    LengthMismatch,
    TooFewSamples,
    ClipTooShort,
    SchemaError,
    IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace duplexweave
