#include "duplexweave/error.hpp"

namespace duplexweave {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::EmptyIpuList: return "EmptyIpuList";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::TextOverflow: return "TextOverflow";
    case ErrorCode::MalformedSequence: return "MalformedSequence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace duplexweave
