#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duplexweave/timeline.hpp"

namespace duplexweave {

using TokenId = std::uint32_t;

// Frame rate in millihertz; 12500 is 12.5 Hz.
using FrameRate = std::uint32_t;
inline constexpr FrameRate kDefaultFrameRate = 12500;

inline double frame_rate_hz(FrameRate fr) { return static_cast<double>(fr) / 1000.0; }

struct TokenStream {
    Channel channel = Channel::User;
    std::vector<TokenId> tokens;
    FrameRate frame_rate = kDefaultFrameRate;
};

enum class Strategy : std::uint8_t { STI = 0, SCI = 1, TurnGuide = 2, MoshiTS = 3 };
enum class TextChannels : std::uint8_t { None = 0, AssistantOnly = 1, Both = 2 };

std::string_view to_string(Strategy strategy);
std::string_view to_string(TextChannels channels);
Strategy parse_strategy(std::string_view name);
TextChannels parse_text_channels(std::string_view name);

struct SpecialIds {
    TokenId uid = 0;
    TokenId aid = 0;
    TokenId eot = 0;
    TokenId text_pad = 0;
    TokenId end_of_text_pad = 0;

    friend bool operator==(const SpecialIds&, const SpecialIds&) = default;
};

// Token-ID layout: speech tokens in [0, speech_size), text tokens in
// [text_base, text_base + text_size), special tokens outside both ranges.
struct Vocabulary {
    TokenId speech_size = 16384;
    TokenId text_base = 16384;
    TokenId text_size = 151552;
    SpecialIds special = default_special_ids(16384 + 151552);

    static SpecialIds default_special_ids(TokenId base) {
        return {base, base + 1, base + 2, base + 3, base + 4};
    }

    bool is_speech(TokenId id) const { return id < speech_size; }
    bool is_text(TokenId id) const { return id >= text_base && id - text_base < text_size; }

    void validate() const;

    friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

struct BuilderConfig {
    Strategy strategy = Strategy::TurnGuide;
    std::size_t tau_sc = 5;
    std::size_t tau_tc = 5;
    TextChannels text_channels = TextChannels::AssistantOnly;
    Vocabulary vocab;
    double loss_weight_text = 1.0;
    double loss_weight_speech = 1.0;

    void validate() const;
};

enum class TokenKind : std::uint8_t {
    SpeechUser = 0,
    SpeechAssistant = 1,
    Text = 2,
    SpeakerId = 3,
    Eot = 4,
    TextPad = 5,
    EndOfTextPad = 6,
};

std::string_view to_string(TokenKind kind);

struct InterleavedToken {
    TokenId id = 0;
    TokenKind kind = TokenKind::SpeechUser;
    std::uint32_t chunk_index = 0;
    float loss_weight = 1.0f;
    // Channel the token belongs to; text slots belong to the channel they guide.
    Channel channel = Channel::User;

    friend bool operator==(const InterleavedToken&, const InterleavedToken&) = default;
};

struct InterleavedSequence {
    Strategy strategy = Strategy::SCI;
    TextChannels text_channels = TextChannels::None;
    std::uint32_t tau_sc = 5;
    std::uint32_t tau_tc = 5;
    FrameRate frame_rate = kDefaultFrameRate;
    SpecialIds special;
    std::string provenance;
    std::vector<InterleavedToken> tokens;

    friend bool operator==(const InterleavedSequence&, const InterleavedSequence&) = default;
};

struct TurnTextTokens {
    std::size_t turn_index = 0;
    std::vector<TokenId> token_ids;
    double turn_start = 0.0;
};

// A word of the guided channel with its text tokens, for the token-level
// alignment baseline.
struct TimedWordTokens {
    double start = 0.0;
    std::vector<TokenId> token_ids;
};

struct BuildReport {
    std::size_t chunks = 0;
    std::size_t collisions = 0;      // turns whose text was deferred
    std::size_t overflow_turns = 0;  // turns that lost trailing text
    std::size_t dropped_text_tokens = 0;
};

struct BuildResult {
    InterleavedSequence sequence;
    BuildReport report;
};

// Exact rational number of seconds.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

Rational make_rational(std::int64_t num, std::int64_t den);

// Nominal time covered by speech chunk `index`, as exact rationals.
struct NominalSpan {
    Rational start;
    Rational end;

    Rational duration() const;
};

NominalSpan chunk_span(std::size_t index, std::size_t tau_sc, FrameRate fr);

// Frame index range [first, last) whose nominal start lies in `window`.
struct FrameRange {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t size() const { return last - first; }
};
FrameRange frames_in(const TimeInterval& window, FrameRate fr);

// Both channels share L = tau_sc * floor(min(len_u, len_a) / tau_sc).
std::size_t common_chunked_length(const TokenStream& user, const TokenStream& assistant, std::size_t tau_sc);

std::vector<std::span<const TokenId>> chunk_tokens(const TokenStream& stream, std::size_t tau_sc,
                                                   std::size_t common_length);

std::size_t compute_text_start_chunk(double turn_start, double fr_hz, std::size_t tau_sc);

BuildResult build_sti(const TokenStream& user, const TokenStream& assistant, const BuilderConfig& config);

BuildResult build_sci(const TokenStream& user, const TokenStream& assistant, const BuilderConfig& config);

// `user_turns` is ignored unless text_channels is Both; `assistant_turns` is
// ignored when text_channels is None.
BuildResult build_turnguide(const TokenStream& user, const TokenStream& assistant,
                            std::span<const TurnTextTokens> user_turns,
                            std::span<const TurnTextTokens> assistant_turns, const BuilderConfig& config);

BuildResult build_moshi_ts(const TokenStream& user, const TokenStream& assistant,
                           std::span<const TimedWordTokens> assistant_words, const BuilderConfig& config);

struct Deinterleaved {
    TokenStream user;
    TokenStream assistant;
    // TurnGuide: text token lists per turn, EOT stripped.
    std::vector<std::vector<TokenId>> user_turn_texts;
    std::vector<std::vector<TokenId>> assistant_turn_texts;
    // MoshiTS: real text tokens in slot order, pads stripped.
    std::vector<TokenId> aligned_text;
};

Deinterleaved deinterleave(const InterleavedSequence& seq);

// Checks the strategy grammar; throws MalformedSequence naming the offending
// token index and its byte offset in the binary encoding.
void validate_sequence(const InterleavedSequence& seq);

InterleavedSequence assign_loss_weights(InterleavedSequence seq, const BuilderConfig& config);

} // namespace duplexweave
