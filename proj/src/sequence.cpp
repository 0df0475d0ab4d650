#include "duplexweave/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>

#include "duplexweave/error.hpp"
#include "duplexweave/sequence_io.hpp"

namespace duplexweave {

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::STI: return "sti";
    case Strategy::SCI: return "sci";
    case Strategy::TurnGuide: return "turnguide";
    case Strategy::MoshiTS: return "moshi-ts";
    }
    return "unknown";
}

std::string_view to_string(TextChannels channels) {
    switch (channels) {
    case TextChannels::None: return "none";
    case TextChannels::AssistantOnly: return "assistant";
    case TextChannels::Both: return "both";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "sti") return Strategy::STI;
    if (name == "sci") return Strategy::SCI;
    if (name == "turnguide") return Strategy::TurnGuide;
    if (name == "moshi-ts") return Strategy::MoshiTS;
    throw Error(ErrorCode::SchemaError, "unknown strategy '" + std::string(name) + "'");
}

TextChannels parse_text_channels(std::string_view name) {
    if (name == "none") return TextChannels::None;
    if (name == "assistant") return TextChannels::AssistantOnly;
    if (name == "both") return TextChannels::Both;
    throw Error(ErrorCode::SchemaError, "unknown text channel selection '" + std::string(name) + "'");
}

std::string_view to_string(TokenKind kind) {
    switch (kind) {
    case TokenKind::SpeechUser: return "speech_user";
    case TokenKind::SpeechAssistant: return "speech_assistant";
    case TokenKind::Text: return "text";
    case TokenKind::SpeakerId: return "speaker_id";
    case TokenKind::Eot: return "eot";
    case TokenKind::TextPad: return "text_pad";
    case TokenKind::EndOfTextPad: return "end_of_text_pad";
    }
    return "unknown";
}

void Vocabulary::validate() const {
    if (speech_size == 0) {
        throw Error(ErrorCode::InvalidInput, "speech vocabulary is empty");
    }
    if (static_cast<std::uint64_t>(text_base) + text_size > 0xFFFFFFFFull) {
        throw Error(ErrorCode::InvalidInput, "text vocabulary exceeds 32-bit id space");
    }
    if (text_size > 0 && text_base < speech_size) {
        throw Error(ErrorCode::InvalidInput, "text vocabulary overlaps speech vocabulary");
    }
    const TokenId ids[] = {special.uid, special.aid, special.eot, special.text_pad, special.end_of_text_pad};
    for (std::size_t i = 0; i < 5; ++i) {
        if (is_speech(ids[i]) || is_text(ids[i])) {
            throw Error(ErrorCode::InvalidInput,
                        "special token " + std::to_string(ids[i]) + " lies inside the speech or text range");
        }
        for (std::size_t j = i + 1; j < 5; ++j) {
            if (ids[i] == ids[j]) {
                throw Error(ErrorCode::InvalidInput, "special token ids must be pairwise distinct");
            }
        }
    }
}

void BuilderConfig::validate() const {
    if (tau_sc == 0 || tau_tc == 0) {
        throw Error(ErrorCode::InvalidInput, "chunk sizes must be at least 1");
    }
    if (strategy == Strategy::TurnGuide && tau_tc != tau_sc) {
        throw Error(ErrorCode::InvalidInput, "turnguide requires text chunk size equal to speech chunk size");
    }
    if (!(loss_weight_text > 0.0) || !(loss_weight_speech > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "loss weights must be positive");
    }
    vocab.validate();
}

Rational make_rational(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw Error(ErrorCode::InvalidInput, "zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    return {num / (g == 0 ? 1 : g), den / (g == 0 ? 1 : g)};
}

Rational NominalSpan::duration() const {
    // Common denominators are produced by chunk_span, but stay general.
    return make_rational(end.num * start.den - start.num * end.den, start.den * end.den);
}

NominalSpan chunk_span(std::size_t index, std::size_t tau_sc, FrameRate fr) {
    const auto frames = static_cast<std::int64_t>(tau_sc);
    const auto i = static_cast<std::int64_t>(index);
    return {make_rational(i * frames * 1000, fr), make_rational((i + 1) * frames * 1000, fr)};
}

FrameRange frames_in(const TimeInterval& window, FrameRate fr) {
    const double hz = frame_rate_hz(fr);
    const auto first = static_cast<std::size_t>(std::ceil(window.start * hz - kTimeEpsilon * hz));
    const auto last = static_cast<std::size_t>(std::ceil(window.end * hz - kTimeEpsilon * hz));
    return {first, std::max(first, last)};
}

std::size_t common_chunked_length(const TokenStream& user, const TokenStream& assistant, std::size_t tau_sc) {
    if (tau_sc == 0) {
        throw Error(ErrorCode::InvalidInput, "chunk size must be at least 1");
    }
    const std::size_t shortest = std::min(user.tokens.size(), assistant.tokens.size());
    return tau_sc * (shortest / tau_sc);
}

std::vector<std::span<const TokenId>> chunk_tokens(const TokenStream& stream, std::size_t tau_sc,
                                                   std::size_t common_length) {
    if (tau_sc == 0) {
        throw Error(ErrorCode::InvalidInput, "chunk size must be at least 1");
    }
    if (common_length == 0) {
        throw Error(ErrorCode::EmptyStream, "no complete chunk available");
    }
    if (common_length > stream.tokens.size() || common_length % tau_sc != 0) {
        throw Error(ErrorCode::InvalidInput, "common length is not a chunk multiple within the stream");
    }
    std::vector<std::span<const TokenId>> chunks;
    const std::span<const TokenId> all(stream.tokens);
    for (std::size_t i = 0; i * tau_sc < common_length; ++i) {
        chunks.push_back(all.subspan(i * tau_sc, tau_sc));
    }
    return chunks;
}

namespace {

// floor(x * scale / divisor) evaluated on the exact product, so a time just
// below a frame or chunk boundary never rounds up into the next one.
std::size_t exact_floor_scaled(double x, double scale, double divisor) {
    const double p = x * scale;
    const double err = std::fma(x, scale, -p);  // x * scale == p + err exactly
    auto k = static_cast<std::int64_t>(std::floor(p / divisor));
    const double base = static_cast<double>(k) * divisor;
    if ((p - base) + err < 0.0) {
        --k;
    } else if ((p - (base + divisor)) + err >= 0.0) {
        ++k;
    }
    return static_cast<std::size_t>(std::max<std::int64_t>(k, 0));
}

} // namespace

std::size_t compute_text_start_chunk(double turn_start, double fr_hz, std::size_t tau_sc) {
    if (turn_start < 0.0) {
        throw Error(ErrorCode::NegativeTime, "turn start must be non-negative");
    }
    // Times within kTimeEpsilon below a boundary count as on it, so a decimal
    // timestamp such as 1.2 s lands where its decimal value says.
    return exact_floor_scaled(turn_start + kTimeEpsilon, fr_hz, static_cast<double>(tau_sc));
}

namespace {

void check_speech(const TokenStream& stream, std::size_t length, const Vocabulary& vocab) {
    for (std::size_t i = 0; i < length; ++i) {
        if (!vocab.is_speech(stream.tokens[i])) {
            throw Error(ErrorCode::InvalidInput, std::string(to_string(stream.channel)) + " token " +
                                                     std::to_string(i) + " is outside the speech vocabulary");
        }
    }
}

void check_frame_rates(const TokenStream& user, const TokenStream& assistant) {
    if (user.frame_rate != assistant.frame_rate || user.frame_rate == 0) {
        throw Error(ErrorCode::InvalidInput, "channels must share a non-zero frame rate");
    }
}

InterleavedSequence empty_sequence(Strategy strategy, const BuilderConfig& config, FrameRate fr) {
    InterleavedSequence seq;
    seq.strategy = strategy;
    seq.text_channels = config.text_channels;
    seq.tau_sc = static_cast<std::uint32_t>(config.tau_sc);
    seq.tau_tc = static_cast<std::uint32_t>(config.tau_tc);
    seq.frame_rate = fr;
    seq.special = config.vocab.special;
    return seq;
}

TokenKind speech_kind(Channel ch) {
    return ch == Channel::User ? TokenKind::SpeechUser : TokenKind::SpeechAssistant;
}

using TextSchedule = std::vector<std::vector<TokenId>>;

// Places each turn's text chunks from its start chunk onwards, deferring a
// turn whose start chunk is still occupied by the previous turn's text.
TextSchedule place_turn_text(std::span<const TurnTextTokens> turns, std::size_t num_chunks, double fr_hz,
                             const BuilderConfig& config, BuildReport& report) {
    TextSchedule schedule(num_chunks);
    std::size_t next_free = 0;
    for (std::size_t j = 0; j < turns.size(); ++j) {
        const auto& turn = turns[j];
        if (turn.token_ids.empty()) {
            throw Error(ErrorCode::InvalidInput, "turn " + std::to_string(j) + " has no text tokens");
        }
        if (j > 0 && turn.turn_start < turns[j - 1].turn_start) {
            throw Error(ErrorCode::InvalidInput, "turns must be sorted by start time");
        }
        for (TokenId id : turn.token_ids) {
            if (!config.vocab.is_text(id)) {
                throw Error(ErrorCode::InvalidInput,
                            "turn " + std::to_string(j) + " token " + std::to_string(id) + " is not a text token");
            }
        }
        std::vector<TokenId> text = turn.token_ids;
        text.push_back(config.vocab.special.eot);

        const std::size_t k_start = compute_text_start_chunk(turn.turn_start, fr_hz, config.tau_sc);
        std::size_t chunk = k_start;
        if (next_free > k_start) {
            chunk = next_free;
            ++report.collisions;
        }
        const std::size_t num_text_chunks = (text.size() + config.tau_tc - 1) / config.tau_tc;
        for (std::size_t m = 0; m < num_text_chunks; ++m, ++chunk) {
            const std::size_t lo = m * config.tau_tc;
            const std::size_t hi = std::min(text.size(), lo + config.tau_tc);
            if (chunk >= num_chunks) {
                ++report.overflow_turns;
                report.dropped_text_tokens += text.size() - lo;
                break;
            }
            schedule[chunk].assign(text.begin() + static_cast<std::ptrdiff_t>(lo),
                                   text.begin() + static_cast<std::ptrdiff_t>(hi));
        }
        next_free = chunk;
    }
    return schedule;
}

BuildResult build_chunked(const TokenStream& user, const TokenStream& assistant,
                          std::span<const TurnTextTokens> user_turns, std::span<const TurnTextTokens> assistant_turns,
                          Strategy strategy, const BuilderConfig& config) {
    config.validate();
    check_frame_rates(user, assistant);
    const std::size_t tau = config.tau_sc;
    const std::size_t length = common_chunked_length(user, assistant, tau);
    const auto user_chunks = chunk_tokens(user, tau, length);
    const auto asst_chunks = chunk_tokens(assistant, tau, length);
    check_speech(user, length, config.vocab);
    check_speech(assistant, length, config.vocab);

    BuildResult result;
    result.sequence = empty_sequence(strategy, config, user.frame_rate);
    if (strategy == Strategy::SCI) {
        result.sequence.text_channels = TextChannels::None;
    }
    const std::size_t num_chunks = user_chunks.size();
    result.report.chunks = num_chunks;

    const double fr_hz = frame_rate_hz(user.frame_rate);
    TextSchedule user_text(num_chunks);
    TextSchedule asst_text(num_chunks);
    if (strategy == Strategy::TurnGuide) {
        if (config.text_channels == TextChannels::Both) {
            user_text = place_turn_text(user_turns, num_chunks, fr_hz, config, result.report);
        }
        if (config.text_channels != TextChannels::None) {
            asst_text = place_turn_text(assistant_turns, num_chunks, fr_hz, config, result.report);
        }
    }

    const auto& special = config.vocab.special;
    auto& out = result.sequence.tokens;
    out.reserve(2 * num_chunks * (tau + 1) + 2 * num_chunks);
    auto emit_channel = [&](Channel ch, std::uint32_t index, const std::vector<TokenId>& text,
                            std::span<const TokenId> speech) {
        for (TokenId id : text) {
            out.push_back({id, id == special.eot ? TokenKind::Eot : TokenKind::Text, index, 1.0f, ch});
        }
        out.push_back({ch == Channel::User ? special.uid : special.aid, TokenKind::SpeakerId, index, 1.0f, ch});
        for (TokenId id : speech) {
            out.push_back({id, speech_kind(ch), index, 1.0f, ch});
        }
    };
    for (std::size_t i = 0; i < num_chunks; ++i) {
        const auto index = static_cast<std::uint32_t>(i);
        emit_channel(Channel::User, index, user_text[i], user_chunks[i]);
        emit_channel(Channel::Assistant, index, asst_text[i], asst_chunks[i]);
    }
    result.sequence = assign_loss_weights(std::move(result.sequence), config);
    return result;
}

} // namespace

BuildResult build_sti(const TokenStream& user, const TokenStream& assistant, const BuilderConfig& config) {
    config.vocab.validate();
    check_frame_rates(user, assistant);
    const std::size_t length = std::min(user.tokens.size(), assistant.tokens.size());
    if (length == 0) {
        throw Error(ErrorCode::EmptyStream, "no tokens to interleave");
    }
    check_speech(user, length, config.vocab);
    check_speech(assistant, length, config.vocab);

    BuildResult result;
    result.sequence = empty_sequence(Strategy::STI, config, user.frame_rate);
    result.sequence.text_channels = TextChannels::None;
    result.sequence.tau_sc = 1;
    result.report.chunks = length;
    auto& out = result.sequence.tokens;
    out.reserve(2 * length);
    for (std::size_t t = 0; t < length; ++t) {
        const auto index = static_cast<std::uint32_t>(t);
        out.push_back({user.tokens[t], TokenKind::SpeechUser, index, 1.0f, Channel::User});
        out.push_back({assistant.tokens[t], TokenKind::SpeechAssistant, index, 1.0f, Channel::Assistant});
    }
    result.sequence = assign_loss_weights(std::move(result.sequence), config);
    return result;
}

BuildResult build_sci(const TokenStream& user, const TokenStream& assistant, const BuilderConfig& config) {
    return build_chunked(user, assistant, {}, {}, Strategy::SCI, config);
}

BuildResult build_turnguide(const TokenStream& user, const TokenStream& assistant,
                            std::span<const TurnTextTokens> user_turns,
                            std::span<const TurnTextTokens> assistant_turns, const BuilderConfig& config) {
    return build_chunked(user, assistant, user_turns, assistant_turns, Strategy::TurnGuide, config);
}

BuildResult build_moshi_ts(const TokenStream& user, const TokenStream& assistant,
                           std::span<const TimedWordTokens> assistant_words, const BuilderConfig& config) {
    config.vocab.validate();
    check_frame_rates(user, assistant);
    const std::size_t length = std::min(user.tokens.size(), assistant.tokens.size());
    if (length == 0) {
        throw Error(ErrorCode::EmptyStream, "no tokens to interleave");
    }
    check_speech(user, length, config.vocab);
    check_speech(assistant, length, config.vocab);
    const double fr_hz = frame_rate_hz(user.frame_rate);
    for (std::size_t w = 0; w < assistant_words.size(); ++w) {
        if (assistant_words[w].start < 0.0) {
            throw Error(ErrorCode::NegativeTime, "word " + std::to_string(w) + " starts before 0");
        }
        if (w > 0 && assistant_words[w].start < assistant_words[w - 1].start) {
            throw Error(ErrorCode::InvalidInput, "words must be sorted by start time");
        }
        for (TokenId id : assistant_words[w].token_ids) {
            if (!config.vocab.is_text(id)) {
                throw Error(ErrorCode::InvalidInput, "word " + std::to_string(w) + " has a non-text token");
            }
        }
    }

    // Real text tokens per step: a word becomes available at the step its
    // start time falls in, and colliding words queue behind each other.
    std::vector<std::optional<TokenId>> slots(length);
    std::deque<TokenId> queue;
    std::size_t next_word = 0;
    for (std::size_t t = 0; t < length; ++t) {
        while (next_word < assistant_words.size() &&
               exact_floor_scaled(assistant_words[next_word].start + kTimeEpsilon, fr_hz, 1.0) <= t) {
            const auto& ids = assistant_words[next_word].token_ids;
            queue.insert(queue.end(), ids.begin(), ids.end());
            ++next_word;
        }
        if (!queue.empty()) {
            slots[t] = queue.front();
            queue.pop_front();
        }
    }

    BuildResult result;
    result.sequence = empty_sequence(Strategy::MoshiTS, config, user.frame_rate);
    result.sequence.tau_sc = 1;
    result.sequence.tau_tc = 1;
    result.report.chunks = length;
    result.report.dropped_text_tokens = queue.size();
    for (std::size_t w = next_word; w < assistant_words.size(); ++w) {
        result.report.dropped_text_tokens += assistant_words[w].token_ids.size();
    }
    if (result.report.dropped_text_tokens > 0) {
        result.report.overflow_turns = 1;
    }

    const auto& special = config.vocab.special;
    auto& out = result.sequence.tokens;
    out.reserve(3 * length);
    for (std::size_t t = 0; t < length; ++t) {
        const auto index = static_cast<std::uint32_t>(t);
        out.push_back({user.tokens[t], TokenKind::SpeechUser, index, 1.0f, Channel::User});
        if (slots[t]) {
            out.push_back({*slots[t], TokenKind::Text, index, 1.0f, Channel::Assistant});
        } else if (t + 1 < length && slots[t + 1]) {
            out.push_back({special.end_of_text_pad, TokenKind::EndOfTextPad, index, 1.0f, Channel::Assistant});
        } else {
            out.push_back({special.text_pad, TokenKind::TextPad, index, 1.0f, Channel::Assistant});
        }
        out.push_back({assistant.tokens[t], TokenKind::SpeechAssistant, index, 1.0f, Channel::Assistant});
    }
    result.sequence = assign_loss_weights(std::move(result.sequence), config);
    return result;
}

InterleavedSequence assign_loss_weights(InterleavedSequence seq, const BuilderConfig& config) {
    const bool conditional = seq.text_channels == TextChannels::AssistantOnly;
    const auto text_weight = static_cast<float>(config.loss_weight_text);
    const auto speech_weight = static_cast<float>(config.loss_weight_speech);
    for (auto& tok : seq.tokens) {
        if (conditional && tok.channel == Channel::User) {
            tok.loss_weight = 0.0f;
        } else if (tok.kind == TokenKind::Text || tok.kind == TokenKind::Eot) {
            tok.loss_weight = text_weight;
        } else {
            tok.loss_weight = speech_weight;
        }
    }
    return seq;
}

namespace {

class SequenceParser {
public:
    explicit SequenceParser(const InterleavedSequence& seq) : seq_(seq) {}

    [[noreturn]] void fail(const std::string& what) const {
        const std::size_t index = std::min(pos_, seq_.tokens.size());
        throw Error(ErrorCode::MalformedSequence, what + " at token " + std::to_string(index) + " (byte offset " +
                                                      std::to_string(encoded_token_offset(seq_, index)) + ")");
    }

    bool done() const { return pos_ >= seq_.tokens.size(); }

    const InterleavedToken& expect(TokenKind kind, std::uint32_t chunk) {
        if (done()) {
            fail("sequence ends early, expected " + std::string(to_string(kind)));
        }
        const auto& tok = seq_.tokens[pos_];
        if (tok.kind != kind) {
            fail("expected " + std::string(to_string(kind)) + ", found " + std::string(to_string(tok.kind)));
        }
        if (tok.chunk_index != chunk) {
            fail("chunk index " + std::to_string(tok.chunk_index) + " where " + std::to_string(chunk) + " expected");
        }
        ++pos_;
        return tok;
    }

    bool peek_text() const {
        return !done() && (seq_.tokens[pos_].kind == TokenKind::Text || seq_.tokens[pos_].kind == TokenKind::Eot);
    }

    const InterleavedToken& take(std::uint32_t chunk) {
        const auto& tok = seq_.tokens[pos_];
        if (tok.chunk_index != chunk) {
            fail("chunk index " + std::to_string(tok.chunk_index) + " where " + std::to_string(chunk) + " expected");
        }
        ++pos_;
        return tok;
    }

    const InterleavedToken& current() const { return seq_.tokens[pos_]; }

private:
    const InterleavedSequence& seq_;
    std::size_t pos_ = 0;
};

struct TurnCollector {
    std::vector<std::vector<TokenId>> turns;
    std::vector<TokenId> open;

    void add(const InterleavedToken& tok) {
        if (tok.kind == TokenKind::Eot) {
            turns.push_back(std::move(open));
            open.clear();
        } else {
            open.push_back(tok.id);
        }
    }

    std::vector<std::vector<TokenId>> finish() {
        if (!open.empty()) {
            turns.push_back(std::move(open));
        }
        return std::move(turns);
    }
};

} // namespace

void validate_sequence(const InterleavedSequence& seq) {
    (void)deinterleave(seq);
}

Deinterleaved deinterleave(const InterleavedSequence& seq) {
    Deinterleaved out;
    out.user.channel = Channel::User;
    out.assistant.channel = Channel::Assistant;
    out.user.frame_rate = seq.frame_rate;
    out.assistant.frame_rate = seq.frame_rate;
    SequenceParser parser(seq);

    switch (seq.strategy) {
    case Strategy::STI: {
        for (std::uint32_t t = 0; !parser.done(); ++t) {
            out.user.tokens.push_back(parser.expect(TokenKind::SpeechUser, t).id);
            out.assistant.tokens.push_back(parser.expect(TokenKind::SpeechAssistant, t).id);
        }
        break;
    }
    case Strategy::SCI:
    case Strategy::TurnGuide: {
        if (seq.tau_sc == 0) {
            parser.fail("chunk size 0");
        }
        const bool guided = seq.strategy == Strategy::TurnGuide;
        const bool user_text = guided && seq.text_channels == TextChannels::Both;
        const bool asst_text = guided && seq.text_channels != TextChannels::None;
        TurnCollector user_turns;
        TurnCollector asst_turns;
        for (std::uint32_t chunk = 0; !parser.done(); ++chunk) {
            for (Channel ch : {Channel::User, Channel::Assistant}) {
                const bool allowed = ch == Channel::User ? user_text : asst_text;
                auto& collector = ch == Channel::User ? user_turns : asst_turns;
                std::size_t text_tokens = 0;
                while (parser.peek_text()) {
                    if (!allowed) {
                        parser.fail("text token on a channel without text guidance");
                    }
                    if (++text_tokens > seq.tau_tc) {
                        parser.fail("text chunk longer than " + std::to_string(seq.tau_tc));
                    }
                    const auto& tok = parser.take(chunk);
                    if ((tok.kind == TokenKind::Eot) != (tok.id == seq.special.eot)) {
                        parser.fail("end-of-text id mismatch");
                    }
                    collector.add(tok);
                }
                const TokenId speaker = ch == Channel::User ? seq.special.uid : seq.special.aid;
                if (!parser.done() && parser.current().kind == TokenKind::SpeakerId &&
                    parser.current().id != speaker) {
                    parser.fail("speaker id does not match channel");
                }
                parser.expect(TokenKind::SpeakerId, chunk);
                auto& stream = ch == Channel::User ? out.user : out.assistant;
                for (std::uint32_t k = 0; k < seq.tau_sc; ++k) {
                    stream.tokens.push_back(parser.expect(speech_kind(ch), chunk).id);
                }
            }
        }
        out.user_turn_texts = user_turns.finish();
        out.assistant_turn_texts = asst_turns.finish();
        break;
    }
    case Strategy::MoshiTS: {
        for (std::uint32_t t = 0; !parser.done(); ++t) {
            out.user.tokens.push_back(parser.expect(TokenKind::SpeechUser, t).id);
            if (parser.done()) {
                parser.fail("sequence ends early, expected text slot");
            }
            const auto& slot = parser.current();
            if (slot.kind == TokenKind::Text) {
                out.aligned_text.push_back(parser.take(t).id);
            } else if (slot.kind == TokenKind::TextPad && slot.id == seq.special.text_pad) {
                parser.take(t);
            } else if (slot.kind == TokenKind::EndOfTextPad && slot.id == seq.special.end_of_text_pad) {
                parser.take(t);
            } else {
                parser.fail("invalid text slot");
            }
            out.assistant.tokens.push_back(parser.expect(TokenKind::SpeechAssistant, t).id);
        }
        break;
    }
    }
    return out;
}

} // namespace duplexweave
