#include "duplexweave/sequence_io.hpp"

#include <bit>
#include <cstring>

#include "duplexweave/error.hpp"

namespace duplexweave {

namespace {

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, const char* what) : data_(data), what_(what) {}

    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw Error(ErrorCode::MalformedSequence, std::string(what_) + " truncated at byte offset " +
                                                          std::to_string(pos_));
        }
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::span<const std::uint8_t> data_;
    const char* what_;
    std::size_t pos_ = 0;
};

TokenKind kind_from_byte(std::uint8_t v, std::size_t offset) {
    if (v > static_cast<std::uint8_t>(TokenKind::EndOfTextPad)) {
        throw Error(ErrorCode::MalformedSequence,
                    "unknown token kind " + std::to_string(v) + " at byte offset " + std::to_string(offset));
    }
    return static_cast<TokenKind>(v);
}

Strategy strategy_from_byte(std::uint8_t v) {
    if (v > static_cast<std::uint8_t>(Strategy::MoshiTS)) {
        throw Error(ErrorCode::MalformedSequence, "unknown strategy " + std::to_string(v));
    }
    return static_cast<Strategy>(v);
}

TextChannels text_channels_from_byte(std::uint8_t v) {
    if (v > static_cast<std::uint8_t>(TextChannels::Both)) {
        throw Error(ErrorCode::MalformedSequence, "unknown text channel selection " + std::to_string(v));
    }
    return static_cast<TextChannels>(v);
}

} // namespace

std::size_t encoded_header_size(const InterleavedSequence& seq) {
    return 4 + 2 + 1 + 1 + 4 + 4 + 4 + 5 * 4 + 4 + seq.provenance.size() + 8;
}

std::size_t encoded_token_offset(const InterleavedSequence& seq, std::size_t index) {
    return encoded_header_size(seq) + index * kSequenceRecordSize;
}

std::vector<std::uint8_t> encode_sequence_binary(const InterleavedSequence& seq) {
    ByteWriter w;
    w.bytes(kSequenceMagic, 4);
    w.u16(kSequenceVersion);
    w.u8(static_cast<std::uint8_t>(seq.strategy));
    w.u8(static_cast<std::uint8_t>(seq.text_channels));
    w.u32(seq.tau_sc);
    w.u32(seq.tau_tc);
    w.u32(seq.frame_rate);
    w.u32(seq.special.uid);
    w.u32(seq.special.aid);
    w.u32(seq.special.eot);
    w.u32(seq.special.text_pad);
    w.u32(seq.special.end_of_text_pad);
    w.u32(static_cast<std::uint32_t>(seq.provenance.size()));
    w.bytes(seq.provenance.data(), seq.provenance.size());
    w.u64(seq.tokens.size());
    for (const auto& tok : seq.tokens) {
        w.u32(tok.id);
        w.u8(static_cast<std::uint8_t>(tok.kind));
        w.f32(tok.loss_weight);
    }
    return w.take();
}

InterleavedSequence decode_sequence_binary(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "sequence");
    if (r.str(4) != std::string(kSequenceMagic, 4)) {
        throw Error(ErrorCode::MalformedSequence, "bad magic at byte offset 0");
    }
    if (const auto version = r.u16(); version != kSequenceVersion) {
        throw Error(ErrorCode::MalformedSequence, "unsupported version " + std::to_string(version));
    }
    InterleavedSequence seq;
    seq.strategy = strategy_from_byte(r.u8());
    seq.text_channels = text_channels_from_byte(r.u8());
    seq.tau_sc = r.u32();
    seq.tau_tc = r.u32();
    seq.frame_rate = r.u32();
    seq.special.uid = r.u32();
    seq.special.aid = r.u32();
    seq.special.eot = r.u32();
    seq.special.text_pad = r.u32();
    seq.special.end_of_text_pad = r.u32();
    seq.provenance = r.str(r.u32());
    const std::uint64_t count = r.u64();
    if (count > r.remaining() / kSequenceRecordSize || r.remaining() != count * kSequenceRecordSize) {
        throw Error(ErrorCode::MalformedSequence,
                    "token count " + std::to_string(count) + " does not match payload at byte offset " +
                        std::to_string(r.pos()));
    }
    seq.tokens.resize(count);
    for (auto& tok : seq.tokens) {
        tok.id = r.u32();
        tok.kind = kind_from_byte(r.u8(), r.pos() - 1);
        tok.loss_weight = r.f32();
    }
    annotate_structure(seq);
    validate_sequence(seq);
    return seq;
}

nlohmann::ordered_json sequence_to_json(const InterleavedSequence& seq) {
    nlohmann::ordered_json j;
    j["format"] = "duplexweave.sequence";
    j["version"] = kSequenceVersion;
    j["strategy"] = to_string(seq.strategy);
    j["text_channels"] = to_string(seq.text_channels);
    j["chunk_size"] = seq.tau_sc;
    j["text_chunk_size"] = seq.tau_tc;
    j["frame_rate_mhz"] = seq.frame_rate;
    j["special_ids"] = {{"uid", seq.special.uid},
                        {"aid", seq.special.aid},
                        {"eot", seq.special.eot},
                        {"text_pad", seq.special.text_pad},
                        {"end_of_text_pad", seq.special.end_of_text_pad}};
    j["provenance"] = seq.provenance;
    auto ids = nlohmann::ordered_json::array();
    auto kinds = nlohmann::ordered_json::array();
    auto weights = nlohmann::ordered_json::array();
    for (const auto& tok : seq.tokens) {
        ids.push_back(tok.id);
        kinds.push_back(static_cast<int>(tok.kind));
        weights.push_back(tok.loss_weight);
    }
    j["ids"] = std::move(ids);
    j["kinds"] = std::move(kinds);
    j["weights"] = std::move(weights);
    return j;
}

InterleavedSequence sequence_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "duplexweave.sequence") {
            throw Error(ErrorCode::SchemaError, "not a duplexweave sequence document");
        }
        if (j.at("version").get<int>() != kSequenceVersion) {
            throw Error(ErrorCode::SchemaError, "unsupported sequence version");
        }
        InterleavedSequence seq;
        seq.strategy = parse_strategy(j.at("strategy").get<std::string>());
        seq.text_channels = parse_text_channels(j.at("text_channels").get<std::string>());
        seq.tau_sc = j.at("chunk_size").get<std::uint32_t>();
        seq.tau_tc = j.at("text_chunk_size").get<std::uint32_t>();
        seq.frame_rate = j.at("frame_rate_mhz").get<std::uint32_t>();
        const auto& sp = j.at("special_ids");
        seq.special = {sp.at("uid").get<TokenId>(), sp.at("aid").get<TokenId>(), sp.at("eot").get<TokenId>(),
                       sp.at("text_pad").get<TokenId>(), sp.at("end_of_text_pad").get<TokenId>()};
        seq.provenance = j.at("provenance").get<std::string>();
        const auto& ids = j.at("ids");
        const auto& kinds = j.at("kinds");
        const auto& weights = j.at("weights");
        if (ids.size() != kinds.size() || ids.size() != weights.size()) {
            throw Error(ErrorCode::MalformedSequence, "ids, kinds and weights differ in length");
        }
        seq.tokens.resize(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            seq.tokens[i].id = ids[i].get<TokenId>();
            const int kind = kinds[i].get<int>();
            if (kind < 0 || kind > static_cast<int>(TokenKind::EndOfTextPad)) {
                throw Error(ErrorCode::MalformedSequence, "unknown token kind at token " + std::to_string(i));
            }
            seq.tokens[i].kind = static_cast<TokenKind>(kind);
            seq.tokens[i].loss_weight = weights[i].get<float>();
        }
        annotate_structure(seq);
        validate_sequence(seq);
        return seq;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
}

void annotate_structure(InterleavedSequence& seq) {
    auto& toks = seq.tokens;
    const std::uint32_t tau = seq.strategy == Strategy::SCI || seq.strategy == Strategy::TurnGuide
                                  ? std::max<std::uint32_t>(seq.tau_sc, 1)
                                  : 1;
    std::uint32_t assistant_speech = 0;
    for (auto& tok : toks) {
        tok.chunk_index = assistant_speech / tau;
        if (tok.kind == TokenKind::SpeechAssistant) {
            ++assistant_speech;
        }
    }
    // Text belongs to the channel of the next speaker-id (chunked strategies)
    // or to the assistant (token-level alignment).
    Channel upcoming = Channel::Assistant;
    for (std::size_t i = toks.size(); i-- > 0;) {
        auto& tok = toks[i];
        switch (tok.kind) {
        case TokenKind::SpeechUser: tok.channel = Channel::User; break;
        case TokenKind::SpeechAssistant: tok.channel = Channel::Assistant; break;
        case TokenKind::SpeakerId:
            tok.channel = tok.id == seq.special.uid ? Channel::User : Channel::Assistant;
            upcoming = tok.channel;
            break;
        case TokenKind::Text:
        case TokenKind::Eot:
            tok.channel = seq.strategy == Strategy::MoshiTS ? Channel::Assistant : upcoming;
            break;
        case TokenKind::TextPad:
        case TokenKind::EndOfTextPad: tok.channel = Channel::Assistant; break;
        }
    }
}

std::vector<std::uint8_t> encode_token_stream(const TokenStream& stream) {
    ByteWriter w;
    w.bytes(kTokenMagic, 4);
    w.u32(stream.frame_rate);
    for (TokenId id : stream.tokens) {
        w.u32(id);
    }
    return w.take();
}

TokenStream decode_token_stream(std::span<const std::uint8_t> bytes, Channel channel) {
    ByteReader r(bytes, "token stream");
    if (r.str(4) != std::string(kTokenMagic, 4)) {
        throw Error(ErrorCode::SchemaError, "token stream has bad magic");
    }
    TokenStream stream;
    stream.channel = channel;
    stream.frame_rate = r.u32();
    if (stream.frame_rate == 0) {
        throw Error(ErrorCode::SchemaError, "token stream frame rate is zero");
    }
    if (r.remaining() % 4 != 0) {
        throw Error(ErrorCode::SchemaError, "token stream payload is not a multiple of 4 bytes");
    }
    stream.tokens.reserve(r.remaining() / 4);
    while (r.remaining() > 0) {
        stream.tokens.push_back(r.u32());
    }
    return stream;
}

} // namespace duplexweave
