#include "duplexweave/io.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "duplexweave/error.hpp"
#include "duplexweave/sequence_io.hpp"

namespace duplexweave {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void schema_fail(const fs::path& path, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line) + ": " + what);
}

double number_field(const nlohmann::json& j, const char* key, const fs::path& path, std::size_t line) {
    if (!j.is_object() || !j.contains(key)) {
        schema_fail(path, line, std::string("missing field '") + key + "'");
    }
    const auto& v = j.at(key);
    if (!v.is_number()) {
        schema_fail(path, line, std::string("field '") + key + "' must be a number");
    }
    return v.get<double>();
}

std::string string_field(const nlohmann::json& j, const char* key, const fs::path& path, std::size_t line) {
    if (!j.is_object() || !j.contains(key)) {
        schema_fail(path, line, std::string("missing field '") + key + "'");
    }
    const auto& v = j.at(key);
    if (!v.is_string()) {
        schema_fail(path, line, std::string("field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

void check_span(double start, double end, const fs::path& path, std::size_t line) {
    if (start < 0.0) {
        schema_fail(path, line, "negative start time");
    }
    if (end < start) {
        schema_fail(path, line, "end precedes start");
    }
}

} // namespace

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::IoError, "short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot move " + tmp.string() + " into place");
    }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void for_each_jsonl(const fs::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            schema_fail(path, number, std::string("invalid JSON: ") + e.what());
        }
        try {
            fn(j, number);
        } catch (const nlohmann::json::exception& e) {
            schema_fail(path, number, e.what());
        }
    }
}

std::vector<TimeInterval> read_vad_jsonl(const fs::path& path) {
    std::vector<TimeInterval> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        const double start = number_field(j, "start", path, line);
        const double end = number_field(j, "end", path, line);
        check_span(start, end, path, line);
        out.push_back({start, end});
    });
    return out;
}

std::vector<WordSpan> read_words_jsonl(const fs::path& path) {
    std::vector<WordSpan> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        WordSpan w;
        w.text = trim(string_field(j, "word", path, line));
        w.start = number_field(j, "start", path, line);
        w.end = number_field(j, "end", path, line);
        if (w.text.empty()) {
            schema_fail(path, line, "empty word");
        }
        check_span(w.start, w.end, path, line);
        if (!out.empty() && w.start < out.back().start) {
            schema_fail(path, line, "words not sorted by start time");
        }
        out.push_back(std::move(w));
    });
    return out;
}

std::vector<SentenceRecord> read_sentences_jsonl(const fs::path& path, Channel channel) {
    std::vector<SentenceRecord> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        SentenceRecord s;
        s.channel = channel;
        s.start = number_field(j, "start", path, line);
        s.end = number_field(j, "end", path, line);
        s.text = trim(string_field(j, "text", path, line));
        if (s.text.empty()) {
            schema_fail(path, line, "empty sentence");
        }
        check_span(s.start, s.end, path, line);
        if (!out.empty() && s.start < out.back().start) {
            schema_fail(path, line, "sentences not sorted by start time");
        }
        out.push_back(std::move(s));
    });
    return out;
}

TokenStream read_token_stream(const fs::path& path, Channel channel, FrameRate default_rate) {
    const auto bytes = read_bytes(path);
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, kTokenMagic)) {
        try {
            return decode_token_stream(bytes, channel);
        } catch (const Error& e) {
            throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
        }
    }
    TokenStream stream;
    stream.channel = channel;
    stream.frame_rate = default_rate;
    try {
        const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
        const nlohmann::json* ids = &j;
        if (j.is_object()) {
            if (j.contains("frame_rate_hz")) {
                const double hz = j.at("frame_rate_hz").get<double>();
                if (!(hz > 0.0)) {
                    throw Error(ErrorCode::SchemaError, path.string() + ": frame rate must be positive");
                }
                stream.frame_rate = static_cast<FrameRate>(std::llround(hz * 1000.0));
            }
            ids = &j.at("tokens");
        }
        if (!ids->is_array()) {
            throw Error(ErrorCode::SchemaError, path.string() + ": expected an array of token ids");
        }
        stream.tokens.reserve(ids->size());
        for (const auto& v : *ids) {
            if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
                throw Error(ErrorCode::SchemaError,
                            path.string() + ": token " + std::to_string(stream.tokens.size()) +
                                " is not a non-negative 32-bit integer");
            }
            stream.tokens.push_back(v.get<TokenId>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    return stream;
}

std::string to_jsonl(std::span<const nlohmann::ordered_json> records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json turn_to_json(const DialogueTurn& turn, std::size_t index) {
    nlohmann::ordered_json j;
    j["turn"] = index;
    j["ipu"] = turn.source_ipu_index;
    j["start"] = turn.speech_span.start;
    j["end"] = turn.speech_span.end;
    j["text"] = turn.text();
    auto words = nlohmann::ordered_json::array();
    for (const auto& w : turn.text_words) {
        words.push_back({{"word", w.text}, {"start", w.start}, {"end", w.end}});
    }
    j["words"] = std::move(words);
    return j;
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "validation") return Split::Validation;
    if (name == "test") return Split::Test;
    throw Error(ErrorCode::SchemaError, "unknown split '" + std::string(name) + "'");
}

namespace {

ChannelFiles read_channel_files(const nlohmann::json& j, const fs::path& base, const fs::path& manifest,
                                std::size_t line) {
    ChannelFiles files;
    if (!j.is_object()) {
        schema_fail(manifest, line, "channel entry must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "duration") {
            if (!value.is_number()) schema_fail(manifest, line, "channel duration must be a number");
            files.duration = value.get<double>();
            continue;
        }
        std::optional<fs::path>* slot = nullptr;
        if (key == "vad") slot = &files.vad;
        else if (key == "words") slot = &files.words;
        else if (key == "tokens") slot = &files.tokens;
        else if (key == "sentences") slot = &files.sentences;
        else schema_fail(manifest, line, "unknown channel field '" + key + "'");
        if (!value.is_string()) {
            schema_fail(manifest, line, "field '" + key + "' must be a path string");
        }
        fs::path p = value.get<std::string>();
        if (p.is_relative()) {
            p = base / p;
        }
        if (!fs::exists(p)) {
            schema_fail(manifest, line, "referenced file does not exist: " + p.string());
        }
        *slot = p;
    }
    return files;
}

nlohmann::ordered_json channel_files_json(const ChannelFiles& files, const fs::path& base) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    auto rel = [&](const fs::path& p) { return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string(); };
    if (files.vad) j["vad"] = rel(*files.vad);
    if (files.words) j["words"] = rel(*files.words);
    if (files.tokens) j["tokens"] = rel(*files.tokens);
    if (files.sentences) j["sentences"] = rel(*files.sentences);
    if (files.duration) j["duration"] = *files.duration;
    return j;
}

} // namespace

std::vector<DialogueEntry> read_manifest(const fs::path& path) {
    const fs::path base = path.parent_path();
    std::vector<DialogueEntry> entries;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        if (!j.is_object()) {
            schema_fail(path, line, "manifest entry must be an object");
        }
        DialogueEntry e;
        for (const auto& [key, value] : j.items()) {
            if (key != "id" && key != "duration" && key != "split" && key != "part" && key != "user" &&
                key != "assistant") {
                schema_fail(path, line, "unknown manifest field '" + key + "'");
            }
        }
        e.id = string_field(j, "id", path, line);
        if (e.id.empty() || e.id.find_first_of("/\\") != std::string::npos) {
            schema_fail(path, line, "dialogue id must be a non-empty file-name-safe string");
        }
        e.duration = number_field(j, "duration", path, line);
        if (!(e.duration > 0.0)) {
            schema_fail(path, line, "duration must be positive");
        }
        if (j.contains("split")) {
            e.split = parse_split(string_field(j, "split", path, line));
        }
        if (j.contains("part")) {
            if (!j.at("part").is_number_integer()) schema_fail(path, line, "part must be an integer");
            e.part = j.at("part").get<int>();
        }
        if (j.contains("user")) e.user = read_channel_files(j.at("user"), base, path, line);
        if (j.contains("assistant")) e.assistant = read_channel_files(j.at("assistant"), base, path, line);
        const double du = e.user.duration.value_or(e.duration);
        const double da = e.assistant.duration.value_or(e.duration);
        if (std::abs(du - da) > kChannelDurationTolerance) {
            schema_fail(path, line, "channel durations differ by more than 0.5 s");
        }
        for (const auto& other : entries) {
            if (other.id == e.id) {
                schema_fail(path, line, "duplicate dialogue id '" + e.id + "'");
            }
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

std::string manifest_to_jsonl(std::span<const DialogueEntry> entries, const fs::path& base_dir) {
    std::string out;
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["duration"] = e.duration;
        if (e.split) j["split"] = to_string(*e.split);
        if (e.part) j["part"] = *e.part;
        j["user"] = channel_files_json(e.user, base_dir);
        j["assistant"] = channel_files_json(e.assistant, base_dir);
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace duplexweave
