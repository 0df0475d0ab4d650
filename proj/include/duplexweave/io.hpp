#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "duplexweave/segmenter.hpp"
#include "duplexweave/sequence.hpp"
#include "duplexweave/timeline.hpp"
#include "duplexweave/transcript.hpp"

namespace duplexweave {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_bytes(const fs::path& path);
std::string read_text(const fs::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const fs::path& path, std::string_view text);

// Calls `fn(json, line_number)` for every non-blank line; parse and schema
// errors are reported as "<file>:<line>: ...".
void for_each_jsonl(const fs::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn);

// {"start": s, "end": s}
std::vector<TimeInterval> read_vad_jsonl(const fs::path& path);
// {"word": str, "start": s, "end": s}
std::vector<WordSpan> read_words_jsonl(const fs::path& path);
// {"start": s, "end": s, "text": str}
std::vector<SentenceRecord> read_sentences_jsonl(const fs::path& path, Channel channel);

// Binary "DWTK" file, a JSON array of ids, or {"frame_rate_hz": r, "tokens": [...]}.
TokenStream read_token_stream(const fs::path& path, Channel channel, FrameRate default_rate = kDefaultFrameRate);

std::string to_jsonl(std::span<const nlohmann::ordered_json> records);

nlohmann::ordered_json turn_to_json(const DialogueTurn& turn, std::size_t index);

struct ChannelFiles {
    std::optional<fs::path> vad;
    std::optional<fs::path> words;
    std::optional<fs::path> tokens;
    std::optional<fs::path> sentences;
    std::optional<double> duration;
};

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct DialogueEntry {
    std::string id;
    double duration = 0.0;
    std::optional<Split> split;
    std::optional<int> part;
    ChannelFiles user;
    ChannelFiles assistant;

    const ChannelFiles& files(Channel ch) const { return ch == Channel::User ? user : assistant; }
};

// Tolerance on per-channel durations of one dialogue.
inline constexpr double kChannelDurationTolerance = 0.5;

// JSONL manifest, one dialogue per line:
// {"id", "duration", "split"?, "part"?, "user": {"vad","words","tokens","sentences","duration"?},
//  "assistant": {...}}. Relative paths resolve against the manifest directory.
std::vector<DialogueEntry> read_manifest(const fs::path& path);
std::string manifest_to_jsonl(std::span<const DialogueEntry> entries, const fs::path& base_dir);

} // namespace duplexweave
