#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duplexweave/timeline.hpp"

namespace duplexweave {

struct SentenceRecord {
    Channel channel = Channel::User;
    double start = 0.0;
    double end = 0.0;
    std::string text;

    friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

struct OrderedTranscript {
    std::vector<SentenceRecord> lines;

    // One line per sentence: "<Speaker>@<start>: <text>", start to 0.01 s.
    std::string render() const;
};

std::string render_line(const SentenceRecord& line);

// Stable merge by start time; a user sentence precedes an assistant sentence
// starting at the same time.
OrderedTranscript order_transcript(std::span<const SentenceRecord> user, std::span<const SentenceRecord> assistant);

struct ClipWindows {
    TimeInterval prompt;
    TimeInterval continuation;
};

inline constexpr double kPromptSeconds = 30.0;
inline constexpr double kClipSeconds = 120.0;

ClipWindows window_clip(double duration, double prompt_len = kPromptSeconds, double total_len = kClipSeconds);

OrderedTranscript filter_transcript(const OrderedTranscript& transcript, const TimeInterval& window,
                                    const std::set<Channel>& channels);

enum class ScoringSetting { Unconditional, Conditional };

// Rubric prompt given to the transcript scorer.
std::string_view scoring_prompt(ScoringSetting setting);

} // namespace duplexweave
