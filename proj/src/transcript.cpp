#include "duplexweave/transcript.hpp"

#include <cstdio>

#include "duplexweave/error.hpp"
#include "prompt_resources.hpp"

namespace duplexweave {

namespace {

void check_sentences(std::span<const SentenceRecord> sentences, Channel channel) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto& s = sentences[i];
        if (s.channel != channel) {
            throw Error(ErrorCode::InvalidInput, "sentence " + std::to_string(i) + " is on the wrong channel");
        }
        if (s.start < 0.0 || s.end < s.start) {
            throw Error(ErrorCode::InvalidInput, "sentence " + std::to_string(i) + " has an invalid time span");
        }
        if (s.text.empty()) {
            throw Error(ErrorCode::InvalidInput, "sentence " + std::to_string(i) + " has empty text");
        }
        if (i > 0 && s.start < sentences[i - 1].start) {
            throw Error(ErrorCode::InvalidInput,
                        std::string(to_string(channel)) + " sentences not sorted at index " + std::to_string(i));
        }
    }
}

} // namespace

std::string render_line(const SentenceRecord& line) {
    char stamp[64];
    std::snprintf(stamp, sizeof(stamp), "%.2f", line.start);
    std::string out(to_string(line.channel));
    out += '@';
    out += stamp;
    out += ": ";
    out += line.text;
    return out;
}

std::string OrderedTranscript::render() const {
    std::string out;
    for (const auto& line : lines) {
        out += render_line(line);
        out += '\n';
    }
    return out;
}

OrderedTranscript order_transcript(std::span<const SentenceRecord> user, std::span<const SentenceRecord> assistant) {
    check_sentences(user, Channel::User);
    check_sentences(assistant, Channel::Assistant);
    OrderedTranscript out;
    out.lines.reserve(user.size() + assistant.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < user.size() || j < assistant.size()) {
        const bool take_user =
            j == assistant.size() || (i < user.size() && user[i].start <= assistant[j].start + kTimeEpsilon);
        out.lines.push_back(take_user ? user[i++] : assistant[j++]);
    }
    return out;
}

ClipWindows window_clip(double duration, double prompt_len, double total_len) {
    if (!(prompt_len > 0.0) || !(total_len > prompt_len)) {
        throw Error(ErrorCode::InvalidInput, "prompt length must be positive and shorter than the clip");
    }
    if (duration < total_len - kTimeEpsilon) {
        throw Error(ErrorCode::ClipTooShort,
                    "duration " + std::to_string(duration) + " s is shorter than " + std::to_string(total_len) + " s");
    }
    return {{0.0, prompt_len}, {prompt_len, total_len}};
}

OrderedTranscript filter_transcript(const OrderedTranscript& transcript, const TimeInterval& window,
                                    const std::set<Channel>& channels) {
    OrderedTranscript out;
    for (const auto& line : transcript.lines) {
        if (window.contains(line.start) && channels.contains(line.channel)) {
            out.lines.push_back(line);
        }
    }
    return out;
}

std::string_view scoring_prompt(ScoringSetting setting) {
    return setting == ScoringSetting::Unconditional ? resources::kUnconditionalPrompt
                                                    : resources::kConditionalPrompt;
}

} // namespace duplexweave
