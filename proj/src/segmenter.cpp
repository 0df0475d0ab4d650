#include "duplexweave/segmenter.hpp"

#include <cmath>
#include <limits>

#include "duplexweave/error.hpp"

namespace duplexweave {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim_right(std::string_view s) {
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

bool blank(std::string_view s) {
    for (char c : s) {
        if (!is_space(c)) {
            return false;
        }
    }
    return true;
}

} // namespace

void SegmenterConfig::validate() const {
    if (!(tau_ipu > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "tau_ipu must be positive");
    }
    if (!(tau_tol >= 0.0)) {
        throw Error(ErrorCode::InvalidInput, "tau_tol must be non-negative");
    }
    if (punctuation.empty()) {
        throw Error(ErrorCode::InvalidInput, "punctuation set must be non-empty");
    }
    for (const auto& p : punctuation) {
        if (p.empty()) {
            throw Error(ErrorCode::InvalidInput, "punctuation entries must be non-empty");
        }
    }
}

std::string DialogueTurn::text() const {
    std::string out;
    for (const auto& w : text_words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w.text;
    }
    return out;
}

void validate_words(std::span<const WordSpan> words) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto& w = words[i];
        if (blank(w.text)) {
            throw Error(ErrorCode::InvalidInput, "word " + std::to_string(i) + " has empty text");
        }
        if (w.start < 0.0) {
            throw Error(ErrorCode::NegativeTime, "word " + std::to_string(i) + " starts before 0");
        }
        if (w.end < w.start) {
            throw Error(ErrorCode::InvalidInput, "word " + std::to_string(i) + " ends before it starts");
        }
        if (i > 0 && w.start < words[i - 1].start) {
            throw Error(ErrorCode::InvalidInput, "words not sorted by start at index " + std::to_string(i));
        }
    }
}

std::vector<Ipu> merge_ipus(std::span<const TimeInterval> segments, double tau_ipu) {
    std::vector<Ipu> ipus;
    for (const auto& seg : segments) {
        if (!ipus.empty() && seg.start - ipus.back().span.end < tau_ipu - kTimeEpsilon) {
            ipus.back().span.end = seg.end;
            ipus.back().members.push_back(seg);
        } else {
            ipus.push_back(Ipu{seg, {seg}});
        }
    }
    return ipus;
}

std::vector<Ipu> merge_ipus(std::span<const TimeInterval> segments, const SegmenterConfig& config) {
    return merge_ipus(segments, config.tau_ipu);
}

TimeInterval word_window(const Ipu& ipu, const SegmenterConfig& config) {
    const double hi = config.end_shift == EndShift::Minus ? ipu.span.end - config.tau_tol
                                                          : ipu.span.end + config.tau_tol;
    return {ipu.span.start - config.tau_tol, hi};
}

std::vector<std::vector<WordSpan>> assign_words(std::span<const WordSpan> words, std::span<const Ipu> ipus,
                                                const SegmenterConfig& config) {
    std::vector<std::vector<WordSpan>> groups(ipus.size());
    if (words.empty()) {
        return groups;
    }
    if (ipus.empty()) {
        throw Error(ErrorCode::EmptyIpuList, std::to_string(words.size()) + " words but no IPUs");
    }

    std::vector<TimeInterval> windows;
    windows.reserve(ipus.size());
    for (const auto& ipu : ipus) {
        windows.push_back(word_window(ipu, config));
    }

    for (const auto& word : words) {
        const double t = word.start;
        std::size_t chosen = ipus.size();
        // Closed window on both sides.
        for (std::size_t j = 0; j < windows.size(); ++j) {
            if (windows[j].start - kTimeEpsilon <= t && t <= windows[j].end + kTimeEpsilon) {
                chosen = j;
                break;
            }
        }
        if (chosen == ipus.size()) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < windows.size(); ++j) {
                const double d = std::min(std::abs(t - windows[j].start), std::abs(t - windows[j].end));
                if (d < best - kTimeEpsilon) {
                    best = d;
                    chosen = j;
                }
            }
        }
        groups[chosen].push_back(word);
    }
    return groups;
}

bool ends_with_punctuation(const std::string& word, const SegmenterConfig& config) {
    const std::string_view trimmed = trim_right(word);
    for (const auto& p : config.punctuation) {
        if (trimmed.size() >= p.size() && trimmed.substr(trimmed.size() - p.size()) == p) {
            return true;
        }
    }
    return false;
}

std::vector<DialogueTurn> split_turns(std::span<const WordSpan> word_group, std::size_t source_ipu_index,
                                      const SegmenterConfig& config) {
    std::vector<DialogueTurn> turns;
    std::vector<WordSpan> pending;
    auto flush = [&] {
        if (pending.empty()) {
            return;
        }
        DialogueTurn turn;
        turn.speech_span = {pending.front().start, pending.back().end};
        turn.turn_start = turn.speech_span.start;
        turn.source_ipu_index = source_ipu_index;
        turn.text_words = std::move(pending);
        pending.clear();
        turns.push_back(std::move(turn));
    };
    for (const auto& word : word_group) {
        pending.push_back(word);
        if (ends_with_punctuation(word.text, config)) {
            flush();
        }
    }
    flush();
    return turns;
}

std::vector<DialogueTurn> segment_dialogue(const ChannelTimeline& timeline, std::span<const WordSpan> words,
                                           const SegmenterConfig& config) {
    config.validate();
    validate_words(words);
    if (!is_normalized(timeline.segments)) {
        throw Error(ErrorCode::InvalidInput, "timeline segments are not normalized");
    }
    if (words.empty()) {
        return {};
    }
    const auto ipus = merge_ipus(timeline.segments, config);
    const auto groups = assign_words(words, ipus, config);

    std::vector<DialogueTurn> turns;
    for (std::size_t j = 0; j < groups.size(); ++j) {
        auto split = split_turns(groups[j], j, config);
        for (auto& t : split) {
            turns.push_back(std::move(t));
        }
    }
    return turns;
}

} // namespace duplexweave
