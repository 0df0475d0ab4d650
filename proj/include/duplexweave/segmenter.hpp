#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "duplexweave/timeline.hpp"

namespace duplexweave {

// Inter-pausal unit: a run of activity segments separated by short pauses.
struct Ipu {
    TimeInterval span;
    SegmentList members;
};

// Sign applied to the tolerance on the upper bound of the word window.
// `Minus` shifts both bounds earlier (the printed form of the rule);
// `Plus` widens the upper bound instead.
enum class EndShift { Minus, Plus };

struct SegmenterConfig {
    double tau_ipu = 0.5;
    double tau_tol = 0.6;
    std::vector<std::string> punctuation{",", ".", "?", "!"};
    EndShift end_shift = EndShift::Minus;

    void validate() const;
};

struct DialogueTurn {
    std::vector<WordSpan> text_words;
    TimeInterval speech_span;
    double turn_start = 0.0;
    std::size_t source_ipu_index = 0;

    // Words joined by single spaces.
    std::string text() const;
};

// Greedy left-to-right grouping; a segment joins the running IPU iff its gap
// to the previous segment is strictly below `tau_ipu`.
std::vector<Ipu> merge_ipus(std::span<const TimeInterval> segments, double tau_ipu);
std::vector<Ipu> merge_ipus(std::span<const TimeInterval> segments, const SegmenterConfig& config);

// Window of start times accepted by an IPU after the tolerance shift.
TimeInterval word_window(const Ipu& ipu, const SegmenterConfig& config);

// Assigns every word to exactly one IPU. Words outside every shifted window go
// to the IPU with the nearest window boundary (earliest IPU on ties).
std::vector<std::vector<WordSpan>> assign_words(std::span<const WordSpan> words, std::span<const Ipu> ipus,
                                                const SegmenterConfig& config);

bool ends_with_punctuation(const std::string& word, const SegmenterConfig& config);

std::vector<DialogueTurn> split_turns(std::span<const WordSpan> word_group, std::size_t source_ipu_index,
                                      const SegmenterConfig& config);

std::vector<DialogueTurn> segment_dialogue(const ChannelTimeline& timeline, std::span<const WordSpan> words,
                                           const SegmenterConfig& config);

// Throws InvalidInput on empty text, start > end, negative time or unsorted
// start times.
void validate_words(std::span<const WordSpan> words);

} // namespace duplexweave
