#pragma once

// Corpus-level kernels. Each dialogue is an independent work item; the
// `_serial` variants are the reference the OpenMP versions are tested and
// benchmarked against. Results are always returned in input order, and the
// first failing item (lowest index) determines the rethrown error.

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "duplexweave/metrics.hpp"
#include "duplexweave/segmenter.hpp"
#include "duplexweave/sequence.hpp"
#include "duplexweave/transcript.hpp"

namespace duplexweave {

struct SegmentJob {
    ChannelTimeline timeline;
    std::vector<WordSpan> words;
};

struct DialogueTimelines {
    ChannelTimeline user;
    ChannelTimeline assistant;
};

struct BuildJob {
    TokenStream user;
    TokenStream assistant;
    std::vector<TurnTextTokens> user_turns;
    std::vector<TurnTextTokens> assistant_turns;
    std::vector<TimedWordTokens> assistant_words;
};

using PromptContinuationStats = std::pair<EventStats, EventStats>;

// Number of threads actually used for `workers` (0 = OpenMP default).
std::size_t effective_workers(std::size_t workers);

std::vector<std::vector<DialogueTurn>> batch_segment(std::span<const SegmentJob> jobs, const SegmenterConfig& config,
                                                     std::size_t workers = 0);
std::vector<std::vector<DialogueTurn>> batch_segment_serial(std::span<const SegmentJob> jobs,
                                                            const SegmenterConfig& config);

std::vector<PromptContinuationStats> batch_event_stats(std::span<const DialogueTimelines> dialogues,
                                                       const ClipWindows& windows, double tau_ipu_eval,
                                                       std::size_t workers = 0);
std::vector<PromptContinuationStats> batch_event_stats_serial(std::span<const DialogueTimelines> dialogues,
                                                              const ClipWindows& windows, double tau_ipu_eval);

// Dispatches on config.strategy.
BuildResult build_one(const BuildJob& job, const BuilderConfig& config);

std::vector<BuildResult> batch_build(std::span<const BuildJob> jobs, const BuilderConfig& config,
                                     std::size_t workers = 0);
std::vector<BuildResult> batch_build_serial(std::span<const BuildJob> jobs, const BuilderConfig& config);

namespace detail {

// Runs fn(i) for i in [0, n) on an OpenMP team; rethrows the exception of the
// lowest failing index after the loop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace detail

} // namespace duplexweave
