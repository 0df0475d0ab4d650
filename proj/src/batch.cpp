#include "duplexweave/batch.hpp"

#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace duplexweave {

std::size_t effective_workers(std::size_t workers) {
#ifdef _OPENMP
    return workers == 0 ? static_cast<std::size_t>(omp_get_max_threads()) : workers;
#else
    (void)workers;
    return 1;
#endif
}

namespace detail {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
    const int threads = static_cast<int>(effective_workers(workers));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    (void)threads;
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace detail

std::vector<std::vector<DialogueTurn>> batch_segment(std::span<const SegmentJob> jobs, const SegmenterConfig& config,
                                                     std::size_t workers) {
    std::vector<std::vector<DialogueTurn>> out(jobs.size());
    detail::parallel_for(jobs.size(), workers,
                         [&](std::size_t i) { out[i] = segment_dialogue(jobs[i].timeline, jobs[i].words, config); });
    return out;
}

std::vector<std::vector<DialogueTurn>> batch_segment_serial(std::span<const SegmentJob> jobs,
                                                            const SegmenterConfig& config) {
    std::vector<std::vector<DialogueTurn>> out;
    out.reserve(jobs.size());
    for (const auto& job : jobs) {
        out.push_back(segment_dialogue(job.timeline, job.words, config));
    }
    return out;
}

namespace {

PromptContinuationStats stats_for(const DialogueTimelines& d, const ClipWindows& windows, double tau) {
    return {summarize(extract_events(d.user, d.assistant, windows.prompt, tau)),
            summarize(extract_events(d.user, d.assistant, windows.continuation, tau))};
}

} // namespace

std::vector<PromptContinuationStats> batch_event_stats(std::span<const DialogueTimelines> dialogues,
                                                       const ClipWindows& windows, double tau_ipu_eval,
                                                       std::size_t workers) {
    std::vector<PromptContinuationStats> out(dialogues.size());
    detail::parallel_for(dialogues.size(), workers,
                         [&](std::size_t i) { out[i] = stats_for(dialogues[i], windows, tau_ipu_eval); });
    return out;
}

std::vector<PromptContinuationStats> batch_event_stats_serial(std::span<const DialogueTimelines> dialogues,
                                                              const ClipWindows& windows, double tau_ipu_eval) {
    std::vector<PromptContinuationStats> out;
    out.reserve(dialogues.size());
    for (const auto& d : dialogues) {
        out.push_back(stats_for(d, windows, tau_ipu_eval));
    }
    return out;
}

BuildResult build_one(const BuildJob& job, const BuilderConfig& config) {
    switch (config.strategy) {
    case Strategy::STI: return build_sti(job.user, job.assistant, config);
    case Strategy::SCI: return build_sci(job.user, job.assistant, config);
    case Strategy::TurnGuide:
        return build_turnguide(job.user, job.assistant, job.user_turns, job.assistant_turns, config);
    case Strategy::MoshiTS: return build_moshi_ts(job.user, job.assistant, job.assistant_words, config);
    }
    return {};
}

std::vector<BuildResult> batch_build(std::span<const BuildJob> jobs, const BuilderConfig& config,
                                     std::size_t workers) {
    std::vector<BuildResult> out(jobs.size());
    detail::parallel_for(jobs.size(), workers, [&](std::size_t i) { out[i] = build_one(jobs[i], config); });
    return out;
}

std::vector<BuildResult> batch_build_serial(std::span<const BuildJob> jobs, const BuilderConfig& config) {
    std::vector<BuildResult> out;
    out.reserve(jobs.size());
    for (const auto& job : jobs) {
        out.push_back(build_one(job, config));
    }
    return out;
}

} // namespace duplexweave
