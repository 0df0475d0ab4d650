// Serial reference vs OpenMP batch kernels on synthetic dialogues.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "duplexweave/batch.hpp"

using namespace duplexweave;

namespace {

constexpr double kDuration = 120.0;

SegmentList random_segments(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> len(0.2, 3.0), gap(0.05, 2.5);
    SegmentList out;
    double t = gap(rng);
    while (t < kDuration - 3.5) {
        const double e = t + len(rng);
        out.push_back({t, e});
        t = e + gap(rng);
    }
    return out;
}

std::vector<SegmentJob> segment_jobs(std::size_t n) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> step(0.15, 0.6);
    std::vector<SegmentJob> jobs;
    for (std::size_t i = 0; i < n; ++i) {
        SegmentJob job{make_timeline(Channel::Assistant, random_segments(rng), kDuration), {}};
        for (double t = 0.1; t < kDuration - 1.0; t += step(rng)) {
            job.words.push_back({job.words.size() % 9 == 8 ? "so." : "well", t, t + 0.12});
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::vector<DialogueTimelines> timelines(std::size_t n) {
    std::mt19937_64 rng(11);
    std::vector<DialogueTimelines> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({make_timeline(Channel::User, random_segments(rng), kDuration),
                       make_timeline(Channel::Assistant, random_segments(rng), kDuration)});
    }
    return out;
}

std::vector<BuildJob> build_jobs(std::size_t n) {
    std::mt19937_64 rng(13);
    const Vocabulary vocab;
    std::uniform_int_distribution<TokenId> speech(0, vocab.speech_size - 1);
    std::uniform_int_distribution<TokenId> text(vocab.text_base, vocab.text_base + 5000);
    std::uniform_real_distribution<double> gap(0.5, 6.0);
    const auto frames = static_cast<std::size_t>(kDuration * 12.5);
    std::vector<BuildJob> jobs;
    for (std::size_t i = 0; i < n; ++i) {
        BuildJob job;
        job.user = {Channel::User, std::vector<TokenId>(frames)};
        job.assistant = {Channel::Assistant, std::vector<TokenId>(frames)};
        for (auto& t : job.user.tokens) t = speech(rng);
        for (auto& t : job.assistant.tokens) t = speech(rng);
        std::size_t k = 0;
        for (double t = gap(rng); t < kDuration - 2.0; t += gap(rng)) {
            std::vector<TokenId> ids(1 + k % 12);
            for (auto& id : ids) id = text(rng);
            job.assistant_turns.push_back({k++, ids, t});
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

BuilderConfig turnguide() {
    BuilderConfig c;
    c.strategy = Strategy::TurnGuide;
    return c;
}

void BM_segment_serial(benchmark::State& state) {
    const auto jobs = segment_jobs(static_cast<std::size_t>(state.range(0)));
    const SegmenterConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(batch_segment_serial(jobs, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_segment_parallel(benchmark::State& state) {
    const auto jobs = segment_jobs(static_cast<std::size_t>(state.range(0)));
    const SegmenterConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(batch_segment(jobs, cfg, 0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_events_serial(benchmark::State& state) {
    const auto d = timelines(static_cast<std::size_t>(state.range(0)));
    const auto w = window_clip(kDuration);
    for (auto _ : state) benchmark::DoNotOptimize(batch_event_stats_serial(d, w, kEvalTauIpu));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_events_parallel(benchmark::State& state) {
    const auto d = timelines(static_cast<std::size_t>(state.range(0)));
    const auto w = window_clip(kDuration);
    for (auto _ : state) benchmark::DoNotOptimize(batch_event_stats(d, w, kEvalTauIpu, 0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_build_serial(benchmark::State& state) {
    const auto jobs = build_jobs(static_cast<std::size_t>(state.range(0)));
    const auto cfg = turnguide();
    for (auto _ : state) benchmark::DoNotOptimize(batch_build_serial(jobs, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_build_parallel(benchmark::State& state) {
    const auto jobs = build_jobs(static_cast<std::size_t>(state.range(0)));
    const auto cfg = turnguide();
    for (auto _ : state) benchmark::DoNotOptimize(batch_build(jobs, cfg, 0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_segment_serial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_segment_parallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_events_serial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_events_parallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_serial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_parallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
