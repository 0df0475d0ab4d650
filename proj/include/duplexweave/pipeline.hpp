#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duplexweave/config.hpp"
#include "duplexweave/io.hpp"
#include "duplexweave/metrics.hpp"
#include "duplexweave/tokenizer.hpp"
#include "duplexweave/transcript.hpp"

namespace duplexweave {

// Turns for one channel of a manifest entry; empty when the channel has no
// words, or no activity to align them with.
std::vector<DialogueTurn> segment_channel(const DialogueEntry& entry, Channel channel, const SegmenterConfig& config);

struct SegmentSummary {
    std::size_t dialogues = 0;
    std::size_t turns = 0;
};

// Writes <out>/<id>.<user|assistant>.turns.jsonl for every channel with VAD and words.
SegmentSummary cmd_segment(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                           const fs::path& out_dir);

enum class SequenceFormat { Binary, Json, Both };

struct DialogueBuildInfo {
    std::string id;
    std::size_t tokens = 0;
    std::size_t turns = 0;
    BuildReport report;
};

struct BuildSummary {
    std::vector<DialogueBuildInfo> dialogues;
    nlohmann::ordered_json to_json(const BuilderConfig& config) const;
};

std::unique_ptr<TextTokenizer> make_tokenizer(const PipelineConfig& config);

// Writes <out>/<id>.<strategy>.seq.{bin,json} and <out>/build_report.json.
BuildSummary cmd_build(std::span<const DialogueEntry> entries, const PipelineConfig& config, const fs::path& out_dir,
                       SequenceFormat format);

nlohmann::ordered_json report_to_json(const CorrelationReport& report, const std::string& label);
std::string report_to_csv(const CorrelationReport& report, const std::string& label);

// Writes <out>/report.json, <out>/report.csv and <out>/dialogue_stats.csv.
CorrelationReport cmd_metrics(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                              const fs::path& out_dir, const std::string& label = {});

enum class TranscriptWindow { All, Prompt, Continuation };

// Writes <out>/<id>.transcript.txt and, with a scoring setting,
// <out>/<id>.prompt.txt holding the rubric followed by the transcript.
std::size_t cmd_transcript(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                           const fs::path& out_dir, TranscriptWindow window, const std::set<Channel>& channels,
                           std::optional<ScoringSetting> setting);

// Last part id of the train and validation ranges; later parts up to
// test_last are test.
struct SplitBoundaries {
    int train_last = 110;
    int validation_last = 113;
    int test_last = 116;
};

struct PartId {
    std::string id;
    int part = 0;
};

struct SplitAssignment {
    std::string id;
    int part = 0;
    Split split = Split::Train;
};

Split split_for_part(int part, const SplitBoundaries& boundaries);
std::vector<SplitAssignment> split_by_parts(std::span<const PartId> ids, const SplitBoundaries& boundaries);

// Seeded shuffle, then consecutive train/validation/test runs sized by ratio.
std::vector<SplitAssignment> split_by_ratios(std::span<const PartId> ids, const std::array<double, 3>& ratios,
                                             std::uint64_t seed);

// Seeded sample of `count` ids without replacement, returned in input order.
std::vector<std::string> sample_ids(std::span<const std::string> ids, std::size_t count, std::uint64_t seed);

// Uniform integer in [0, bound) from a 64-bit Mersenne Twister, by rejection.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

// Lines "id", "id<ws>part"; a bare all-digit id is its own part.
std::vector<PartId> parse_id_list(const std::string& text);

} // namespace duplexweave
