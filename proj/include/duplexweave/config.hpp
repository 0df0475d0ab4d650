#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "duplexweave/metrics.hpp"
#include "duplexweave/segmenter.hpp"
#include "duplexweave/sequence.hpp"
#include "duplexweave/transcript.hpp"

namespace duplexweave {

struct MetricsConfig {
    double eval_tau_ipu = kEvalTauIpu;
    OverallMode overall = OverallMode::StatisticMean;
};

struct WindowConfig {
    double prompt_len = kPromptSeconds;
    double total_len = kClipSeconds;
};

struct PipelineConfig {
    SegmenterConfig segmenter;
    BuilderConfig builder;
    FrameRate frame_rate = kDefaultFrameRate;
    MetricsConfig metrics;
    WindowConfig window;
    std::optional<std::filesystem::path> tokenizer_table;
    std::size_t workers = 0;  // 0: OpenMP default
    std::uint64_t seed = 0;

    void validate() const;
};

// Config file schema (every key optional, unknown keys rejected):
// {
//   "segmenter": {"tau_ipu", "tau_tol", "punctuation": [str], "end_shift": "minus"|"plus"},
//   "builder": {"strategy", "chunk_size", "text_chunk_size", "text_channels", "loss_weights": "T:S",
//               "speech_vocab_size", "text_vocab_base", "text_vocab_size",
//               "special_ids": {"uid","aid","eot","text_pad","end_of_text_pad"}, "tokenizer_table"},
//   "frame_rate_hz", "metrics": {"eval_tau_ipu", "overall": "statistic-mean"|"cell-mean"},
//   "window": {"prompt_len", "total_len"}, "workers", "seed"
// }
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

// "2:1" -> {2.0, 1.0}
std::pair<double, double> parse_loss_weights(std::string_view text);

} // namespace duplexweave
