// duplexweave command-line front end.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "duplexweave/config.hpp"
#include "duplexweave/error.hpp"
#include "duplexweave/io.hpp"
#include "duplexweave/pipeline.hpp"

namespace dw = duplexweave;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::string> strategy;
    std::optional<std::string> text_channels;
    std::optional<double> tau_ipu;
    std::optional<double> tau_tol;
    std::optional<std::size_t> chunk_size;
    std::optional<double> eval_tau_ipu;
    std::optional<double> prompt_len;
    std::optional<double> total_len;
    std::optional<std::string> loss_weights;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("duplexweave");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DUPLEXWEAVE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("unknown DUPLEXWEAVE_LOG level '{}', keeping 'warn'", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

// Flags override the config file, which overrides defaults.
dw::PipelineConfig resolve_config(const CommonFlags& f) {
    dw::PipelineConfig cfg = f.config.empty() ? dw::PipelineConfig{} : dw::load_config(f.config);
    if (f.strategy) cfg.builder.strategy = dw::parse_strategy(*f.strategy);
    if (f.text_channels) cfg.builder.text_channels = dw::parse_text_channels(*f.text_channels);
    if (f.tau_ipu) cfg.segmenter.tau_ipu = *f.tau_ipu;
    if (f.tau_tol) cfg.segmenter.tau_tol = *f.tau_tol;
    if (f.chunk_size) {
        cfg.builder.tau_sc = *f.chunk_size;
        cfg.builder.tau_tc = *f.chunk_size;
    }
    if (f.eval_tau_ipu) cfg.metrics.eval_tau_ipu = *f.eval_tau_ipu;
    if (f.prompt_len) cfg.window.prompt_len = *f.prompt_len;
    if (f.total_len) cfg.window.total_len = *f.total_len;
    if (f.loss_weights) {
        const auto [t, s] = dw::parse_loss_weights(*f.loss_weights);
        cfg.builder.loss_weight_text = t;
        cfg.builder.loss_weight_speech = s;
    }
    if (f.workers) cfg.workers = *f.workers;
    if (f.seed) cfg.seed = *f.seed;
    cfg.validate();
    return cfg;
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> r{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto comma = text.find(',', pos);
        if ((i < 2) == (comma == std::string::npos)) {
            throw dw::Error(dw::ErrorCode::SchemaError, "--ratios expects three comma-separated numbers");
        }
        r[i] = std::stod(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        pos = comma + 1;
    }
    return r;
}

dw::SplitBoundaries parse_boundaries(const std::string& text) {
    dw::SplitBoundaries b;
    const auto comma = text.find(',');
    if (comma == std::string::npos) {
        throw dw::Error(dw::ErrorCode::SchemaError, "--boundaries expects TRAIN_LAST,VAL_LAST[,TEST_LAST]");
    }
    b.train_last = std::stoi(text.substr(0, comma));
    const auto rest = text.substr(comma + 1);
    const auto comma2 = rest.find(',');
    b.validation_last = std::stoi(rest.substr(0, comma2));
    if (comma2 != std::string::npos) {
        b.test_last = std::stoi(rest.substr(comma2 + 1));
    }
    return b;
}

std::string split_outputs(const std::vector<dw::SplitAssignment>& assignments, const dw::fs::path& out_dir) {
    std::string jsonl;
    std::array<std::string, 3> lists;
    std::array<std::size_t, 3> counts{};
    std::array<std::set<int>, 3> parts;
    for (const auto& a : assignments) {
        nlohmann::ordered_json j{{"id", a.id}, {"part", a.part}, {"split", dw::to_string(a.split)}};
        jsonl += j.dump() + "\n";
        const auto s = static_cast<std::size_t>(a.split);
        lists[s] += a.id + "\n";
        ++counts[s];
        parts[s].insert(a.part);
    }
    dw::write_file_atomic(out_dir / "splits.jsonl", jsonl);
    for (auto s : {dw::Split::Train, dw::Split::Validation, dw::Split::Test}) {
        dw::write_file_atomic(out_dir / (std::string(dw::to_string(s)) + ".txt"),
                              lists[static_cast<std::size_t>(s)]);
    }
    return "train " + std::to_string(counts[0]) + " ids / " + std::to_string(parts[0].size()) + " parts, validation " +
           std::to_string(counts[1]) + " ids / " + std::to_string(parts[1].size()) + " parts, test " +
           std::to_string(counts[2]) + " ids / " + std::to_string(parts[2].size()) + " parts";
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"duplexweave: text-guided full-duplex corpus preparation and turn-taking evaluation"};
    app.require_subcommand(1);
    CommonFlags f;
    app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--strategy", f.strategy, "sti, sci, turnguide or moshi-ts")
        ->check(CLI::IsMember({"sti", "sci", "turnguide", "moshi-ts"}));
    app.add_option("--text-channels", f.text_channels, "none, assistant or both")
        ->check(CLI::IsMember({"none", "assistant", "both"}));
    app.add_option("--tau-ipu", f.tau_ipu, "IPU merge threshold for segmentation (s)");
    app.add_option("--tau-tol", f.tau_tol, "word-to-IPU tolerance (s)");
    app.add_option("--chunk-size", f.chunk_size, "speech and text chunk size (tokens)");
    app.add_option("--eval-tau-ipu", f.eval_tau_ipu, "IPU merge threshold for turn-taking metrics (s)");
    app.add_option("--prompt-len", f.prompt_len, "prompt window length (s)");
    app.add_option("--total-len", f.total_len, "clip length (s)");
    app.add_option("--loss-weights", f.loss_weights, "text:speech loss weights, e.g. 2:1");
    app.add_option("--workers", f.workers, "worker threads (0 = all cores)");
    app.add_option("--seed", f.seed, "random seed for sampling and ratio splits");

    std::string manifest;
    std::string out_dir;

    auto* segment = app.add_subcommand("segment", "segment dialogues into aligned text-speech turns");
    segment->fallthrough();
    segment->add_option("--manifest", manifest, "dialogue manifest (JSONL)")->required()->check(CLI::ExistingFile);
    segment->add_option("--out", out_dir, "output directory")->required();

    std::string format = "bin";
    auto* build = app.add_subcommand("build", "build interleaved training sequences");
    build->fallthrough();
    build->add_option("--manifest", manifest, "dialogue manifest (JSONL)")->required()->check(CLI::ExistingFile);
    build->add_option("--out", out_dir, "output directory")->required();
    build->add_option("--format", format, "bin, json or both")->check(CLI::IsMember({"bin", "json", "both"}));

    std::string label;
    auto* metrics = app.add_subcommand("metrics", "turn-taking correlation between prompts and continuations");
    metrics->fallthrough();
    metrics->add_option("--manifest", manifest, "dialogue manifest (JSONL)")->required()->check(CLI::ExistingFile);
    metrics->add_option("--out", out_dir, "output directory")->required();
    metrics->add_option("--label", label, "row label for the report, e.g. 'turnguide T=1.0'");

    std::string window = "all";
    std::string channels = "both";
    std::string prompt;
    auto* transcript = app.add_subcommand("transcript", "ordered dual-channel transcripts for scoring");
    transcript->fallthrough();
    transcript->add_option("--manifest", manifest, "dialogue manifest (JSONL)")->required()->check(CLI::ExistingFile);
    transcript->add_option("--out", out_dir, "output directory")->required();
    transcript->add_option("--window", window, "all, prompt or continuation")
        ->check(CLI::IsMember({"all", "prompt", "continuation"}));
    transcript->add_option("--channels", channels, "both, user or assistant")
        ->check(CLI::IsMember({"both", "user", "assistant"}));
    transcript->add_option("--prompt", prompt, "also emit a scoring prompt: unconditional or conditional")
        ->check(CLI::IsMember({"unconditional", "conditional"}));

    std::string ids_file;
    std::string boundaries;
    std::string ratios;
    std::optional<std::size_t> sample;
    auto* split = app.add_subcommand("split", "assign train/validation/test splits");
    split->fallthrough();
    auto* ids_opt = split->add_option("--ids", ids_file, "id list, one 'id [part]' per line")->check(CLI::ExistingFile);
    auto* manifest_opt =
        split->add_option("--manifest", manifest, "manifest whose entries carry 'part'")->check(CLI::ExistingFile);
    ids_opt->excludes(manifest_opt);
    split->add_option("--out", out_dir, "output directory")->required();
    auto* boundaries_opt = split->add_option("--boundaries", boundaries, "TRAIN_LAST,VAL_LAST[,TEST_LAST] part ids");
    split->add_option("--ratios", ratios, "train,validation,test ratios for a seeded random split")
        ->excludes(boundaries_opt);
    split->add_option("--sample", sample, "sample this many test ids for evaluation");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve_config(f);
        if (segment->parsed()) {
            const auto entries = dw::read_manifest(manifest);
            const auto s = dw::cmd_segment(entries, cfg, out_dir);
            std::cout << "segmented " << s.dialogues << " dialogues into " << s.turns << " turns\n";
        } else if (build->parsed()) {
            const auto entries = dw::read_manifest(manifest);
            const auto fmt = format == "bin"    ? dw::SequenceFormat::Binary
                             : format == "json" ? dw::SequenceFormat::Json
                                                : dw::SequenceFormat::Both;
            const auto s = dw::cmd_build(entries, cfg, out_dir, fmt);
            std::cout << "built " << s.dialogues.size() << " " << dw::to_string(cfg.builder.strategy)
                      << " sequences\n";
        } else if (metrics->parsed()) {
            const auto entries = dw::read_manifest(manifest);
            const auto report = dw::cmd_metrics(entries, cfg, out_dir, label);
            std::cout << "overall correlation: "
                      << (report.overall ? std::to_string(*report.overall) : std::string("undefined")) << " over "
                      << report.dialogues << " dialogues\n";
        } else if (transcript->parsed()) {
            const auto entries = dw::read_manifest(manifest);
            const auto win = window == "all"      ? dw::TranscriptWindow::All
                             : window == "prompt" ? dw::TranscriptWindow::Prompt
                                                  : dw::TranscriptWindow::Continuation;
            std::set<dw::Channel> chans;
            if (channels != "assistant") chans.insert(dw::Channel::User);
            if (channels != "user") chans.insert(dw::Channel::Assistant);
            std::optional<dw::ScoringSetting> setting;
            if (prompt == "unconditional") setting = dw::ScoringSetting::Unconditional;
            if (prompt == "conditional") setting = dw::ScoringSetting::Conditional;
            const auto n = dw::cmd_transcript(entries, cfg, out_dir, win, chans, setting);
            std::cout << "wrote " << n << " transcripts\n";
        } else if (split->parsed()) {
            std::vector<dw::PartId> ids;
            std::vector<dw::DialogueEntry> entries;
            if (!ids_file.empty()) {
                ids = dw::parse_id_list(dw::read_text(ids_file));
            } else if (!manifest.empty()) {
                entries = dw::read_manifest(manifest);
                for (const auto& e : entries) {
                    if (!e.part) {
                        throw dw::Error(dw::ErrorCode::SchemaError, e.id + ": manifest entry has no 'part'");
                    }
                    ids.push_back({e.id, *e.part});
                }
            } else {
                throw dw::Error(dw::ErrorCode::InvalidInput, "split needs --ids or --manifest");
            }
            const auto assignments = ratios.empty()
                                         ? dw::split_by_parts(ids, boundaries.empty() ? dw::SplitBoundaries{}
                                                                                      : parse_boundaries(boundaries))
                                         : dw::split_by_ratios(ids, parse_ratios(ratios), cfg.seed);
            std::cout << split_outputs(assignments, out_dir) << "\n";
            if (!entries.empty()) {
                for (std::size_t i = 0; i < entries.size(); ++i) {
                    entries[i].split = assignments[i].split;
                }
                const dw::fs::path out_manifest = dw::fs::path(out_dir) / "manifest.jsonl";
                dw::write_file_atomic(out_manifest,
                                      dw::manifest_to_jsonl(entries, dw::fs::absolute(out_dir).lexically_normal()));
            }
            if (sample) {
                std::vector<std::string> test_ids;
                for (const auto& a : assignments) {
                    if (a.split == dw::Split::Test) test_ids.push_back(a.id);
                }
                std::string text;
                for (const auto& id : dw::sample_ids(test_ids, *sample, cfg.seed)) {
                    text += id + "\n";
                }
                dw::write_file_atomic(dw::fs::path(out_dir) / "eval_sample.txt", text);
            }
        }
    } catch (const dw::Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
