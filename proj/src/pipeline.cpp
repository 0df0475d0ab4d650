#include "duplexweave/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "duplexweave/batch.hpp"
#include "duplexweave/error.hpp"
#include "duplexweave/sequence_io.hpp"

namespace duplexweave {

namespace {

constexpr Channel kChannels[] = {Channel::User, Channel::Assistant};

std::string channel_slug(Channel ch) {
    return ch == Channel::User ? "user" : "assistant";
}

double channel_duration(const DialogueEntry& entry, Channel ch) {
    return entry.files(ch).duration.value_or(entry.duration);
}

ChannelTimeline load_timeline(const DialogueEntry& entry, Channel ch) {
    const auto& files = entry.files(ch);
    const double duration = channel_duration(entry, ch);
    if (!files.vad) {
        return ChannelTimeline{ch, duration, {}};
    }
    const auto raw = read_vad_jsonl(*files.vad);
    try {
        return make_timeline(ch, raw, duration);
    } catch (const Error& e) {
        throw Error(e.code(), files.vad->string() + ": " + e.what());
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

} // namespace

std::vector<DialogueTurn> segment_channel(const DialogueEntry& entry, Channel channel, const SegmenterConfig& config) {
    const auto& files = entry.files(channel);
    if (!files.words) {
        return {};
    }
    const auto words = read_words_jsonl(*files.words);
    const auto timeline = load_timeline(entry, channel);
    if (timeline.segments.empty()) {
        if (!words.empty()) {
            spdlog::warn("{}: {} channel has {} words but no speech activity; no turns emitted", entry.id,
                         channel_slug(channel), words.size());
        }
        return {};
    }
    return segment_dialogue(timeline, words, config);
}

SegmentSummary cmd_segment(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                           const fs::path& out_dir) {
    config.validate();
    std::vector<std::size_t> turn_counts(entries.size(), 0);
    detail::parallel_for(entries.size(), config.workers, [&](std::size_t i) {
        const auto& entry = entries[i];
        for (Channel ch : kChannels) {
            const auto& files = entry.files(ch);
            if (!files.vad || !files.words) {
                continue;
            }
            const auto turns = segment_channel(entry, ch, config.segmenter);
            std::vector<nlohmann::ordered_json> records;
            records.reserve(turns.size());
            for (std::size_t t = 0; t < turns.size(); ++t) {
                records.push_back(turn_to_json(turns[t], t));
            }
            write_file_atomic(out_dir / (entry.id + "." + channel_slug(ch) + ".turns.jsonl"), to_jsonl(records));
            turn_counts[i] += turns.size();
        }
    });
    SegmentSummary summary;
    summary.dialogues = entries.size();
    summary.turns = std::accumulate(turn_counts.begin(), turn_counts.end(), std::size_t{0});
    return summary;
}

std::unique_ptr<TextTokenizer> make_tokenizer(const PipelineConfig& config) {
    if (config.tokenizer_table) {
        return std::make_unique<TableTokenizer>(TableTokenizer::load(*config.tokenizer_table,
                                                                     config.builder.vocab.text_base));
    }
    if (config.builder.vocab.text_size < 256) {
        throw Error(ErrorCode::InvalidInput, "byte tokenizer needs a text vocabulary of at least 256 ids");
    }
    return std::make_unique<ByteTokenizer>(config.builder.vocab.text_base);
}

namespace {

std::vector<TurnTextTokens> tokenize_turns(const std::vector<DialogueTurn>& turns, const TextTokenizer& tokenizer) {
    std::vector<TurnTextTokens> out;
    out.reserve(turns.size());
    for (std::size_t j = 0; j < turns.size(); ++j) {
        std::vector<std::string> words;
        for (const auto& w : turns[j].text_words) {
            words.push_back(w.text);
        }
        out.push_back({j, tokenizer.encode_words(words), turns[j].turn_start});
    }
    return out;
}

BuildJob load_build_job(const DialogueEntry& entry, const PipelineConfig& config, const TextTokenizer& tokenizer,
                        std::size_t& turn_count) {
    BuildJob job;
    for (Channel ch : kChannels) {
        const auto& files = entry.files(ch);
        if (!files.tokens) {
            throw Error(ErrorCode::SchemaError, entry.id + ": " + channel_slug(ch) + " channel has no token file");
        }
        auto& stream = ch == Channel::User ? job.user : job.assistant;
        stream = read_token_stream(*files.tokens, ch, config.frame_rate);
    }
    const double du = static_cast<double>(job.user.tokens.size()) / frame_rate_hz(job.user.frame_rate);
    const double da = static_cast<double>(job.assistant.tokens.size()) / frame_rate_hz(job.assistant.frame_rate);
    if (std::abs(du - da) > kChannelDurationTolerance) {
        throw Error(ErrorCode::SchemaError,
                    entry.id + ": token streams differ in duration by more than 0.5 s");
    }

    const auto& b = config.builder;
    if (b.strategy == Strategy::TurnGuide) {
        auto guided = [&](Channel ch) {
            return ch == Channel::Assistant ? b.text_channels != TextChannels::None
                                            : b.text_channels == TextChannels::Both;
        };
        for (Channel ch : kChannels) {
            if (!guided(ch)) {
                continue;
            }
            const auto& files = entry.files(ch);
            if (!files.vad || !files.words) {
                throw Error(ErrorCode::SchemaError,
                            entry.id + ": text guidance on " + channel_slug(ch) + " needs VAD and words files");
            }
            const auto turns = tokenize_turns(segment_channel(entry, ch, config.segmenter), tokenizer);
            turn_count += turns.size();
            (ch == Channel::User ? job.user_turns : job.assistant_turns) = turns;
        }
    } else if (b.strategy == Strategy::MoshiTS) {
        const auto& files = entry.assistant;
        if (!files.words) {
            throw Error(ErrorCode::SchemaError, entry.id + ": token-level alignment needs assistant words");
        }
        for (const auto& w : read_words_jsonl(*files.words)) {
            job.assistant_words.push_back({w.start, tokenizer.encode_word(w.text)});
        }
        turn_count = job.assistant_words.size();
    }
    return job;
}

} // namespace

nlohmann::ordered_json BuildSummary::to_json(const BuilderConfig& config) const {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(config.strategy);
    j["text_channels"] = to_string(config.text_channels);
    j["chunk_size"] = config.tau_sc;
    j["text_chunk_size"] = config.tau_tc;
    j["loss_weight_text"] = config.loss_weight_text;
    j["loss_weight_speech"] = config.loss_weight_speech;
    BuildReport totals;
    std::size_t tokens = 0;
    auto list = nlohmann::ordered_json::array();
    for (const auto& d : dialogues) {
        list.push_back({{"id", d.id},
                        {"tokens", d.tokens},
                        {"chunks", d.report.chunks},
                        {"turns", d.turns},
                        {"collisions", d.report.collisions},
                        {"overflow_turns", d.report.overflow_turns},
                        {"dropped_text_tokens", d.report.dropped_text_tokens}});
        tokens += d.tokens;
        totals.chunks += d.report.chunks;
        totals.collisions += d.report.collisions;
        totals.overflow_turns += d.report.overflow_turns;
        totals.dropped_text_tokens += d.report.dropped_text_tokens;
    }
    j["dialogues"] = std::move(list);
    j["totals"] = {{"dialogues", dialogues.size()},
                   {"tokens", tokens},
                   {"chunks", totals.chunks},
                   {"collisions", totals.collisions},
                   {"overflow_turns", totals.overflow_turns},
                   {"dropped_text_tokens", totals.dropped_text_tokens}};
    return j;
}

BuildSummary cmd_build(std::span<const DialogueEntry> entries, const PipelineConfig& config, const fs::path& out_dir,
                       SequenceFormat format) {
    config.validate();
    const auto tokenizer = make_tokenizer(config);
    std::vector<BuildJob> jobs(entries.size());
    std::vector<std::size_t> turn_counts(entries.size(), 0);
    detail::parallel_for(entries.size(), config.workers, [&](std::size_t i) {
        try {
            jobs[i] = load_build_job(entries[i], config, *tokenizer, turn_counts[i]);
        } catch (const Error& e) {
            throw Error(e.code(), entries[i].id + ": " + e.what());
        }
    });

    auto results = batch_build(jobs, config.builder, config.workers);

    BuildSummary summary;
    summary.dialogues.resize(entries.size());
    const std::string suffix = "." + std::string(to_string(config.builder.strategy)) + ".seq";
    detail::parallel_for(entries.size(), config.workers, [&](std::size_t i) {
        auto& seq = results[i].sequence;
        seq.provenance = entries[i].id;
        const fs::path stem = out_dir / (entries[i].id + suffix);
        if (format != SequenceFormat::Json) {
            write_file_atomic(fs::path(stem.string() + ".bin"), encode_sequence_binary(seq));
        }
        if (format != SequenceFormat::Binary) {
            write_file_atomic(fs::path(stem.string() + ".json"), sequence_to_json(seq).dump() + "\n");
        }
        if (results[i].report.collisions > 0 || results[i].report.dropped_text_tokens > 0) {
            spdlog::warn("{}: {} deferred turns, {} dropped text tokens", entries[i].id,
                         results[i].report.collisions, results[i].report.dropped_text_tokens);
        }
        summary.dialogues[i] = {entries[i].id, seq.tokens.size(), turn_counts[i], results[i].report};
    });
    write_file_atomic(out_dir / "build_report.json", summary.to_json(config.builder).dump(2) + "\n");
    return summary;
}

nlohmann::ordered_json report_to_json(const CorrelationReport& report, const std::string& label) {
    nlohmann::ordered_json j;
    j["label"] = label;
    j["dialogues"] = report.dialogues;
    j["overall_mode"] = report.mode == OverallMode::StatisticMean ? "statistic-mean" : "cell-mean";
    for (Statistic stat : kStatistics) {
        nlohmann::ordered_json row;
        for (EventKind kind : kEventKinds) {
            row[std::string(to_string(kind))] = optional_json(report.cell(stat, kind));
        }
        row["average"] = optional_json(report.statistic_average[static_cast<std::size_t>(stat)]);
        j[std::string(to_string(stat))] = std::move(row);
    }
    j["overall"] = optional_json(report.overall);
    j["undefined_cells"] = report.undefined_cells;
    return j;
}

std::string report_to_csv(const CorrelationReport& report, const std::string& label) {
    auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string("undefined"); };
    std::string out = "label,statistic,event,pearson_r\n";
    for (Statistic stat : kStatistics) {
        for (EventKind kind : kEventKinds) {
            out += label + "," + std::string(to_string(stat)) + "," + std::string(to_string(kind)) + "," +
                   cell(report.cell(stat, kind)) + "\n";
        }
        out += label + "," + std::string(to_string(stat)) + ",average," +
               cell(report.statistic_average[static_cast<std::size_t>(stat)]) + "\n";
    }
    out += label + ",overall,all," + cell(report.overall) + "\n";
    return out;
}

CorrelationReport cmd_metrics(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                              const fs::path& out_dir, const std::string& label) {
    config.validate();
    if (entries.size() < 2) {
        throw Error(ErrorCode::TooFewSamples,
                    "metrics need at least 2 dialogues, manifest has " + std::to_string(entries.size()));
    }
    std::vector<DialogueTimelines> timelines(entries.size());
    detail::parallel_for(entries.size(), config.workers, [&](std::size_t i) {
        const auto& e = entries[i];
        if (!e.user.vad || !e.assistant.vad) {
            throw Error(ErrorCode::SchemaError, e.id + ": metrics need VAD files on both channels");
        }
        (void)window_clip(e.duration, config.window.prompt_len, config.window.total_len);
        timelines[i] = {load_timeline(e, Channel::User), load_timeline(e, Channel::Assistant)};
    });
    const auto windows = window_clip(config.window.total_len, config.window.prompt_len, config.window.total_len);
    const auto stats = batch_event_stats(timelines, windows, config.metrics.eval_tau_ipu, config.workers);
    const auto report = correlate_corpus(stats, config.metrics.overall);

    std::string per_dialogue = "id,window,event,occurrence,cumulative_duration,averaged_duration\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (int w = 0; w < 2; ++w) {
            const auto& s = w == 0 ? stats[i].first : stats[i].second;
            for (EventKind kind : kEventKinds) {
                per_dialogue += entries[i].id + (w == 0 ? ",prompt," : ",continuation,") +
                                std::string(to_string(kind)) + "," + std::to_string(s[kind].occurrence) + "," +
                                fmt_fixed(s[kind].cumulative_duration) + "," + fmt_fixed(s[kind].averaged_duration) +
                                "\n";
            }
        }
    }
    write_file_atomic(out_dir / "report.json", report_to_json(report, label).dump(2) + "\n");
    write_file_atomic(out_dir / "report.csv", report_to_csv(report, label));
    write_file_atomic(out_dir / "dialogue_stats.csv", per_dialogue);
    return report;
}

std::size_t cmd_transcript(std::span<const DialogueEntry> entries, const PipelineConfig& config,
                           const fs::path& out_dir, TranscriptWindow window, const std::set<Channel>& channels,
                           std::optional<ScoringSetting> setting) {
    config.validate();
    detail::parallel_for(entries.size(), config.workers, [&](std::size_t i) {
        const auto& e = entries[i];
        std::vector<SentenceRecord> user;
        std::vector<SentenceRecord> assistant;
        if (e.user.sentences) user = read_sentences_jsonl(*e.user.sentences, Channel::User);
        if (e.assistant.sentences) assistant = read_sentences_jsonl(*e.assistant.sentences, Channel::Assistant);
        if (!e.user.sentences && !e.assistant.sentences) {
            throw Error(ErrorCode::SchemaError, e.id + ": no sentence files");
        }
        TimeInterval span{0.0, std::numeric_limits<double>::infinity()};
        if (window != TranscriptWindow::All) {
            const auto clip = window_clip(e.duration, config.window.prompt_len, config.window.total_len);
            span = window == TranscriptWindow::Prompt ? clip.prompt : clip.continuation;
        }
        const auto transcript = filter_transcript(order_transcript(user, assistant), span, channels);
        const std::string text = transcript.render();
        write_file_atomic(out_dir / (e.id + ".transcript.txt"), text);
        if (setting) {
            std::string prompt(scoring_prompt(*setting));
            prompt += "\n";
            prompt += text;
            write_file_atomic(out_dir / (e.id + ".prompt.txt"), prompt);
        }
    });
    return entries.size();
}

Split split_for_part(int part, const SplitBoundaries& b) {
    if (part < 0 || part > b.test_last) {
        throw Error(ErrorCode::OutOfRange, "part " + std::to_string(part) + " outside 0.." + std::to_string(b.test_last));
    }
    if (part <= b.train_last) return Split::Train;
    if (part <= b.validation_last) return Split::Validation;
    return Split::Test;
}

std::vector<SplitAssignment> split_by_parts(std::span<const PartId> ids, const SplitBoundaries& boundaries) {
    if (ids.empty()) {
        throw Error(ErrorCode::InvalidInput, "empty id list");
    }
    if (!(boundaries.train_last < boundaries.validation_last && boundaries.validation_last < boundaries.test_last)) {
        throw Error(ErrorCode::InvalidInput, "split boundaries must be increasing");
    }
    std::vector<SplitAssignment> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        out.push_back({id.id, id.part, split_for_part(id.part, boundaries)});
    }
    return out;
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) {
        throw Error(ErrorCode::InvalidInput, "empty draw range");
    }
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) {
            return r % bound;
        }
    }
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded_draw(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

} // namespace

std::vector<SplitAssignment> split_by_ratios(std::span<const PartId> ids, const std::array<double, 3>& ratios,
                                             std::uint64_t seed) {
    if (ids.empty()) {
        throw Error(ErrorCode::InvalidInput, "empty id list");
    }
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (!(ratios[0] >= 0.0 && ratios[1] >= 0.0 && ratios[2] >= 0.0 && sum > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "split ratios must be non-negative with a positive sum");
    }
    const auto n = ids.size();
    const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] / sum * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] / sum * static_cast<double>(n)));
    const auto order = shuffled_indices(n, seed);
    std::vector<SplitAssignment> out(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const auto& id = ids[order[rank]];
        const Split split = rank < n_train ? Split::Train : rank < n_train + n_val ? Split::Validation : Split::Test;
        out[order[rank]] = {id.id, id.part, split};
    }
    return out;
}

std::vector<std::string> sample_ids(std::span<const std::string> ids, std::size_t count, std::uint64_t seed) {
    if (ids.empty()) {
        throw Error(ErrorCode::InvalidInput, "empty id list");
    }
    count = std::min(count, ids.size());
    std::vector<std::size_t> idx(ids.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded_draw(rng, ids.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    out.reserve(count);
    for (auto i : idx) {
        out.push_back(ids[i]);
    }
    return out;
}

std::vector<PartId> parse_id_list(const std::string& text) {
    std::vector<PartId> out;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream fields(line);
        std::string id;
        std::string part;
        if (!(fields >> id)) {
            continue;
        }
        fields >> part;
        const std::string& digits = part.empty() ? id : part;
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) ||
            digits.size() > 9) {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(number) + ": cannot determine part of '" +
                                                    id + "'");
        }
        out.push_back({id, std::stoi(digits)});
    }
    return out;
}

} // namespace duplexweave
