#include "duplexweave/config.hpp"

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <string>

#include "duplexweave/error.hpp"
#include "duplexweave/io.hpp"

namespace duplexweave {

namespace {

void only_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
        throw Error(ErrorCode::SchemaError, std::string(where) + " must be an object");
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto key : allowed) {
            known = known || item.key() == key;
        }
        if (!known) {
            throw Error(ErrorCode::SchemaError, "unknown key '" + item.key() + "' in " + std::string(where));
        }
    }
}

template <typename T>
void read_number(const nlohmann::json& j, const char* key, T& out, std::string_view where) {
    if (!j.contains(key)) {
        return;
    }
    const auto& v = j.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
            throw Error(ErrorCode::SchemaError, std::string(where) + "." + key + " must be a non-negative integer");
        }
    } else if (!v.is_number()) {
        throw Error(ErrorCode::SchemaError, std::string(where) + "." + key + " must be a number");
    }
    out = v.get<T>();
}

std::string read_string(const nlohmann::json& j, const char* key, std::string_view where) {
    const auto& v = j.at(key);
    if (!v.is_string()) {
        throw Error(ErrorCode::SchemaError, std::string(where) + "." + key + " must be a string");
    }
    return v.get<std::string>();
}

std::string format_weight(double w) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", w);
    return buf;
}

} // namespace

std::pair<double, double> parse_loss_weights(std::string_view text) {
    const auto colon = text.find(':');
    auto parse = [&](std::string_view part) {
        double v = 0.0;
        const auto* first = part.data();
        const auto* last = part.data() + part.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || !(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorCode::SchemaError, "loss weights must look like T:S with positive numbers, got '" +
                                                    std::string(text) + "'");
        }
        return v;
    };
    if (colon == std::string_view::npos) {
        throw Error(ErrorCode::SchemaError, "loss weights must look like T:S, got '" + std::string(text) + "'");
    }
    return {parse(text.substr(0, colon)), parse(text.substr(colon + 1))};
}

void PipelineConfig::validate() const {
    segmenter.validate();
    builder.validate();
    if (frame_rate == 0) {
        throw Error(ErrorCode::SchemaError, "frame rate must be positive");
    }
    if (!(metrics.eval_tau_ipu > 0.0)) {
        throw Error(ErrorCode::SchemaError, "eval_tau_ipu must be positive");
    }
    if (!(window.prompt_len > 0.0) || !(window.total_len > window.prompt_len)) {
        throw Error(ErrorCode::SchemaError, "window lengths must satisfy 0 < prompt_len < total_len");
    }
}

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    try {
        only_keys(j, "config", {"segmenter", "builder", "frame_rate_hz", "metrics", "window", "workers", "seed"});
        if (j.contains("segmenter")) {
            const auto& s = j.at("segmenter");
            only_keys(s, "segmenter", {"tau_ipu", "tau_tol", "punctuation", "end_shift"});
            read_number(s, "tau_ipu", cfg.segmenter.tau_ipu, "segmenter");
            read_number(s, "tau_tol", cfg.segmenter.tau_tol, "segmenter");
            if (s.contains("punctuation")) {
                cfg.segmenter.punctuation = s.at("punctuation").get<std::vector<std::string>>();
            }
            if (s.contains("end_shift")) {
                const auto v = read_string(s, "end_shift", "segmenter");
                if (v == "minus") cfg.segmenter.end_shift = EndShift::Minus;
                else if (v == "plus") cfg.segmenter.end_shift = EndShift::Plus;
                else throw Error(ErrorCode::SchemaError, "segmenter.end_shift must be 'minus' or 'plus'");
            }
        }
        if (j.contains("builder")) {
            const auto& b = j.at("builder");
            only_keys(b, "builder",
                      {"strategy", "chunk_size", "text_chunk_size", "text_channels", "loss_weights",
                       "speech_vocab_size", "text_vocab_base", "text_vocab_size", "special_ids", "tokenizer_table"});
            if (b.contains("strategy")) cfg.builder.strategy = parse_strategy(read_string(b, "strategy", "builder"));
            read_number(b, "chunk_size", cfg.builder.tau_sc, "builder");
            cfg.builder.tau_tc = cfg.builder.tau_sc;
            read_number(b, "text_chunk_size", cfg.builder.tau_tc, "builder");
            if (b.contains("text_channels")) {
                cfg.builder.text_channels = parse_text_channels(read_string(b, "text_channels", "builder"));
            }
            if (b.contains("loss_weights")) {
                const auto [t, s] = parse_loss_weights(read_string(b, "loss_weights", "builder"));
                cfg.builder.loss_weight_text = t;
                cfg.builder.loss_weight_speech = s;
            }
            auto& v = cfg.builder.vocab;
            read_number(b, "speech_vocab_size", v.speech_size, "builder");
            read_number(b, "text_vocab_base", v.text_base, "builder");
            read_number(b, "text_vocab_size", v.text_size, "builder");
            v.special = Vocabulary::default_special_ids(v.text_base + v.text_size);
            if (b.contains("special_ids")) {
                const auto& sp = b.at("special_ids");
                only_keys(sp, "builder.special_ids", {"uid", "aid", "eot", "text_pad", "end_of_text_pad"});
                read_number(sp, "uid", v.special.uid, "builder.special_ids");
                read_number(sp, "aid", v.special.aid, "builder.special_ids");
                read_number(sp, "eot", v.special.eot, "builder.special_ids");
                read_number(sp, "text_pad", v.special.text_pad, "builder.special_ids");
                read_number(sp, "end_of_text_pad", v.special.end_of_text_pad, "builder.special_ids");
            }
            if (b.contains("tokenizer_table")) {
                std::filesystem::path p = read_string(b, "tokenizer_table", "builder");
                cfg.tokenizer_table = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            }
        }
        if (j.contains("frame_rate_hz")) {
            double hz = 0.0;
            read_number(j, "frame_rate_hz", hz, "config");
            if (!(hz > 0.0)) throw Error(ErrorCode::SchemaError, "frame_rate_hz must be positive");
            cfg.frame_rate = static_cast<FrameRate>(std::llround(hz * 1000.0));
        }
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            only_keys(m, "metrics", {"eval_tau_ipu", "overall"});
            read_number(m, "eval_tau_ipu", cfg.metrics.eval_tau_ipu, "metrics");
            if (m.contains("overall")) {
                const auto v = read_string(m, "overall", "metrics");
                if (v == "statistic-mean") cfg.metrics.overall = OverallMode::StatisticMean;
                else if (v == "cell-mean") cfg.metrics.overall = OverallMode::CellMean;
                else throw Error(ErrorCode::SchemaError, "metrics.overall must be 'statistic-mean' or 'cell-mean'");
            }
        }
        if (j.contains("window")) {
            const auto& w = j.at("window");
            only_keys(w, "window", {"prompt_len", "total_len"});
            read_number(w, "prompt_len", cfg.window.prompt_len, "window");
            read_number(w, "total_len", cfg.window.total_len, "window");
        }
        read_number(j, "workers", cfg.workers, "config");
        read_number(j, "seed", cfg.seed, "config");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    try {
        return config_from_json(j, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

nlohmann::ordered_json config_to_json(const PipelineConfig& config) {
    nlohmann::ordered_json j;
    j["segmenter"] = {{"tau_ipu", config.segmenter.tau_ipu},
                      {"tau_tol", config.segmenter.tau_tol},
                      {"punctuation", config.segmenter.punctuation},
                      {"end_shift", config.segmenter.end_shift == EndShift::Minus ? "minus" : "plus"}};
    const auto& b = config.builder;
    nlohmann::ordered_json builder;
    builder["strategy"] = to_string(b.strategy);
    builder["chunk_size"] = b.tau_sc;
    builder["text_chunk_size"] = b.tau_tc;
    builder["text_channels"] = to_string(b.text_channels);
    builder["loss_weights"] = format_weight(b.loss_weight_text) + ":" + format_weight(b.loss_weight_speech);
    builder["speech_vocab_size"] = b.vocab.speech_size;
    builder["text_vocab_base"] = b.vocab.text_base;
    builder["text_vocab_size"] = b.vocab.text_size;
    builder["special_ids"] = {{"uid", b.vocab.special.uid},
                              {"aid", b.vocab.special.aid},
                              {"eot", b.vocab.special.eot},
                              {"text_pad", b.vocab.special.text_pad},
                              {"end_of_text_pad", b.vocab.special.end_of_text_pad}};
    if (config.tokenizer_table) {
        builder["tokenizer_table"] = config.tokenizer_table->generic_string();
    }
    j["builder"] = std::move(builder);
    j["frame_rate_hz"] = frame_rate_hz(config.frame_rate);
    j["metrics"] = {{"eval_tau_ipu", config.metrics.eval_tau_ipu},
                    {"overall", config.metrics.overall == OverallMode::StatisticMean ? "statistic-mean" : "cell-mean"}};
    j["window"] = {{"prompt_len", config.window.prompt_len}, {"total_len", config.window.total_len}};
    j["workers"] = config.workers;
    j["seed"] = config.seed;
    return j;
}

} // namespace duplexweave
