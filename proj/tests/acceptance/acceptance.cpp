// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "duplexweave/batch.hpp"
#include "duplexweave/io.hpp"
#include "duplexweave/metrics.hpp"
#include "duplexweave/pipeline.hpp"
#include "duplexweave/segmenter.hpp"
#include "duplexweave/sequence.hpp"
#include "duplexweave/transcript.hpp"
#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"

using namespace duplexweave;
namespace fs = std::filesystem;

namespace {

const Vocabulary kVocab;
const fs::path kFixtures = DW_FIXTURES_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
    std::size_t failures = 0;
    std::string first_failure;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (failures++ == 0) first_failure = what;
        pass = false;
    }
};

using Criterion = std::pair<std::string, std::function<Outcome()>>;

BuilderConfig builder(Strategy s, TextChannels tc) {
    BuilderConfig c;
    c.strategy = s;
    c.text_channels = tc;
    c.loss_weight_text = 2.0;
    return c;
}

// Expected recovered text per turn: what the placement rule fits before the
// stream ends. Turns that get no slot at all are absent.
std::vector<std::vector<TokenId>> expected_turn_texts(const std::vector<TurnTextTokens>& turns, std::size_t chunks,
                                                      std::size_t tau_tc) {
    std::vector<std::pair<std::size_t, std::size_t>> sl;
    for (const auto& t : turns) sl.push_back({oracle::exact_start_chunk(t.turn_start), t.token_ids.size()});
    const auto placed = oracle::place_turns(sl, chunks, tau_tc);
    std::vector<std::vector<TokenId>> out;
    for (std::size_t j = 0; j < turns.size(); ++j) {
        if (placed[j].placed_tokens == 0) continue;
        const auto n = std::min(turns[j].token_ids.size(), placed[j].placed_tokens);
        out.emplace_back(turns[j].token_ids.begin(), turns[j].token_ids.begin() + static_cast<std::ptrdiff_t>(n));
    }
    return out;
}

Outcome round_trip() {
    Outcome o;
    gen::Rng rng(1001);
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t cases = 0;
    for (auto s : {Strategy::STI, Strategy::SCI, Strategy::TurnGuide, Strategy::MoshiTS}) {
        for (int iter = 0; iter < 1000; ++iter) {
            const auto n = static_cast<std::size_t>(gen::uniform_int(rng, 10, 3000));
            const TokenStream u{Channel::User, gen::speech_tokens(rng, n, kVocab.speech_size)};
            const TokenStream a{Channel::Assistant, gen::speech_tokens(rng, n, kVocab.speech_size)};
            const double horizon = static_cast<double>(n) / 12.5;
            const std::size_t tau = s == Strategy::STI || s == Strategy::MoshiTS ? 1 : 5;
            const std::size_t len = n / tau * tau;
            const std::vector<TokenId> want_u(u.tokens.begin(), u.tokens.begin() + static_cast<std::ptrdiff_t>(len));
            const std::vector<TokenId> want_a(a.tokens.begin(), a.tokens.begin() + static_cast<std::ptrdiff_t>(len));
            const std::string tag = std::string(to_string(s)) + " case " + std::to_string(iter);
            ++cases;

            Deinterleaved d;
            if (s == Strategy::STI) {
                d = deinterleave(build_sti(u, a, builder(s, TextChannels::None)).sequence);
            } else if (s == Strategy::SCI) {
                d = deinterleave(build_sci(u, a, builder(s, TextChannels::None)).sequence);
            } else if (s == Strategy::TurnGuide) {
                const auto max_turns = static_cast<std::size_t>(horizon / 2.0) + 1;
                const auto ut = gen::turns(rng, horizon, max_turns, 20, kVocab);
                const auto at = gen::turns(rng, horizon, max_turns, 20, kVocab);
                d = deinterleave(build_turnguide(u, a, ut, at, builder(s, TextChannels::Both)).sequence);
                o.require(d.user_turn_texts == expected_turn_texts(ut, len / 5, 5), tag + ": user text");
                o.require(d.assistant_turn_texts == expected_turn_texts(at, len / 5, 5), tag + ": assistant text");
            } else {
                const auto words = gen::timed_words(rng, horizon, n / 8 + 1, kVocab);
                const auto r = build_moshi_ts(u, a, words, builder(s, TextChannels::AssistantOnly));
                d = deinterleave(r.sequence);
                std::vector<TokenId> all;
                for (const auto& w : words) all.insert(all.end(), w.token_ids.begin(), w.token_ids.end());
                o.require(r.report.dropped_text_tokens <= all.size(), tag + ": drop count");
                all.resize(all.size() - std::min(all.size(), r.report.dropped_text_tokens));
                o.require(d.aligned_text == all, tag + ": aligned text");
            }
            o.require(d.user.tokens == want_u, tag + ": user speech");
            o.require(d.assistant.tokens == want_a, tag + ": assistant speech");
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 60.0, "runtime " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu streams in %.2f s", cases, secs);
    o.detail = buf;
    return o;
}

Outcome text_start_chunk() {
    Outcome o;
    gen::Rng rng(1002);
    for (int i = 0; i < 10000; ++i) {
        const double t = gen::uniform_real(rng, 0.0, 3600.0);
        o.require(compute_text_start_chunk(t, 12.5, 5) == oracle::exact_start_chunk(t), "t=" + std::to_string(t));
    }

    // placement in built sequences
    std::size_t checked = 0;
    for (int iter = 0; iter < 300; ++iter) {
        const auto n = static_cast<std::size_t>(gen::uniform_int(rng, 50, 2000));
        const TokenStream u{Channel::User, gen::speech_tokens(rng, n, kVocab.speech_size)};
        const TokenStream a{Channel::Assistant, gen::speech_tokens(rng, n, kVocab.speech_size)};
        const auto turns = gen::turns(rng, n / 12.5, n / 25 + 1, 15, kVocab);
        const auto r = build_turnguide(u, a, {}, turns, builder(Strategy::TurnGuide, TextChannels::AssistantOnly));

        std::vector<std::pair<std::size_t, std::size_t>> sl;
        for (const auto& t : turns) sl.push_back({oracle::exact_start_chunk(t.turn_start), t.token_ids.size()});
        const auto placed = oracle::place_turns(sl, n / 5, 5);

        // first chunk of each turn's text: a turn begins after every end marker
        std::vector<std::uint32_t> first;
        bool open = false;
        for (const auto& t : r.sequence.tokens) {
            if (t.channel != Channel::Assistant) continue;
            if (t.kind == TokenKind::Text && !open) {
                first.push_back(t.chunk_index);
                open = true;
            } else if (t.kind == TokenKind::Eot) {
                if (!open) first.push_back(t.chunk_index);
                open = false;
            }
        }
        std::size_t j = 0;
        for (std::size_t k = 0; k < turns.size(); ++k) {
            if (placed[k].placed_tokens == 0) continue;
            if (j >= first.size()) {
                o.require(false, "turn missing in sequence");
                break;
            }
            o.require(first[j] == placed[k].first_chunk, "turn placed in the wrong chunk");
            if (!placed[k].deferred) {
                o.require(first[j] == sl[k].first, "non-deferred turn not at its start chunk");
                ++checked;
            }
            ++j;
        }
        o.require(j == first.size(), "unexpected turns in sequence");
    }
    o.detail = "10000 values; " + std::to_string(checked) + " non-deferred turns placed";
    return o;
}

Outcome chunk_duration() {
    Outcome o;
    const auto want = make_rational(2, 5);
    for (std::size_t i = 0; i < 600; ++i) {
        const auto span = chunk_span(i, 5, 12500);
        o.require(span.duration() == want, "chunk " + std::to_string(i));
        o.require(span.start == make_rational(static_cast<std::int64_t>(2 * i), 5), "start " + std::to_string(i));
    }
    const TokenStream u{Channel::User, std::vector<TokenId>(3000, 1)};
    const TokenStream a{Channel::Assistant, std::vector<TokenId>(3000, 2)};
    const auto seq = build_sci(u, a, builder(Strategy::SCI, TextChannels::None)).sequence;
    std::map<std::uint32_t, std::size_t> per_chunk;
    for (const auto& t : seq.tokens)
        if (t.kind == TokenKind::SpeechAssistant) ++per_chunk[t.chunk_index];
    for (const auto& [c, count] : per_chunk) o.require(count == 5, "chunk " + std::to_string(c) + " token count");
    o.detail = "600 spans of exactly 2/5 s";
    return o;
}

Outcome ipu_oracle() {
    Outcome o;
    gen::Rng rng(1003);
    for (int iter = 0; iter < 1000; ++iter) {
        const auto ms = gen::segments_ms(rng, 120000, 60);
        const auto segs = oracle::to_seconds(ms);
        for (std::int64_t tau : {500, 200}) {
            const auto ipus = merge_ipus(segs, static_cast<double>(tau) / 1000.0);
            const auto want = oracle::to_seconds(oracle::closure_merge(ms, tau));
            bool same = ipus.size() == want.size();
            for (std::size_t j = 0; same && j < ipus.size(); ++j) same = ipus[j].span == want[j];
            o.require(same, "set " + std::to_string(iter) + " tau " + std::to_string(tau));
        }
    }
    o.detail = "1000 sets at tau 0.5 and 0.2";
    return o;
}

Outcome word_conservation() {
    Outcome o;
    gen::Rng rng(1004);
    const SegmenterConfig cfg;
    std::size_t total = 0;
    for (int iter = 0; iter < 500; ++iter) {
        auto ms = gen::segments_ms(rng, 60000, 25);
        if (ms.empty()) ms.push_back({1000, 2000});
        const auto tl = make_timeline(Channel::Assistant, oracle::to_seconds(ms), 60.0);
        std::vector<WordSpan> words;
        double t = gen::uniform_real(rng, 0.0, 1.0);
        while (t < 59.0) {
            const double len = gen::uniform_real(rng, 0.05, 0.6);
            words.push_back({gen::word(rng), t, std::min(t + len, 60.0)});
            t += len + gen::uniform_real(rng, 0.0, 2.0);
        }
        const auto turns = segment_dialogue(tl, words, cfg);
        std::vector<WordSpan> back;
        for (const auto& turn : turns) back.insert(back.end(), turn.text_words.begin(), turn.text_words.end());
        o.require(back == words, "fixture " + std::to_string(iter));
        total += words.size();
    }
    o.detail = std::to_string(total) + " words over 500 fixtures";
    return o;
}

Outcome partition_invariant() {
    Outcome o;
    gen::Rng rng(1005);
    double worst = 0.0;
    for (int iter = 0; iter < 500; ++iter) {
        const auto u = oracle::to_seconds(gen::segments_ms(rng, 120000, 50));
        const auto a = oracle::to_seconds(gen::segments_ms(rng, 120000, 50));
        const auto ut = make_timeline(Channel::User, u, 120.0);
        const auto at = make_timeline(Channel::Assistant, a, 120.0);
        const double w0 = gen::uniform_real(rng, 0.0, 60.0);
        const TimeInterval window = iter % 2 ? TimeInterval{0.0, 120.0} : TimeInterval{w0, gen::uniform_real(rng, w0 + 0.1, 120.0)};
        const auto p = partition(extract_events(ut, at, window));
        const double sum = p.user_only + p.assistant_only + p.overlap + p.pause + p.gap + p.unclassified;
        const double err = std::abs(sum - (window.end - window.start));
        worst = std::max(worst, err);
        o.require(err <= 1e-9, "timeline " + std::to_string(iter));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max error %.3g s", worst);
    o.detail = buf;
    return o;
}

Outcome pearson_check() {
    Outcome o;
    std::vector<double> x, up, down;
    for (int i = 0; i < 50; ++i) {
        x.push_back(i);
        up.push_back(2.0 * i + 3.0);
        down.push_back(-0.5 * i + 1.0);
    }
    const auto r1 = pearson(x, up);
    const auto r2 = pearson(x, down);
    o.require(r1 && std::abs(*r1 - 1.0) <= 1e-12, "r = 1 case");
    o.require(r2 && std::abs(*r2 + 1.0) <= 1e-12, "r = -1 case");
    const std::vector<double> flat(50, 4.2);
    o.require(!pearson(x, flat).has_value(), "zero variance in y");
    o.require(!pearson(flat, x).has_value(), "zero variance in x");

    gen::Rng rng(1006);
    double worst = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
        const auto n = static_cast<std::size_t>(gen::uniform_int(rng, 3, 400));
        std::vector<double> a(n), b(n);
        const double slope = gen::uniform_real(rng, -2.0, 2.0);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = gen::uniform_real(rng, -50.0, 50.0);
            b[i] = slope * a[i] + gen::uniform_real(rng, -30.0, 30.0);
        }
        const auto got = pearson(a, b);
        const auto want = oracle::pearson_direct(a, b);
        if (!got || !want) {
            o.require(false, "undefined on pair " + std::to_string(iter));
            continue;
        }
        worst = std::max(worst, std::abs(*got - *want));
        o.require(std::abs(*got - *want) <= 1e-12, "pair " + std::to_string(iter));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.3g", worst);
    o.detail = buf;
    return o;
}

Outcome self_correlation() {
    Outcome o;
    gen::Rng rng(1007);
    // continuation window [30, 60) replays the prompt window [0, 30)
    std::vector<DialogueTimelines> dialogues;
    for (int d = 0; d < 40; ++d) {
        auto shift = [](std::vector<oracle::MsInterval> v) {
            for (auto& s : v) {
                s.start += 30000;
                s.end += 30000;
            }
            return v;
        };
        std::vector<oracle::MsInterval> u, a;
        for (const auto& s : gen::segments_ms(rng, 29000, 25)) u.push_back({s.start + 500, s.end + 500});
        for (const auto& s : gen::segments_ms(rng, 29000, 25)) a.push_back({s.start + 500, s.end + 500});
        auto uu = u, aa = a;
        const auto us = shift(u), as = shift(a);
        uu.insert(uu.end(), us.begin(), us.end());
        aa.insert(aa.end(), as.begin(), as.end());
        dialogues.push_back({make_timeline(Channel::User, oracle::to_seconds(uu), 60.0),
                             make_timeline(Channel::Assistant, oracle::to_seconds(aa), 60.0)});
    }
    const auto stats = batch_event_stats(dialogues, window_clip(60.0, 30.0, 60.0), kEvalTauIpu, 0);
    const auto report = correlate_corpus(stats);
    const auto j = report_to_json(report, "self");
    o.require(report.undefined_cells == 0, "undefined cells");
    o.require(!j["overall"].is_null(), "overall undefined");
    const double overall = j["overall"].is_null() ? 0.0 : j["overall"].get<double>();
    o.require(std::abs(overall - 1.0) <= 1e-12, "overall off");
    char buf[64];
    std::snprintf(buf, sizeof buf, "overall %.15f over 40 dialogues", overall);
    o.detail = buf;
    return o;
}

Outcome windowing() {
    Outcome o;
    const auto w = window_clip(120.0);
    std::size_t prompt = 0, cont = 0;
    for (Channel ch : {Channel::User, Channel::Assistant}) {
        const TokenStream s{ch, std::vector<TokenId>(1500, 0)};
        const auto p = frames_in(w.prompt, s.frame_rate);
        const auto c = frames_in(w.continuation, s.frame_rate);
        o.require(p.first == 0 && p.size() == 375, "prompt frames");
        o.require(c.first == 375 && c.size() == 1125, "continuation frames");
        o.require(c.last <= s.tokens.size(), "continuation exceeds the stream");
        prompt = p.size();
        cont = c.size();
    }
    o.detail = std::to_string(prompt) + " prompt + " + std::to_string(cont) + " continuation frames per channel";
    return o;
}

Outcome split_check() {
    Outcome o;
    const auto ids = parse_id_list(read_text(kFixtures / "parts.txt"));
    const auto assigned = split_by_parts(ids, SplitBoundaries{});
    std::map<Split, std::set<int>> parts;
    for (const auto& a : assigned) parts[a.split].insert(a.part);
    const auto tr = parts[Split::Train].size(), va = parts[Split::Validation].size(), te = parts[Split::Test].size();
    o.require(ids.size() == 117, "expected 117 part ids");
    o.require(tr == 111 && va == 3 && te == 3, "counts");
    o.detail = std::to_string(tr) + "/" + std::to_string(va) + "/" + std::to_string(te) + " train/validation/test parts";
    return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).generic_string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

Outcome cli_determinism() {
    Outcome o;
    const std::string cli = DW_CLI_PATH;
    const std::string fx = kFixtures.string();
    const std::string common = " --config " + fx + "/config.json";
    const std::vector<std::pair<std::string, std::string>> commands{
        {"segment", common + " segment --manifest " + fx + "/manifest.jsonl"},
        {"build-turnguide", common + " build --format both --manifest " + fx + "/manifest.jsonl"},
        {"build-sti", common + " --strategy sti --text-channels none build --manifest " + fx + "/manifest.jsonl"},
        {"build-sci", common + " --strategy sci --text-channels none build --manifest " + fx + "/manifest.jsonl"},
        {"build-moshi-ts", common + " --strategy moshi-ts --text-channels assistant build --format both --manifest " +
                               fx + "/manifest.jsonl"},
        {"metrics", common + " metrics --label fixture --manifest " + fx + "/manifest.jsonl"},
        {"transcript", common + " transcript --window continuation --prompt conditional --manifest " + fx +
                           "/manifest.jsonl"},
        {"split-parts", common + " split --ids " + fx + "/parts.txt --sample 2"},
        {"split-ratios", common + " split --manifest " + fx + "/manifest.jsonl --ratios 0.5,0.25,0.25 --sample 1"},
    };
    testing_support::TempDir tmp;
    std::size_t files = 0;
    for (const auto& [name, args] : commands) {
        std::map<std::string, std::string> runs[2];
        bool ran = true;
        for (int r = 0; r < 2; ++r) {
            const auto out = tmp / (name + "." + std::to_string(r));
            const std::string cmd = "\"" + cli + "\"" + args + " --out \"" + out.string() + "\" >\"" +
                                    (tmp / (name + ".log")).string() + "\" 2>&1";
            if (std::system(cmd.c_str()) != 0) {
                o.require(false, name + " exited nonzero");
                ran = false;
                break;
            }
            runs[r] = snapshot(out);
        }
        if (!ran) continue;
        o.require(!runs[0].empty(), name + " wrote nothing");
        o.require(runs[0] == runs[1], name + " outputs differ");
        files += runs[0].size();
    }
    o.detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files compared";
    return o;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"round-trip", round_trip},
        {"text-start-chunk", text_start_chunk},
        {"chunk-duration", chunk_duration},
        {"ipu-oracle", ipu_oracle},
        {"word-conservation", word_conservation},
        {"partition-invariant", partition_invariant},
        {"pearson", pearson_check},
        {"self-correlation", self_correlation},
        {"windowing", windowing},
        {"split", split_check},
        {"cli-determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.first_failure = std::string("exception: ") + e.what();
        }
        if (o.pass) {
            std::printf("PASS %s: %s\n", name.c_str(), o.detail.c_str());
        } else {
            ++failed;
            std::printf("FAIL %s: %s (%zu failing checks)\n", name.c_str(), o.first_failure.c_str(),
                        o.failures);
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
