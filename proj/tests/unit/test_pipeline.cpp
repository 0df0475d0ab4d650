#include <doctest.h>

#include <algorithm>
#include <set>

#include "duplexweave/error.hpp"
#include "duplexweave/pipeline.hpp"
#include "duplexweave/sequence_io.hpp"
#include "../support/check_error.hpp"
#include "../support/temp_dir.hpp"

using namespace duplexweave;
using testing_support::TempDir;

namespace {

const fs::path kFixtures = DW_FIXTURES_DIR;

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::vector<nlohmann::json> out;
    for_each_jsonl(p, [&](const nlohmann::json& j, std::size_t) { out.push_back(j); });
    return out;
}

PipelineConfig base_config(Strategy s, TextChannels tc = TextChannels::AssistantOnly) {
    PipelineConfig c;
    c.builder.strategy = s;
    c.builder.text_channels = tc;
    c.workers = 2;
    return c;
}

std::vector<TokenId> truncated(const TokenStream& s, std::size_t n) {
    return {s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Partial Fisher-Yates with an independently written rejection draw.
std::vector<std::string> replay_sample(const std::vector<std::string>& ids, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(ids.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t bound = ids.size() - i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
        std::uint64_t r = rng();
        // accept r only from the largest multiple of bound that fits
        while (r > limit) r = rng();
        std::swap(idx[i], idx[i + r % bound]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(ids[i]);
    return out;
}

} // namespace

TEST_CASE("segment writes turns per dialogue and channel") {
    TempDir out;
    const auto entries = read_manifest(kFixtures / "manifest.jsonl");
    const auto summary = cmd_segment(entries, base_config(Strategy::TurnGuide), out.path());
    CHECK(summary.dialogues == 4);
    CHECK(summary.turns > 20);

    const auto turns = read_jsonl(out / "d001.assistant.turns.jsonl");
    REQUIRE(turns.size() >= 3);
    CHECK(turns[0]["text"] == "so yeah,");
    CHECK(turns[0]["start"] == 0.1);
    CHECK(turns[0]["end"] == 1.0);
    CHECK(turns[0]["ipu"] == 0);
    CHECK(turns[1]["text"] == "i think");
    CHECK(turns[1]["end"] == 1.95);
    CHECK(turns[2]["text"] == "so.");
    CHECK(turns[2]["ipu"] == 1);
    CHECK(turns[2]["words"].size() == 1);

    // words without activity: an empty turns file
    CHECK(read_text(out / "d004.user.turns.jsonl").empty());
}

TEST_CASE("malformed input names file and line") {
    TempDir out;
    const auto entries = read_manifest(kFixtures / "manifest_bad.jsonl");
    try {
        cmd_segment(entries, base_config(Strategy::TurnGuide), out.path());
        FAIL("expected a schema error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaError);
        CHECK(std::string(e.what()).find("a.words.jsonl:3") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(out / "b001.assistant.turns.jsonl"));
}

TEST_CASE("built sequences decode back to the input speech and turn text") {
    const auto entries = read_manifest(kFixtures / "manifest.jsonl");
    for (auto s : {Strategy::STI, Strategy::SCI, Strategy::TurnGuide}) {
        TempDir out;
        auto cfg = base_config(s, TextChannels::Both);
        cfg.tokenizer_table = kFixtures / "tokenizer.json";
        const auto summary = cmd_build(entries, cfg, out.path(), SequenceFormat::Both);
        const auto tokenizer = make_tokenizer(cfg);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            const auto stem = e.id + "." + std::string(to_string(s)) + ".seq";
            const auto seq = decode_sequence_binary(read_bytes(out / (stem + ".bin")));
            CHECK(seq.provenance == e.id);
            CHECK(sequence_from_json(nlohmann::json::parse(read_text(out / (stem + ".json")))) == seq);
            const auto u = read_token_stream(*e.user.tokens, Channel::User);
            const auto a = read_token_stream(*e.assistant.tokens, Channel::Assistant);
            const std::size_t tau = s == Strategy::STI ? 1 : 5;
            const std::size_t n = std::min(u.tokens.size(), a.tokens.size()) / tau * tau;
            const auto d = deinterleave(seq);
            CHECK(d.user.tokens == truncated(u, n));
            CHECK(d.assistant.tokens == truncated(a, n));
            if (s == Strategy::TurnGuide) {
                for (Channel ch : {Channel::User, Channel::Assistant}) {
                    const auto turns = segment_channel(e, ch, cfg.segmenter);
                    const auto& got = ch == Channel::User ? d.user_turn_texts : d.assistant_turn_texts;
                    REQUIRE(got.size() == turns.size());
                    for (std::size_t t = 0; t < turns.size(); ++t) {
                        std::vector<std::string> words;
                        for (const auto& w : turns[t].text_words) words.push_back(w.text);
                        CHECK(got[t] == tokenizer->encode_words(words));
                    }
                }
                CHECK(summary.dialogues[i].report.dropped_text_tokens == 0);
            }
        }
        const auto report = nlohmann::json::parse(read_text(out / "build_report.json"));
        CHECK(report["totals"]["dialogues"] == entries.size());
    }
}

TEST_CASE("token-level alignment on the two-word clip") {
    TempDir out;
    const auto entries = read_manifest(kFixtures / "manifest_short.jsonl");
    cmd_build(entries, base_config(Strategy::MoshiTS), out.path(), SequenceFormat::Binary);
    const auto seq = decode_sequence_binary(read_bytes(out / "s001.moshi-ts.seq.bin"));
    REQUIRE(seq.tokens.size() == 3 * 125);
    const TokenId base = Vocabulary{}.text_base;
    // "hi" at 0.8 s -> steps 10, 11; "there" at 1.2 s -> steps 15..19
    const std::map<std::size_t, TokenId> real{{10, base + 'h'}, {11, base + 'i'}, {15, base + 't'}, {16, base + 'h'},
                                              {17, base + 'e'}, {18, base + 'r'}, {19, base + 'e'}};
    for (std::size_t t = 0; t < 125; ++t) {
        CHECK(seq.tokens[3 * t].id == t);
        CHECK(seq.tokens[3 * t + 2].id == 1000 + t);
        const auto& slot = seq.tokens[3 * t + 1];
        if (real.count(t)) {
            CHECK(slot.id == real.at(t));
        } else if (t == 9 || t == 14) {
            CHECK(slot.kind == TokenKind::EndOfTextPad);
        } else {
            CHECK(slot.kind == TokenKind::TextPad);
        }
        CHECK(seq.tokens[3 * t].loss_weight == 0.0f);
    }
}

TEST_CASE("metrics report and its error paths") {
    TempDir out;
    const auto entries = read_manifest(kFixtures / "manifest.jsonl");
    auto cfg = base_config(Strategy::TurnGuide);
    const auto report = cmd_metrics(entries, cfg, out.path(), "fixture");
    CHECK(report.dialogues == 4);
    const auto j = nlohmann::json::parse(read_text(out / "report.json"));
    CHECK(j["label"] == "fixture");
    CHECK(j.contains("occurrence"));
    CHECK(j["occurrence"].contains("overlap"));
    const auto csv = read_text(out / "report.csv");
    CHECK(csv.rfind("label,statistic,event,pearson_r\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 5 + 1);
    CHECK(fs::exists(out / "dialogue_stats.csv"));

    const std::vector<DialogueEntry> one(entries.begin(), entries.begin() + 1);
    CHECK_ERROR_CODE(cmd_metrics(one, cfg, out.path()), ErrorCode::TooFewSamples);
    auto short_entries = read_manifest(kFixtures / "manifest_short.jsonl");
    short_entries.push_back(short_entries[0]);
    CHECK_ERROR_CODE(cmd_metrics(short_entries, cfg, out.path()), ErrorCode::ClipTooShort);
}

TEST_CASE("transcripts") {
    TempDir out;
    const auto entries = read_manifest(kFixtures / "manifest.jsonl");
    const std::set<Channel> both{Channel::User, Channel::Assistant};
    cmd_transcript(entries, base_config(Strategy::TurnGuide), out.path(), TranscriptWindow::All, both,
                   ScoringSetting::Unconditional);
    const auto text = read_text(out / "d001.transcript.txt");
    CHECK(text.find("Assistant@0.10: so yeah, i think so.\n") != std::string::npos);
    const auto prompt = read_text(out / "d001.prompt.txt");
    CHECK(prompt.size() > text.size());
    CHECK(prompt.substr(prompt.size() - text.size()) == text);

    TempDir cont;
    cmd_transcript(entries, base_config(Strategy::TurnGuide), cont.path(), TranscriptWindow::Continuation,
                   {Channel::Assistant}, std::nullopt);
    const auto c = read_text(cont / "d001.transcript.txt");
    CHECK(c.find("User@") == std::string::npos);
    CHECK(c.find("Assistant@0.10") == std::string::npos);
    CHECK_FALSE(fs::exists(cont / "d001.prompt.txt"));
}

TEST_CASE("splits") {
    const auto ids = parse_id_list(read_text(kFixtures / "parts.txt"));
    REQUIRE(ids.size() == 117);
    const auto a = split_by_parts(ids, SplitBoundaries{});
    std::array<std::set<int>, 3> parts;
    for (const auto& x : a) parts[static_cast<std::size_t>(x.split)].insert(x.part);
    CHECK(parts[0].size() == 111);
    CHECK(parts[1].size() == 3);
    CHECK(parts[2].size() == 3);
    CHECK(*parts[1].begin() == 111);
    CHECK(*parts[2].rbegin() == 116);

    CHECK_ERROR_CODE(split_by_parts(std::vector<PartId>{}, SplitBoundaries{}), ErrorCode::InvalidInput);
    CHECK_ERROR_CODE(split_by_parts(std::vector<PartId>{{"x", 200}}, SplitBoundaries{}), ErrorCode::OutOfRange);
    CHECK(parse_id_list("007\nabc 12\n\n")[0].part == 7);
    CHECK_THROWS_AS(parse_id_list("abc\n"), Error);

    const auto r = split_by_ratios(ids, {0.8, 0.1, 0.1}, 5);
    std::array<std::size_t, 3> counts{};
    for (const auto& x : r) ++counts[static_cast<std::size_t>(x.split)];
    CHECK(counts[0] == 93);
    CHECK(counts[1] == 11);
    CHECK(counts[2] == 13);
    CHECK(split_by_ratios(ids, {0.8, 0.1, 0.1}, 5)[40].split == r[40].split);
}

TEST_CASE("seeded sampling replays") {
    std::vector<std::string> ids;
    for (int i = 0; i < 5000; ++i) ids.push_back("clip" + std::to_string(i));
    const auto s1 = sample_ids(ids, 1000, 42);
    CHECK(s1.size() == 1000);
    CHECK(s1 == sample_ids(ids, 1000, 42));
    CHECK(s1 == replay_sample(ids, 1000, 42));
    CHECK(s1 != sample_ids(ids, 1000, 43));
    CHECK(std::is_sorted(s1.begin(), s1.end(), [&](const std::string& x, const std::string& y) {
        return std::stoi(x.substr(4)) < std::stoi(y.substr(4));
    }));
    CHECK(sample_ids(ids, 10000, 1).size() == ids.size());
    CHECK_THROWS_AS(sample_ids(std::vector<std::string>{}, 3, 1), Error);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) CHECK(bounded_draw(rng, 7) < 7);
}

TEST_CASE("outputs do not depend on the worker count") {
    const auto entries = read_manifest(kFixtures / "manifest.jsonl");
    TempDir one, four;
    auto c1 = base_config(Strategy::TurnGuide, TextChannels::Both);
    c1.workers = 1;
    auto c4 = c1;
    c4.workers = 4;
    cmd_build(entries, c1, one.path(), SequenceFormat::Both);
    cmd_build(entries, c4, four.path(), SequenceFormat::Both);
    for (const auto& f : fs::directory_iterator(one.path())) {
        CHECK(read_bytes(f.path()) == read_bytes(four / f.path().filename().string()));
    }
}
