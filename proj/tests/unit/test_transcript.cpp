#include <doctest.h>

#include "duplexweave/error.hpp"
#include "duplexweave/transcript.hpp"
#include "../support/check_error.hpp"

using namespace duplexweave;

namespace {

SentenceRecord s(Channel ch, double start, std::string text) { return {ch, start, start + 0.5, std::move(text)}; }

} // namespace

TEST_CASE("ordering and rendering") {
    const std::vector<SentenceRecord> u{s(Channel::User, 0, "hi")};
    const std::vector<SentenceRecord> a{s(Channel::Assistant, 1, "hello")};
    CHECK(order_transcript(u, a).render() == "User@0.00: hi\nAssistant@1.00: hello\n");
    CHECK(order_transcript({}, {}).lines.empty());
    CHECK(order_transcript({}, {}).render().empty());
    CHECK(render_line(s(Channel::Assistant, 12.345, "ok")) == "Assistant@12.35: ok");
}

TEST_CASE("six-sentence merge with a tie") {
    const std::vector<SentenceRecord> u{s(Channel::User, 0.5, "u1"), s(Channel::User, 4.0, "u2"),
                                        s(Channel::User, 7.2, "u3")};
    const std::vector<SentenceRecord> a{s(Channel::Assistant, 1.0, "a1"), s(Channel::Assistant, 4.0, "a2"),
                                        s(Channel::Assistant, 6.0, "a3")};
    const auto t = order_transcript(u, a);
    std::vector<std::string> order;
    for (const auto& l : t.lines) order.push_back(l.text);
    CHECK(order == std::vector<std::string>{"u1", "a1", "u2", "a2", "a3", "u3"});
    CHECK(t.lines[2].channel == Channel::User);
}

TEST_CASE("clip windows") {
    auto w = window_clip(120);
    CHECK(w.prompt == TimeInterval{0, 30});
    CHECK(w.continuation == TimeInterval{30, 120});
    w = window_clip(600);
    CHECK(w.continuation == TimeInterval{30, 120});
    CHECK_ERROR_CODE(window_clip(100), ErrorCode::ClipTooShort);
    CHECK_THROWS_AS(window_clip(120, 130, 120), Error);
}

TEST_CASE("filtering") {
    const std::vector<SentenceRecord> u{s(Channel::User, 10, "a"), s(Channel::User, 40, "b")};
    const std::vector<SentenceRecord> a{s(Channel::Assistant, 29.99, "c"), s(Channel::Assistant, 30, "d"),
                                        s(Channel::Assistant, 119.9, "e"), s(Channel::Assistant, 120, "f")};
    const auto t = order_transcript(u, a);
    const auto both = filter_transcript(t, {30, 120}, {Channel::User, Channel::Assistant});
    CHECK(both.lines.size() == 3);
    const auto asst = filter_transcript(t, {30, 120}, {Channel::Assistant});
    CHECK(asst.lines.size() == 2);
    for (const auto& l : asst.lines) CHECK(l.channel == Channel::Assistant);
    CHECK(filter_transcript(t, {200, 300}, {Channel::User, Channel::Assistant}).lines.empty());
    // idempotent, and nested windows commute
    CHECK(filter_transcript(both, {30, 120}, {Channel::User, Channel::Assistant}).lines == both.lines);
    CHECK(filter_transcript(filter_transcript(t, {0, 100}, {Channel::User, Channel::Assistant}), {20, 50},
                            {Channel::User, Channel::Assistant})
              .lines == filter_transcript(filter_transcript(t, {20, 50}, {Channel::User, Channel::Assistant}),
                                          {0, 100}, {Channel::User, Channel::Assistant})
                            .lines);
}

TEST_CASE("scoring prompts are bundled") {
    const auto unc = scoring_prompt(ScoringSetting::Unconditional);
    const auto cond = scoring_prompt(ScoringSetting::Conditional);
    CHECK(unc.size() > 100);
    CHECK(cond.size() > 100);
    CHECK(unc != cond);
    CHECK(cond.find("model channel") != std::string_view::npos);
}
