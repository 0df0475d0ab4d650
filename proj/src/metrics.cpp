#include "duplexweave/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "duplexweave/error.hpp"
#include "duplexweave/segmenter.hpp"

namespace duplexweave {

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Ipu: return "ipu";
    case EventKind::Pause: return "pause";
    case EventKind::Gap: return "gap";
    case EventKind::Overlap: return "overlap";
    }
    return "unknown";
}

std::string_view to_string(Statistic stat) {
    switch (stat) {
    case Statistic::Occurrence: return "occurrence";
    case Statistic::CumulativeDuration: return "cumulative_duration";
    case Statistic::AveragedDuration: return "averaged_duration";
    }
    return "unknown";
}

namespace {

SegmentList ipu_spans(const ChannelTimeline& timeline, const TimeInterval& window, double tau) {
    const auto clipped = clip(timeline.segments, window);
    SegmentList spans;
    for (const auto& ipu : merge_ipus(clipped, tau)) {
        spans.push_back(ipu.span);
    }
    return spans;
}

bool has_end_at(const SegmentList& spans, double t) {
    return std::any_of(spans.begin(), spans.end(), [t](const TimeInterval& s) { return s.end == t; });
}

bool has_start_at(const SegmentList& spans, double t) {
    return std::any_of(spans.begin(), spans.end(), [t](const TimeInterval& s) { return s.start == t; });
}

} // namespace

DialogueEvents extract_events(const ChannelTimeline& user, const ChannelTimeline& assistant,
                              const TimeInterval& window, double tau_ipu_eval) {
    if (!(window.end > window.start)) {
        throw Error(ErrorCode::InvalidInput, "evaluation window is empty");
    }
    if (!is_normalized(user.segments) || !is_normalized(assistant.segments)) {
        throw Error(ErrorCode::InvalidInput, "timelines must be normalized");
    }
    const Channel user_ch = user.channel;
    const Channel asst_ch = assistant.channel;
    const auto spans_u = ipu_spans(user, window, tau_ipu_eval);
    const auto spans_a = ipu_spans(assistant, window, tau_ipu_eval);

    DialogueEvents out;
    out.window = window;
    for (const auto& s : spans_u) {
        out.events.push_back({EventKind::Ipu, s, user_ch});
    }
    for (const auto& s : spans_a) {
        out.events.push_back({EventKind::Ipu, s, asst_ch});
    }
    for (const auto& s : intersect(spans_u, spans_a)) {
        out.events.push_back({EventKind::Overlap, s, std::nullopt});
    }

    const auto active = unite(spans_u, spans_a);
    for (const auto& silence : complement(active, window)) {
        if (silence.start <= window.start || silence.end >= window.end) {
            out.unclassified.push_back(silence);
            continue;
        }
        // Owner of the IPU edge on each side of the silence.
        const bool left_u = has_end_at(spans_u, silence.start);
        const bool left_a = has_end_at(spans_a, silence.start);
        const bool right_u = has_start_at(spans_u, silence.end);
        const bool right_a = has_start_at(spans_a, silence.end);
        if (left_u && right_u) {
            out.events.push_back({EventKind::Pause, silence, user_ch});
        } else if (left_a && right_a) {
            out.events.push_back({EventKind::Pause, silence, asst_ch});
        } else {
            out.events.push_back({EventKind::Gap, silence, std::nullopt});
        }
    }

    std::sort(out.events.begin(), out.events.end(), [](const TurnTakingEvent& a, const TurnTakingEvent& b) {
        if (a.span.start != b.span.start) return a.span.start < b.span.start;
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.attributed_channel < b.attributed_channel;
    });
    return out;
}

WindowPartition partition(const DialogueEvents& events) {
    WindowPartition p;
    double ipu_user = 0.0;
    double ipu_asst = 0.0;
    for (const auto& e : events.events) {
        const double len = e.span.length();
        switch (e.kind) {
        case EventKind::Ipu:
            (e.attributed_channel == Channel::User ? ipu_user : ipu_asst) += len;
            break;
        case EventKind::Pause: p.pause += len; break;
        case EventKind::Gap: p.gap += len; break;
        case EventKind::Overlap: p.overlap += len; break;
        }
    }
    p.user_only = ipu_user - p.overlap;
    p.assistant_only = ipu_asst - p.overlap;
    p.unclassified = total_length(events.unclassified);
    return p;
}

double KindStats::value(Statistic stat) const {
    switch (stat) {
    case Statistic::Occurrence: return static_cast<double>(occurrence);
    case Statistic::CumulativeDuration: return cumulative_duration;
    case Statistic::AveragedDuration: return averaged_duration;
    }
    return 0.0;
}

EventStats summarize(const DialogueEvents& events) {
    EventStats stats;
    for (const auto& e : events.events) {
        auto& k = stats[e.kind];
        ++k.occurrence;
        k.cumulative_duration += e.span.length();
    }
    for (auto& k : stats.per_kind) {
        k.averaged_duration = k.occurrence == 0 ? 0.0 : k.cumulative_duration / static_cast<double>(k.occurrence);
    }
    return stats;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "pearson inputs of length " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
    }
    if (x.size() < 2) {
        throw Error(ErrorCode::TooFewSamples, "pearson needs at least 2 samples");
    }
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (constant(x) || constant(y)) {
        return std::nullopt;
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

CorrelationReport correlate_corpus(std::span<const std::pair<EventStats, EventStats>> dialogues, OverallMode mode) {
    if (dialogues.size() < 2) {
        throw Error(ErrorCode::TooFewSamples,
                    "correlation needs at least 2 dialogues, got " + std::to_string(dialogues.size()));
    }
    CorrelationReport report;
    report.dialogues = dialogues.size();
    report.mode = mode;
    std::vector<double> prompt(dialogues.size());
    std::vector<double> continuation(dialogues.size());
    double cell_sum = 0.0;
    std::size_t cell_count = 0;
    for (Statistic stat : kStatistics) {
        const auto si = static_cast<std::size_t>(stat);
        double sum = 0.0;
        std::size_t defined = 0;
        for (EventKind kind : kEventKinds) {
            for (std::size_t d = 0; d < dialogues.size(); ++d) {
                prompt[d] = dialogues[d].first[kind].value(stat);
                continuation[d] = dialogues[d].second[kind].value(stat);
            }
            const auto r = pearson(prompt, continuation);
            report.cells[si][static_cast<std::size_t>(kind)] = r;
            if (r) {
                sum += *r;
                ++defined;
            } else {
                ++report.undefined_cells;
            }
        }
        if (defined > 0) {
            report.statistic_average[si] = sum / static_cast<double>(defined);
        }
        cell_sum += sum;
        cell_count += defined;
    }

    if (mode == OverallMode::CellMean) {
        if (cell_count > 0) {
            report.overall = cell_sum / static_cast<double>(cell_count);
        }
    } else {
        double sum = 0.0;
        std::size_t defined = 0;
        for (const auto& avg : report.statistic_average) {
            if (avg) {
                sum += *avg;
                ++defined;
            }
        }
        if (defined > 0) {
            report.overall = sum / static_cast<double>(defined);
        }
    }
    return report;
}

} // namespace duplexweave
