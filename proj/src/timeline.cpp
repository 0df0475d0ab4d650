#include "duplexweave/timeline.hpp"

#include <algorithm>

#include "duplexweave/error.hpp"

namespace duplexweave {

std::string_view to_string(Channel channel) {
    return channel == Channel::User ? "User" : "Assistant";
}

Channel other(Channel channel) {
    return channel == Channel::User ? Channel::Assistant : Channel::User;
}

SegmentList normalize_segments(std::span<const TimeInterval> raw, double duration) {
    if (!(duration > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "timeline duration must be positive");
    }
    SegmentList sorted;
    sorted.reserve(raw.size());
    for (const auto& seg : raw) {
        if (seg.start < 0.0 || seg.end < seg.start) {
            throw Error(ErrorCode::NegativeTime,
                        "segment (" + std::to_string(seg.start) + ", " + std::to_string(seg.end) + ")");
        }
        if (seg.start >= duration) {
            throw Error(ErrorCode::OutOfRange,
                        "segment start " + std::to_string(seg.start) + " >= duration " + std::to_string(duration));
        }
        sorted.push_back({seg.start, std::min(seg.end, duration)});
    }
    std::sort(sorted.begin(), sorted.end(), [](const TimeInterval& a, const TimeInterval& b) {
        return a.start < b.start || (a.start == b.start && a.end < b.end);
    });

    SegmentList out;
    for (const auto& seg : sorted) {
        if (!out.empty() && seg.start <= out.back().end + kTimeEpsilon) {
            out.back().end = std::max(out.back().end, seg.end);
        } else {
            out.push_back(seg);
        }
    }
    std::erase_if(out, [](const TimeInterval& s) { return s.length() <= kTimeEpsilon; });
    return out;
}

ChannelTimeline make_timeline(Channel channel, std::span<const TimeInterval> raw, double duration) {
    return ChannelTimeline{channel, duration, normalize_segments(raw, duration)};
}

SegmentList complement(std::span<const TimeInterval> segments, const TimeInterval& window) {
    SegmentList out;
    double cursor = window.start;
    for (const auto& seg : segments) {
        const double s = std::max(seg.start, window.start);
        const double e = std::min(seg.end, window.end);
        if (e <= s) {
            continue;
        }
        if (s > cursor) {
            out.push_back({cursor, s});
        }
        cursor = std::max(cursor, e);
    }
    if (cursor < window.end) {
        out.push_back({cursor, window.end});
    }
    return out;
}

SegmentList intersect(std::span<const TimeInterval> a, std::span<const TimeInterval> b) {
    SegmentList out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const double s = std::max(a[i].start, b[j].start);
        const double e = std::min(a[i].end, b[j].end);
        if (s < e) {
            out.push_back({s, e});
        }
        if (a[i].end < b[j].end) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

SegmentList unite(std::span<const TimeInterval> a, std::span<const TimeInterval> b) {
    SegmentList merged;
    merged.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged),
               [](const TimeInterval& x, const TimeInterval& y) { return x.start < y.start; });
    SegmentList out;
    for (const auto& seg : merged) {
        if (!out.empty() && seg.start <= out.back().end) {
            out.back().end = std::max(out.back().end, seg.end);
        } else {
            out.push_back(seg);
        }
    }
    return out;
}

SegmentList clip(std::span<const TimeInterval> segments, const TimeInterval& window) {
    SegmentList out;
    for (const auto& seg : segments) {
        const double s = std::max(seg.start, window.start);
        const double e = std::min(seg.end, window.end);
        if (s < e) {
            out.push_back({s, e});
        }
    }
    return out;
}

double total_length(std::span<const TimeInterval> segments) {
    double sum = 0.0;
    for (const auto& seg : segments) {
        sum += seg.length();
    }
    return sum;
}

bool is_normalized(std::span<const TimeInterval> segments) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!(segments[i].start < segments[i].end) || segments[i].start < 0.0) {
            return false;
        }
        if (i > 0 && segments[i].start < segments[i - 1].end) {
            return false;
        }
    }
    return true;
}

} // namespace duplexweave
