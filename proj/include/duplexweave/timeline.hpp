#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace duplexweave {

// Equality tolerance for timestamps, in seconds.
inline constexpr double kTimeEpsilon = 1e-9;

enum class Channel { User, Assistant };

std::string_view to_string(Channel channel);
Channel other(Channel channel);

// Half-open span [start, end) in seconds.
struct TimeInterval {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
    bool contains(double t) const { return start <= t && t < end; }

    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

struct WordSpan {
    std::string text;
    double start = 0.0;
    double end = 0.0;

    friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

using SegmentList = std::vector<TimeInterval>;

// Activity timeline of one channel. Segments are sorted, disjoint and inside
// [0, duration).
struct ChannelTimeline {
    Channel channel = Channel::User;
    double duration = 0.0;
    SegmentList segments;
};

// Sorts, unions overlapping or touching intervals, clamps to [0, duration)
// and drops zero-length results.
SegmentList normalize_segments(std::span<const TimeInterval> raw, double duration);

ChannelTimeline make_timeline(Channel channel, std::span<const TimeInterval> raw, double duration);

// Maximal sub-intervals of `window` not covered by `segments`.
SegmentList complement(std::span<const TimeInterval> segments, const TimeInterval& window);

SegmentList intersect(std::span<const TimeInterval> a, std::span<const TimeInterval> b);

SegmentList unite(std::span<const TimeInterval> a, std::span<const TimeInterval> b);

// Restricts normalized segments to `window`.
SegmentList clip(std::span<const TimeInterval> segments, const TimeInterval& window);

double total_length(std::span<const TimeInterval> segments);

bool is_normalized(std::span<const TimeInterval> segments);

} // namespace duplexweave
