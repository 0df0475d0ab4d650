#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "duplexweave/timeline.hpp"

namespace duplexweave {

inline constexpr double kEvalTauIpu = 0.2;

enum class EventKind { Ipu = 0, Pause = 1, Gap = 2, Overlap = 3 };
inline constexpr std::array<EventKind, 4> kEventKinds{EventKind::Ipu, EventKind::Pause, EventKind::Gap,
                                                      EventKind::Overlap};
std::string_view to_string(EventKind kind);

enum class Statistic { Occurrence = 0, CumulativeDuration = 1, AveragedDuration = 2 };
inline constexpr std::array<Statistic, 3> kStatistics{Statistic::Occurrence, Statistic::CumulativeDuration,
                                                      Statistic::AveragedDuration};
std::string_view to_string(Statistic stat);

struct TurnTakingEvent {
    EventKind kind = EventKind::Ipu;
    TimeInterval span;
    std::optional<Channel> attributed_channel;  // Ipu and Pause only

    friend bool operator==(const TurnTakingEvent&, const TurnTakingEvent&) = default;
};

struct DialogueEvents {
    TimeInterval window;
    std::vector<TurnTakingEvent> events;  // sorted by start, then kind
    // Joint silence touching a window edge; not flanked by two IPUs.
    SegmentList unclassified;
};

DialogueEvents extract_events(const ChannelTimeline& user, const ChannelTimeline& assistant,
                              const TimeInterval& window, double tau_ipu_eval = kEvalTauIpu);

// Durations that tile the window exactly.
struct WindowPartition {
    double user_only = 0.0;
    double assistant_only = 0.0;
    double overlap = 0.0;
    double pause = 0.0;
    double gap = 0.0;
    double unclassified = 0.0;

    double total() const { return user_only + assistant_only + overlap + pause + gap + unclassified; }
};

WindowPartition partition(const DialogueEvents& events);

struct KindStats {
    std::size_t occurrence = 0;
    double cumulative_duration = 0.0;
    double averaged_duration = 0.0;

    double value(Statistic stat) const;
};

struct EventStats {
    std::array<KindStats, 4> per_kind{};

    const KindStats& operator[](EventKind kind) const { return per_kind[static_cast<std::size_t>(kind)]; }
    KindStats& operator[](EventKind kind) { return per_kind[static_cast<std::size_t>(kind)]; }
};

EventStats summarize(const DialogueEvents& events);

// Sample Pearson coefficient; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

enum class OverallMode {
    StatisticMean,  // mean of the three per-statistic averages
    CellMean,       // mean of every defined cell
};

struct CorrelationReport {
    std::size_t dialogues = 0;
    // cells[statistic][kind]
    std::array<std::array<std::optional<double>, 4>, 3> cells{};
    std::array<std::optional<double>, 3> statistic_average{};
    std::optional<double> overall;
    std::size_t undefined_cells = 0;
    OverallMode mode = OverallMode::StatisticMean;

    std::optional<double> cell(Statistic stat, EventKind kind) const {
        return cells[static_cast<std::size_t>(stat)][static_cast<std::size_t>(kind)];
    }
};

// One (prompt, continuation) pair per dialogue.
CorrelationReport correlate_corpus(std::span<const std::pair<EventStats, EventStats>> dialogues,
                                   OverallMode mode = OverallMode::StatisticMean);

} // namespace duplexweave
