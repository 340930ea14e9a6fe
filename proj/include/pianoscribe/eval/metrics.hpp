#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::eval {

struct MetricReport {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f_measure = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    /// Ratios from raw counts; an empty denominator gives 0.
    static MetricReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

/// Sums counts, then recomputes ratios (micro aggregation).
MetricReport aggregate(std::span<const MetricReport> reports);

/// Micro-averaged frame metrics over all frames and pitches. Rolls of
/// different length are compared over the shorter one, with a warning;
/// different frame rates raise DataError asking for resample_roll.
MetricReport frame_metrics(const roll::PianoRoll& pred, const roll::PianoRoll& truth);

/// Nearest-frame hold: output frame t copies input frame
/// round(t * in_rate / out_rate), clamped. Output length covers the same
/// duration, ceil(T * out_rate / in_rate).
roll::PianoRoll resample_roll(const roll::PianoRoll& roll, double target_rate);

inline constexpr double kOnsetTolerance = 0.050;

/// Onset-only note matching. Truth notes are visited in (onset, pitch) order
/// and each claims the nearest unmatched prediction of the same pitch whose
/// onset lies within the tolerance (inclusive; ties go to the earlier
/// prediction).
MetricReport note_metrics(std::span<const roll::NoteEvent> pred, std::span<const roll::NoteEvent> truth,
                          double onset_tolerance = kOnsetTolerance);

struct TrackEvaluation {
    std::string name;
    MetricReport frame;
    MetricReport note;
};

nlohmann::json to_json(const MetricReport& r);
/// Per-track rows plus corpus totals for frame and note level.
nlohmann::json evaluation_report(std::span<const TrackEvaluation> tracks);
/// One row per track and level, then the corpus rows.
void write_evaluation_csv(std::ostream& out, std::span<const TrackEvaluation> tracks);

} // namespace pianoscribe::eval
