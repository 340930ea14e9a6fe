#include "pianoscribe/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/log.hpp"

namespace pianoscribe::eval {

MetricReport MetricReport::from_counts(std::size_t tp, std::size_t fp, std::size_t fn)
{
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    MetricReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.accuracy = ratio(tp, tp + fp + fn);
    r.f_measure = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

MetricReport aggregate(std::span<const MetricReport> reports)
{
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& r : reports) {
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
    }
    return MetricReport::from_counts(tp, fp, fn);
}

MetricReport frame_metrics(const roll::PianoRoll& pred, const roll::PianoRoll& truth)
{
    const double a = pred.frame_rate();
    const double b = truth.frame_rate();
    if (std::abs(a - b) > 1e-9 * std::max(a, b)) {
        throw DataError("frame rates differ (" + std::to_string(a) + " vs " + std::to_string(b) +
                        " Hz); resample the prediction first");
    }
    if (pred.pitches() != truth.pitches()) {
        throw DimensionError("pitch counts differ: " + std::to_string(pred.pitches()) + " vs " +
                             std::to_string(truth.pitches()));
    }
    const std::size_t frames = std::min(pred.frames(), truth.frames());
    if (pred.frames() != truth.frames()) {
        log::warn("frame metrics: truncating to " + std::to_string(frames) + " frames (prediction " +
                  std::to_string(pred.frames()) + ", truth " + std::to_string(truth.frames()) + ")");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t p = 0; p < pred.pitches(); ++p) {
            const bool x = pred.active(t, p);
            const bool y = truth.active(t, p);
            tp += x && y;
            fp += x && !y;
            fn += !x && y;
        }
    }
    return MetricReport::from_counts(tp, fp, fn);
}

roll::PianoRoll resample_roll(const roll::PianoRoll& in, double target_rate)
{
    if (!(target_rate > 0.0)) {
        throw ConfigError("target frame rate must be positive");
    }
    const double ratio = in.frame_rate() / target_rate;
    const double exact = static_cast<double>(in.frames()) * target_rate / in.frame_rate();
    const auto frames = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    roll::PianoRoll out(frames, target_rate, in.pitches());
    if (in.frames() == 0) {
        return out;
    }
    for (std::size_t t = 0; t < frames; ++t) {
        const auto src = std::min<std::size_t>(
            static_cast<std::size_t>(std::max(0L, std::lround(static_cast<double>(t) * ratio))), in.frames() - 1);
        for (std::size_t p = 0; p < in.pitches(); ++p) {
            if (in.active(src, p)) {
                out.set(t, p);
            }
        }
    }
    return out;
}

MetricReport note_metrics(std::span<const roll::NoteEvent> pred, std::span<const roll::NoteEvent> truth,
                          double onset_tolerance)
{
    // Slack so that decimal boundaries such as 0.55 - 0.50 still count as 50 ms.
    const double tol = onset_tolerance + 1e-9;
    std::vector<std::size_t> truth_order(truth.size());
    std::iota(truth_order.begin(), truth_order.end(), 0);
    std::stable_sort(truth_order.begin(), truth_order.end(), [&](std::size_t a, std::size_t b) {
        return truth[a].onset != truth[b].onset ? truth[a].onset < truth[b].onset : truth[a].pitch < truth[b].pitch;
    });
    std::vector<std::size_t> pred_order(pred.size());
    std::iota(pred_order.begin(), pred_order.end(), 0);
    std::stable_sort(pred_order.begin(), pred_order.end(), [&](std::size_t a, std::size_t b) {
        return pred[a].pitch != pred[b].pitch ? pred[a].pitch < pred[b].pitch : pred[a].onset < pred[b].onset;
    });

    std::vector<bool> used(pred.size(), false);
    std::size_t tp = 0;
    for (std::size_t ti : truth_order) {
        const roll::NoteEvent& note = truth[ti];
        auto first = std::lower_bound(pred_order.begin(), pred_order.end(), note.onset - tol,
                                      [&](std::size_t i, double onset) {
                                          return pred[i].pitch != note.pitch ? pred[i].pitch < note.pitch
                                                                             : pred[i].onset < onset;
                                      });
        std::size_t best = pred.size();
        double best_gap = std::numeric_limits<double>::infinity();
        for (auto it = first; it != pred_order.end(); ++it) {
            const roll::NoteEvent& cand = pred[*it];
            if (cand.pitch != note.pitch || cand.onset > note.onset + tol) {
                break;
            }
            const double gap = std::abs(cand.onset - note.onset);
            if (!used[*it] && gap <= tol && gap < best_gap) {
                best = *it;
                best_gap = gap;
            }
        }
        if (best != pred.size()) {
            used[best] = true;
            ++tp;
        }
    }
    return MetricReport::from_counts(tp, pred.size() - tp, truth.size() - tp);
}

nlohmann::json to_json(const MetricReport& r)
{
    return {{"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"precision", r.precision},
            {"recall", r.recall},
            {"accuracy", r.accuracy},
            {"f_measure", r.f_measure}};
}

namespace {

struct Totals {
    MetricReport frame;
    MetricReport note;
};

Totals corpus_totals(std::span<const TrackEvaluation> tracks)
{
    std::vector<MetricReport> frame, note;
    for (const auto& t : tracks) {
        frame.push_back(t.frame);
        note.push_back(t.note);
    }
    return {aggregate(frame), aggregate(note)};
}

void csv_row(std::ostream& out, const std::string& track, const char* level, const MetricReport& r)
{
    out << track << ',' << level << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.precision << ','
        << r.recall << ',' << r.accuracy << ',' << r.f_measure << '\n';
}

} // namespace

nlohmann::json evaluation_report(std::span<const TrackEvaluation> tracks)
{
    nlohmann::json report;
    report["tracks"] = nlohmann::json::array();
    for (const auto& t : tracks) {
        report["tracks"].push_back({{"name", t.name}, {"frame", to_json(t.frame)}, {"note", to_json(t.note)}});
    }
    const Totals totals = corpus_totals(tracks);
    report["corpus"] = {{"frame", to_json(totals.frame)}, {"note", to_json(totals.note)}};
    return report;
}

void write_evaluation_csv(std::ostream& out, std::span<const TrackEvaluation> tracks)
{
    const auto old_precision = out.precision(10);
    out << "track,level,tp,fp,fn,precision,recall,accuracy,f_measure\n";
    for (const auto& t : tracks) {
        csv_row(out, t.name, "frame", t.frame);
        csv_row(out, t.name, "note", t.note);
    }
    const Totals totals = corpus_totals(tracks);
    csv_row(out, "corpus", "frame", totals.frame);
    csv_row(out, "corpus", "note", totals.note);
    out.precision(old_precision);
}

} // namespace pianoscribe::eval
