#include "pianoscribe/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "inputs.hpp"
#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"
#include "pianoscribe/common/log.hpp"
#include "pianoscribe/decode/hybrid.hpp"
#include "pianoscribe/eval/metrics.hpp"
#include "pianoscribe/features/audio.hpp"
#include "pianoscribe/mlm/rnn_nade.hpp"
#include "pianoscribe/numerics/serialize.hpp"
#include "pianoscribe/pianoroll/midi.hpp"
#include "pianoscribe/toy/toy.hpp"

namespace pianoscribe::cli {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed)
{
    if (!seed) throw ConfigError("a seed is required: pass --seed or set PS_SEED");
    return *seed;
}

void require_path(const std::string& path, const std::string& what)
{
    if (path.empty()) throw ConfigError("missing " + what);
    if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

fs::path output_path(const std::string& dir, const fs::path& input, const std::string& ext)
{
    return fs::path(dir) / (input.stem().string() + ext);
}

template <class Save>
void save_atomic(const fs::path& path, Save&& save)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_file_atomic(path, save);
}

// Optimizer overrides shared by both training commands.
struct OptimizerFlags {
    std::optional<std::string> optimizer;
    std::optional<double> learning_rate;
    std::optional<std::int64_t> decay_horizon;
    std::optional<double> clip;

    void add(CLI::App& app)
    {
        app.add_option("--optimizer", optimizer, "sgd or adadelta")->check(CLI::IsMember({"sgd", "adadelta"}));
        app.add_option("--learning-rate", learning_rate, "initial learning rate");
        app.add_option("--decay-horizon", decay_horizon, "updates until the rate reaches zero (0 keeps it constant)");
        app.add_option("--clip", clip, "gradient norm clipping threshold (0 disables)");
    }

    void apply(nn::OptimizerConfig& config) const
    {
        if (optimizer) config.kind = *optimizer == "sgd" ? nn::OptimizerKind::sgd_momentum : nn::OptimizerKind::adadelta;
        if (learning_rate) config.learning_rate = *learning_rate;
        if (decay_horizon) config.decay_horizon = *decay_horizon;
        if (clip) config.clip_norm = *clip > 0.0 ? std::optional<double>(*clip) : std::nullopt;
    }
};

void write_log(const std::string& path, const nn::TrainingLog& log)
{
    if (path.empty()) return;
    save_atomic(path, [&](std::ostream& os) { log.write_csv(os); });
}

// ---------------------------------------------------------------- extract

struct ExtractOptions {
    std::vector<std::string> inputs;
    std::string out_dir = ".";
    double frame_rate = 31.25;
    int jobs = 1;
};

int cmd_extract(const ExtractOptions& o, std::ostream& out, std::ostream& err)
{
    if (o.inputs.empty()) throw ConfigError("extract: no input files");
    std::vector<std::string> lines(o.inputs.size());
    std::vector<char> failed(o.inputs.size(), 0);
    parallel_for(o.inputs.size(), o.jobs, [&](std::size_t i) {
        const fs::path in(o.inputs[i]);
        try {
            const auto ext = extension_of(in);
            if (ext == "wav") {
                const auto feats = load_track_features(in);
                const auto dst = output_path(o.out_dir, in, ".psft");
                save_atomic(dst, [&](std::ostream& os) { features::write_features(os, feats); });
                lines[i] = in.string() + ": " + std::to_string(feats.length()) + " frames x " +
                           std::to_string(feats.dims()) + " -> " + dst.string();
            } else {
                const auto roll = load_roll_any(in, o.frame_rate);
                const auto dst = output_path(o.out_dir, in, ".pspr");
                save_atomic(dst, [&](std::ostream& os) { roll::write_roll(os, roll); });
                lines[i] = in.string() + ": " + std::to_string(roll.frames()) + " frames -> " + dst.string();
            }
        } catch (const std::exception& e) {
            failed[i] = 1;
            lines[i] = in.string() + ": error: " + e.what();
        }
    });
    for (std::size_t i = 0; i < lines.size(); ++i) (failed[i] ? err : out) << lines[i] << '\n';
    return std::ranges::count(failed, 1) > 0 ? kExitFailure : kExitOk;
}

// --------------------------------------------------------- train-acoustic

struct TrainAcousticOptions {
    std::string train, valid, out, log;
    std::optional<std::uint64_t> seed;
    std::string model = "convnet";
    std::optional<int> epochs, patience, batch_size, sequence_length, window;
    std::vector<int> hidden, fully_connected;
    std::vector<std::string> conv;
    std::optional<double> input_dropout, hidden_dropout;
    OptimizerFlags optimizer;
    int jobs = 1;
};

acoustic::ConvSpec parse_conv(const std::string& text)
{
    std::vector<nn::Index> v;
    std::istringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) {
        try {
            v.push_back(std::stol(field));
        } catch (const std::exception&) {
            v.clear();
            break;
        }
    }
    if (v.size() != 5) throw ConfigError("--conv expects channels,kernel_h,kernel_w,pool_h,pool_w, got '" + text + "'");
    return {v[0], v[1], v[2], v[3], v[4]};
}

std::vector<acoustic::LabeledTrack> load_labeled(const std::string& manifest, int jobs)
{
    const auto rows = read_manifest(manifest);
    if (rows.empty()) throw ConfigError("manifest " + manifest + " lists no tracks");
    std::vector<acoustic::LabeledTrack> tracks(rows.size());
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        if (rows[i].size() < 2) {
            throw ConfigError(manifest + ": line " + std::to_string(i + 1) + " needs a feature and a label path");
        }
        auto feats = load_track_features(rows[i][0]);
        auto truth = load_truth_roll(rows[i][1], static_cast<std::size_t>(feats.length()), feats.frame_rate);
        tracks[i] = {std::move(feats), std::move(truth)};
    });
    return tracks;
}

int cmd_train_acoustic(const TrainAcousticOptions& o, std::ostream& out)
{
    const auto seed = require_seed(o.seed);
    require_path(o.train, "training manifest (--train)");
    require_path(o.valid, "validation manifest (--valid)");
    if (o.out.empty()) throw ConfigError("missing model output path (--out)");

    const auto kind = acoustic::model_kind_from_string(o.model);
    auto train = load_labeled(o.train, o.jobs);
    auto valid = load_labeled(o.valid, o.jobs);

    std::vector<features::FeatureSequence> train_features;
    for (const auto& t : train) train_features.push_back(t.features);
    const auto standardizer = features::fit_standardizer(train_features);
    for (auto* set : {&train, &valid}) {
        for (auto& t : *set) t.features = features::apply_standardizer(t.features, standardizer);
    }

    auto config = acoustic::default_acoustic_config(kind, train.front().features.dims());
    if (!o.hidden.empty()) config.hidden.assign(o.hidden.begin(), o.hidden.end());
    if (o.window) config.window = *o.window;
    if (!o.conv.empty()) {
        config.conv.clear();
        for (const auto& c : o.conv) config.conv.push_back(parse_conv(c));
    }
    if (!o.fully_connected.empty()) config.fully_connected.assign(o.fully_connected.begin(), o.fully_connected.end());
    if (o.input_dropout) config.input_dropout = *o.input_dropout;
    if (o.hidden_dropout) config.hidden_dropout = *o.hidden_dropout;

    auto tc = acoustic::default_training_config(kind);
    o.optimizer.apply(tc.optimizer);
    if (o.epochs) tc.max_epochs = *o.epochs;
    if (o.patience) tc.patience = *o.patience;
    if (o.batch_size) tc.batch_size = *o.batch_size;
    if (o.sequence_length) tc.sequence_length = *o.sequence_length;
    tc.seed = seed;

    const auto start = Clock::now();
    auto result = acoustic::train_acoustic(config, train, valid, tc);
    result.model.standardizer = standardizer;

    std::vector<acoustic::Posteriogram> valid_pg;
    std::vector<roll::PianoRoll> valid_truth;
    for (const auto& t : valid) {
        valid_pg.push_back(result.model.predict(t.features));
        valid_truth.push_back(t.roll);
    }
    const double threshold = decode::fit_threshold(valid_pg, valid_truth);

    auto container = acoustic::to_container(result.model);
    store_threshold(container, threshold);
    save_atomic(o.out, [&](std::ostream& os) { nn::write_container(os, container); });
    write_log(o.log, result.log);

    const auto& best = result.log.epochs.at(static_cast<std::size_t>(result.log.best_epoch));
    out << "trained " << o.model << " for " << result.log.epochs.size() << " epochs in " << std::fixed
        << std::setprecision(1) << seconds_since(start) << " s; best epoch " << result.log.best_epoch
        << " valid nll " << std::setprecision(4) << best.valid_nll << "; threshold " << std::setprecision(2)
        << threshold << '\n';
    return kExitOk;
}

// -------------------------------------------------------------- train-mlm

struct TrainMlmOptions {
    std::string train, valid, out, log;
    std::optional<std::uint64_t> seed;
    long rnn_hidden = 200, nade_hidden = 150;
    int layers = 1;
    double frame_rate = 31.25;
    std::optional<int> epochs, patience, batch_size, sequence_length;
    OptimizerFlags optimizer;
    int jobs = 1;
};

std::vector<roll::PianoRoll> load_rolls(const std::string& manifest, double frame_rate, int jobs)
{
    const auto rows = read_manifest(manifest);
    if (rows.empty()) throw ConfigError("manifest " + manifest + " lists no tracks");
    std::vector<roll::PianoRoll> rolls(rows.size());
    // The label is the last column, so acoustic manifests can be reused.
    parallel_for(rows.size(), jobs, [&](std::size_t i) { rolls[i] = load_roll_any(rows[i].back(), frame_rate); });
    return rolls;
}

int cmd_train_mlm(const TrainMlmOptions& o, std::ostream& out)
{
    const auto seed = require_seed(o.seed);
    require_path(o.train, "training manifest (--train)");
    require_path(o.valid, "validation manifest (--valid)");
    if (o.out.empty()) throw ConfigError("missing model output path (--out)");

    const auto train = load_rolls(o.train, o.frame_rate, o.jobs);
    const auto valid = load_rolls(o.valid, o.frame_rate, o.jobs);

    mlm::RnnNadeConfig mc{static_cast<nn::Index>(train.front().pitches()), o.rnn_hidden, o.nade_hidden, o.layers};
    mlm::MlmTrainingConfig tc;
    o.optimizer.apply(tc.optimizer);
    if (o.epochs) tc.max_epochs = *o.epochs;
    if (o.patience) tc.patience = *o.patience;
    if (o.batch_size) tc.batch_size = *o.batch_size;
    if (o.sequence_length) tc.sequence_length = *o.sequence_length;
    tc.seed = seed;

    const auto start = Clock::now();
    const auto result = mlm::train_mlm(train, valid, mc, tc);
    auto container = mlm::to_container(result.model);
    store_statistics(container, {decode::fit_pitch_marginals(train), decode::fit_pitch_hmms(train)});
    save_atomic(o.out, [&](std::ostream& os) { nn::write_container(os, container); });
    write_log(o.log, result.log);

    const auto& best = result.log.epochs.at(static_cast<std::size_t>(result.log.best_epoch));
    out << "trained RNN-NADE for " << result.log.epochs.size() << " epochs in " << std::fixed << std::setprecision(1)
        << seconds_since(start) << " s; best epoch " << result.log.best_epoch << " valid nll "
        << std::setprecision(4) << best.valid_nll << '\n';
    return kExitOk;
}

// ----------------------------------------------------------------- decode

struct DecodeOptions {
    std::vector<std::string> inputs;
    std::string acoustic_model, mlm_model, out_dir = ".";
    std::string post = "hybrid";
    std::optional<double> threshold;
    std::size_t beam_width = 10, branch = 4, chain = 2;
    std::string hash_n = "1";
    bool no_marginal = false;
    bool save_posteriogram = false;
    int jobs = 1;
};

std::size_t parse_hash_n(const std::string& text)
{
    if (text == "full") return decode::kFullSequence;
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used == text.size() && v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("--hash-n expects a positive frame count or 'full', got '" + text + "'");
}

struct LoadedAcoustic {
    acoustic::AcousticModel model;
    std::optional<double> threshold;
};

LoadedAcoustic load_acoustic(const std::string& path)
{
    const auto container = nn::load_container(path);
    return {acoustic::acoustic_model_from_container(container), stored_threshold(container)};
}

struct LoadedMlm {
    mlm::RnnNade model;
    std::optional<PitchStatistics> stats;
};

LoadedMlm load_mlm(const std::string& path)
{
    const auto container = nn::load_container(path);
    return {mlm::rnn_nade_from_container(container), stored_statistics(container)};
}

acoustic::Posteriogram posteriogram_for(const fs::path& input, const LoadedAcoustic* am)
{
    if (extension_of(input) == "pspg") return acoustic::load_posteriogram(input);
    if (!am) throw ConfigError(input.string() + ": decoding features or audio needs --acoustic");
    const auto feats = load_track_features(input);
    const auto expected = am->model.config().input_dim;
    if (feats.dims() != expected) {
        throw DimensionError(input.string() + ": features have " + std::to_string(feats.dims()) +
                             " dims but the acoustic model expects " + std::to_string(expected));
    }
    return acoustic::predict_posteriogram(am->model, feats);
}

// log P_a(roll | x) under independent pitches.
double acoustic_log_likelihood(const acoustic::Posteriogram& pg, const roll::PianoRoll& roll)
{
    double total = 0.0;
    for (std::size_t t = 0; t < roll.frames(); ++t) {
        for (std::size_t p = 0; p < roll.pitches(); ++p) {
            const double q = decode::clamp_probability(pg.probs(static_cast<nn::Index>(t), static_cast<nn::Index>(p)));
            total += roll.active(t, p) ? std::log(q) : std::log1p(-q);
        }
    }
    return total;
}

int cmd_decode(const DecodeOptions& o, std::ostream& out)
{
    if (o.inputs.empty()) throw ConfigError("decode: no input files");
    decode::HybridConfig hc{o.beam_width, o.branch, o.chain, parse_hash_n(o.hash_n)};
    if (hc.beam_width == 0 || hc.branch == 0 || hc.chain == 0) {
        throw ConfigError("--beam-width, --branch and --chain must be positive");
    }

    std::optional<LoadedAcoustic> am;
    if (!o.acoustic_model.empty()) am = load_acoustic(o.acoustic_model);
    std::optional<LoadedMlm> lm;
    if (!o.mlm_model.empty()) lm = load_mlm(o.mlm_model);

    const decode::PitchMarginals* marginals = nullptr;
    if (o.post == "hybrid") {
        if (!lm) throw ConfigError("--post hybrid needs --mlm");
        if (!o.no_marginal) {
            if (!lm->stats) throw ConfigError("MLM file carries no pitch statistics; pass --no-marginal");
            marginals = &lm->stats->marginals;
        }
    } else if (o.post == "hmm") {
        if (!lm || !lm->stats) throw ConfigError("--post hmm needs --mlm with stored pitch statistics");
    }
    const double theta = o.threshold ? *o.threshold : (am && am->threshold ? *am->threshold : 0.5);

    struct Outcome {
        std::size_t frames = 0;
        double score = 0.0;
        double seconds = 0.0;
    };
    std::vector<Outcome> outcomes(o.inputs.size());
    const auto start = Clock::now();
    parallel_for(o.inputs.size(), o.jobs, [&](std::size_t i) {
        const fs::path in(o.inputs[i]);
        const auto pg = posteriogram_for(in, am ? &*am : nullptr);
        const auto t0 = Clock::now();
        roll::PianoRoll roll;
        double score = 0.0;
        if (o.post == "threshold") {
            roll = decode::threshold_decode(pg, theta);
            score = acoustic_log_likelihood(pg, roll);
        } else if (o.post == "hmm") {
            roll = decode::hmm_decode(pg, lm->stats->hmms);
            score = acoustic_log_likelihood(pg, roll);
        } else {
            auto r = decode::hybrid_decode(pg, lm->model, marginals, hc);
            roll = std::move(r.roll);
            score = r.score;
        }
        outcomes[i] = {roll.frames(), score, seconds_since(t0)};
        const auto events = roll::roll_to_events(roll);
        save_atomic(output_path(o.out_dir, in, ".pspr"), [&](std::ostream& os) { roll::write_roll(os, roll); });
        save_atomic(output_path(o.out_dir, in, ".csv"), [&](std::ostream& os) { roll::write_events_csv(os, events); });
        if (o.save_posteriogram && extension_of(in) != "pspg") {
            save_atomic(output_path(o.out_dir, in, ".pspg"),
                        [&](std::ostream& os) { acoustic::write_posteriogram(os, pg); });
        }
    });

    double total = 0.0;
    out << std::setprecision(10);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        out << o.inputs[i] << ": " << outcomes[i].frames << " frames, log score " << outcomes[i].score << ", "
            << std::fixed << std::setprecision(3) << outcomes[i].seconds << " s" << std::defaultfloat
            << std::setprecision(10) << '\n';
        total += outcomes[i].score;
    }
    out << "total log score " << total << ", wall time " << std::fixed << std::setprecision(3)
        << seconds_since(start) << " s\n"
        << std::defaultfloat;
    return kExitOk;
}

// --------------------------------------------------------------- evaluate

struct EvaluateOptions {
    std::vector<std::string> pred, truth;
    std::string report, csv;
    double frame_rate = 100.0;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out)
{
    if (o.pred.empty()) throw ConfigError("evaluate: no prediction files");
    if (o.pred.size() != o.truth.size()) {
        throw ConfigError("evaluate: " + std::to_string(o.pred.size()) + " prediction files but " +
                          std::to_string(o.truth.size()) + " truth files");
    }
    std::vector<eval::TrackEvaluation> tracks;
    for (std::size_t i = 0; i < o.pred.size(); ++i) {
        const fs::path pred_path(o.pred[i]), truth_path(o.truth[i]);
        const bool pred_is_roll = extension_of(pred_path) == "pspr";
        const bool truth_is_roll = extension_of(truth_path) == "pspr";
        const auto pred_notes = load_notes_any(pred_path);
        const auto truth_notes = load_notes_any(truth_path);

        roll::PianoRoll pred_roll, truth_roll;
        if (truth_is_roll) {
            truth_roll = roll::load_roll(truth_path);
            pred_roll = pred_is_roll ? roll::load_roll(pred_path)
                                     : load_truth_roll(pred_path, truth_roll.frames(), truth_roll.frame_rate());
            if (pred_roll.frame_rate() != truth_roll.frame_rate()) {
                pred_roll = eval::resample_roll(pred_roll, truth_roll.frame_rate());
            }
        } else if (pred_is_roll) {
            pred_roll = roll::load_roll(pred_path);
            truth_roll = load_truth_roll(truth_path, pred_roll.frames(), pred_roll.frame_rate());
        } else {
            double end = 0.0;
            for (const auto& n : pred_notes) end = std::max(end, n.offset);
            for (const auto& n : truth_notes) end = std::max(end, n.offset);
            pred_roll = roll::events_to_roll(pred_notes, o.frame_rate, end);
            truth_roll = roll::events_to_roll(truth_notes, o.frame_rate, end);
        }
        tracks.push_back({pred_path.stem().string(), eval::frame_metrics(pred_roll, truth_roll),
                          eval::note_metrics(pred_notes, truth_notes)});
    }

    const auto report = eval::evaluation_report(tracks);
    if (!o.report.empty()) save_atomic(o.report, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    if (!o.csv.empty()) save_atomic(o.csv, [&](std::ostream& os) { eval::write_evaluation_csv(os, tracks); });

    auto row = [&](const std::string& name, const char* level, const eval::MetricReport& r) {
        out << std::left << std::setw(24) << name << std::setw(6) << level << std::right << std::fixed
            << std::setprecision(4) << " P " << r.precision << " R " << r.recall << " A " << r.accuracy << " F "
            << r.f_measure << "  tp " << r.tp << " fp " << r.fp << " fn " << r.fn << '\n';
    };
    std::vector<eval::MetricReport> frames, notes;
    for (const auto& t : tracks) {
        row(t.name, "frame", t.frame);
        row(t.name, "note", t.note);
        frames.push_back(t.frame);
        notes.push_back(t.note);
    }
    row("corpus", "frame", eval::aggregate(frames));
    row("corpus", "note", eval::aggregate(notes));
    out << std::defaultfloat;
    return kExitOk;
}

// ------------------------------------------------------------- bench-beam

struct BenchOptions {
    std::vector<std::string> posteriograms, truth;
    std::string mlm_model, out;
    std::vector<std::size_t> widths{1, 2, 5, 10, 20, 50, 100};
    std::vector<std::string> decoders{"hashed", "legacy"};
    std::size_t branch = 4, chain = 2;
    std::string hash_n = "1";
    bool no_marginal = false;
};

int cmd_bench_beam(const BenchOptions& o, std::ostream& out)
{
    if (o.posteriograms.empty()) throw ConfigError("bench-beam: no posteriograms");
    if (o.posteriograms.size() != o.truth.size()) {
        throw ConfigError("bench-beam: " + std::to_string(o.posteriograms.size()) + " posteriograms but " +
                          std::to_string(o.truth.size()) + " truth files");
    }
    if (o.mlm_model.empty()) throw ConfigError("bench-beam needs --mlm");
    const auto lm = load_mlm(o.mlm_model);
    const decode::PitchMarginals* marginals = nullptr;
    if (!o.no_marginal) {
        if (!lm.stats) throw ConfigError("MLM file carries no pitch statistics; pass --no-marginal");
        marginals = &lm.stats->marginals;
    }
    const std::size_t hash_n = parse_hash_n(o.hash_n);

    std::vector<acoustic::Posteriogram> pgs;
    std::vector<roll::PianoRoll> truth;
    std::vector<std::vector<roll::NoteEvent>> truth_notes;
    for (std::size_t i = 0; i < o.posteriograms.size(); ++i) {
        pgs.push_back(acoustic::load_posteriogram(o.posteriograms[i]));
        truth.push_back(load_truth_roll(o.truth[i], static_cast<std::size_t>(pgs.back().frames()),
                                        pgs.back().frame_rate));
        truth_notes.push_back(roll::roll_to_events(truth.back()));
    }

    std::ostringstream csv;
    csv << "decoder,beam_width,frame_f,note_f,wall_seconds,prior_evaluations\n";
    for (const auto& decoder : o.decoders) {
        if (decoder != "hashed" && decoder != "legacy") throw ConfigError("unknown decoder " + decoder);
        for (const std::size_t w : o.widths) {
            if (w == 0) throw ConfigError("beam widths must be positive");
            std::vector<eval::MetricReport> frame, note;
            std::size_t evaluations = 0;
            const auto start = Clock::now();
            for (std::size_t i = 0; i < pgs.size(); ++i) {
                const auto r = decoder == "hashed"
                                   ? decode::hybrid_decode(pgs[i], lm.model, marginals, {w, o.branch, o.chain, hash_n})
                                   : decode::legacy_beam_decode(pgs[i], lm.model, marginals, w, o.branch);
                evaluations += r.prior_evaluations;
                frame.push_back(eval::frame_metrics(r.roll, truth[i]));
                note.push_back(eval::note_metrics(roll::roll_to_events(r.roll), truth_notes[i]));
            }
            const double wall = seconds_since(start);
            std::ostringstream line;
            line << decoder << ',' << w << ',' << std::setprecision(6) << eval::aggregate(frame).f_measure << ','
                 << eval::aggregate(note).f_measure << ',' << wall << ',' << evaluations;
            csv << line.str() << '\n';
            out << line.str() << '\n';
        }
    }
    if (!o.out.empty()) save_atomic(o.out, [&](std::ostream& os) { os << csv.str(); });
    return kExitOk;
}

// ---------------------------------------------------------------- gen-toy

struct GenToyOptions {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t tracks = toy::ToyConfig{}.tracks;
    double duration = toy::ToyConfig{}.duration;
    double noise = toy::ToyConfig{}.noise_level;
    double valid_fraction = 0.1, test_fraction = 0.2;
    int jobs = 1;
};

int cmd_gen_toy(const GenToyOptions& o, std::ostream& out)
{
    if (o.out_dir.empty()) throw ConfigError("gen-toy needs --out-dir");
    if (o.valid_fraction < 0.0 || o.test_fraction < 0.0 || o.valid_fraction + o.test_fraction >= 1.0) {
        throw ConfigError("validation and test fractions must be non-negative and sum below 1");
    }
    toy::ToyConfig config;
    config.tracks = o.tracks;
    config.duration = o.duration;
    config.noise_level = o.noise;
    config.seed = o.seed.value_or(config.seed);
    const auto corpus = toy::generate_toy_corpus(config);

    const fs::path root(o.out_dir);
    parallel_for(corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& track = corpus[i];
        save_atomic(root / "audio" / (track.name + ".wav"),
                    [&](std::ostream& os) { features::write_wav(os, track.audio); });
        const auto midi = roll::events_to_midi(track.notes);
        save_atomic(root / "midi" / (track.name + ".mid"), [&](std::ostream& os) {
            os.write(reinterpret_cast<const char*>(midi.data()), static_cast<std::streamsize>(midi.size()));
        });
    });

    const auto n = corpus.size();
    const auto n_test = static_cast<std::size_t>(std::llround(o.test_fraction * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(o.valid_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_test - n_valid;
    auto write_split = [&](const std::string& name, std::size_t begin, std::size_t end) {
        save_atomic(root / name, [&](std::ostream& os) {
            for (std::size_t i = begin; i < end; ++i) {
                os << "audio/" << corpus[i].name << ".wav midi/" << corpus[i].name << ".mid\n";
            }
        });
    };
    write_split("train.txt", 0, n_train);
    write_split("valid.txt", n_train, n_train + n_valid);
    write_split("test.txt", n_train + n_valid, n);
    out << "wrote " << n << " tracks to " << root.string() << " (" << n_train << " train, " << n_valid << " valid, "
        << n_test << " test)\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Polyphonic piano transcription with a hybrid acoustic and language model", "pianoscribe"};
    app.set_config("--config", "", "TOML configuration file; command-line flags take precedence");
    app.require_subcommand(1);

    auto add_seed = [](CLI::App& sub, std::optional<std::uint64_t>& seed) {
        sub.add_option("--seed", seed, "random seed")->envname("PS_SEED");
    };

    ExtractOptions ex;
    auto* extract = app.add_subcommand("extract", "WAV to PSFT features, MIDI or note CSV to PSPR rolls");
    extract->add_option("inputs", ex.inputs, "input files");
    extract->add_option("--out-dir", ex.out_dir, "output directory");
    extract->add_option("--frame-rate", ex.frame_rate, "roll frame rate for MIDI inputs");
    extract->add_option("--jobs", ex.jobs, "parallel tracks")->check(CLI::PositiveNumber);

    TrainAcousticOptions ta;
    auto* train_acoustic = app.add_subcommand("train-acoustic", "train a DNN, RNN or ConvNet acoustic model");
    train_acoustic->add_option("--train", ta.train, "manifest of 'features label' lines");
    train_acoustic->add_option("--valid", ta.valid, "validation manifest");
    train_acoustic->add_option("--out", ta.out, "model file");
    train_acoustic->add_option("--log", ta.log, "per-epoch CSV log");
    add_seed(*train_acoustic, ta.seed);
    train_acoustic->add_option("--model", ta.model, "architecture")->check(CLI::IsMember({"dnn", "rnn", "convnet"}));
    train_acoustic->add_option("--epochs", ta.epochs, "maximum epochs");
    train_acoustic->add_option("--patience", ta.patience, "early stopping patience");
    train_acoustic->add_option("--batch-size", ta.batch_size, "frames per batch (sequences for the RNN)");
    train_acoustic->add_option("--sequence-length", ta.sequence_length, "RNN subsequence length");
    train_acoustic->add_option("--hidden", ta.hidden, "DNN/RNN hidden layer sizes");
    train_acoustic->add_option("--window", ta.window, "ConvNet context window (odd)");
    train_acoustic->add_option("--conv", ta.conv, "ConvNet layer as channels,kernel_h,kernel_w,pool_h,pool_w");
    train_acoustic->add_option("--fc", ta.fully_connected, "ConvNet fully connected sizes");
    train_acoustic->add_option("--input-dropout", ta.input_dropout, "input dropout rate");
    train_acoustic->add_option("--hidden-dropout", ta.hidden_dropout, "hidden dropout rate");
    ta.optimizer.add(*train_acoustic);
    train_acoustic->add_option("--jobs", ta.jobs, "parallel feature loading")->check(CLI::PositiveNumber);

    TrainMlmOptions tm;
    auto* train_mlm = app.add_subcommand("train-mlm", "train the RNN-NADE language model on piano rolls");
    train_mlm->add_option("--train", tm.train, "manifest whose last column is a roll, MIDI or note CSV");
    train_mlm->add_option("--valid", tm.valid, "validation manifest");
    train_mlm->add_option("--out", tm.out, "model file");
    train_mlm->add_option("--log", tm.log, "per-epoch CSV log");
    add_seed(*train_mlm, tm.seed);
    train_mlm->add_option("--rnn-hidden", tm.rnn_hidden, "recurrent units");
    train_mlm->add_option("--nade-hidden", tm.nade_hidden, "NADE hidden units");
    train_mlm->add_option("--layers", tm.layers, "recurrent layers");
    train_mlm->add_option("--frame-rate", tm.frame_rate, "roll frame rate for MIDI or CSV labels");
    train_mlm->add_option("--epochs", tm.epochs, "maximum epochs");
    train_mlm->add_option("--patience", tm.patience, "early stopping patience");
    train_mlm->add_option("--batch-size", tm.batch_size, "subsequences per update");
    train_mlm->add_option("--sequence-length", tm.sequence_length, "BPTT subsequence length");
    tm.optimizer.add(*train_mlm);
    train_mlm->add_option("--jobs", tm.jobs, "parallel roll loading")->check(CLI::PositiveNumber);

    DecodeOptions de;
    auto* dec = app.add_subcommand("decode", "transcribe posteriograms, features or audio");
    dec->add_option("inputs", de.inputs, "PSPG, PSFT or WAV files");
    dec->add_option("--acoustic", de.acoustic_model, "acoustic model (needed for features or audio)");
    dec->add_option("--mlm", de.mlm_model, "language model with pitch statistics");
    dec->add_option("--out-dir", de.out_dir, "output directory");
    dec->add_option("--post", de.post, "post-processing")->check(CLI::IsMember({"threshold", "hmm", "hybrid"}));
    dec->add_option("--threshold", de.threshold, "decision threshold (default: stored in the acoustic model)");
    dec->add_option("--beam-width", de.beam_width, "beam width w");
    dec->add_option("--branch", de.branch, "candidates per entry K");
    dec->add_option("--chain", de.chain, "entries kept per hash key k");
    dec->add_option("--hash-n", de.hash_n, "frames hashed, or 'full'");
    dec->add_flag("--no-marginal", de.no_marginal, "drop the pitch marginal correction");
    dec->add_flag("--save-posteriogram", de.save_posteriogram, "also write PSPG for feature or audio inputs");
    dec->add_option("--jobs", de.jobs, "parallel tracks")->check(CLI::PositiveNumber);

    EvaluateOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "frame and note metrics against ground truth");
    evaluate->add_option("--pred", ev.pred, "predicted PSPR rolls or note CSVs");
    evaluate->add_option("--truth", ev.truth, "ground truth PSPR, MIDI or note CSV, same order");
    evaluate->add_option("--report", ev.report, "JSON report");
    evaluate->add_option("--csv", ev.csv, "CSV report");
    evaluate->add_option("--frame-rate", ev.frame_rate, "frame rate when both sides are note lists");

    BenchOptions be;
    auto* bench = app.add_subcommand("bench-beam", "sweep beam widths for hashed and legacy decoding");
    bench->add_option("--posteriogram", be.posteriograms, "PSPG files");
    bench->add_option("--truth", be.truth, "ground truth per posteriogram");
    bench->add_option("--mlm", be.mlm_model, "language model");
    bench->add_option("--out", be.out, "CSV output");
    bench->add_option("--widths", be.widths, "beam widths")->delimiter(',');
    bench->add_option("--decoders", be.decoders, "hashed and/or legacy")->delimiter(',');
    bench->add_option("--branch", be.branch, "candidates per entry K");
    bench->add_option("--chain", be.chain, "entries kept per hash key k");
    bench->add_option("--hash-n", be.hash_n, "frames hashed, or 'full'");
    bench->add_flag("--no-marginal", be.no_marginal, "drop the pitch marginal correction");

    GenToyOptions gt;
    auto* gen = app.add_subcommand("gen-toy", "render the synthetic harmonic-tone corpus");
    gen->add_option("--out-dir", gt.out_dir, "output directory");
    add_seed(*gen, gt.seed);
    gen->add_option("--tracks", gt.tracks, "number of tracks");
    gen->add_option("--duration", gt.duration, "seconds per track");
    gen->add_option("--noise", gt.noise, "white noise level");
    gen->add_option("--valid-fraction", gt.valid_fraction, "share of tracks for validation");
    gen->add_option("--test-fraction", gt.test_fraction, "share of tracks held out for testing");
    gen->add_option("--jobs", gt.jobs, "parallel writers")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        // Help and version requests exit 0; everything else is a usage error.
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    auto warnings = log::set_warning_sink([&err](const std::string& m) { err << "warning: " << m << '\n'; });
    int code = kExitOk;
    try {
        if (extract->parsed()) code = cmd_extract(ex, out, err);
        else if (train_acoustic->parsed()) code = cmd_train_acoustic(ta, out);
        else if (train_mlm->parsed()) code = cmd_train_mlm(tm, out);
        else if (dec->parsed()) code = cmd_decode(de, out);
        else if (evaluate->parsed()) code = cmd_evaluate(ev, out);
        else if (bench->parsed()) code = cmd_bench_beam(be, out);
        else if (gen->parsed()) code = cmd_gen_toy(gt, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        code = kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kExitFailure;
    }
    log::set_warning_sink(std::move(warnings));
    return code;
}

} // namespace pianoscribe::cli
