#include "pianoscribe/decode/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/log.hpp"

namespace pianoscribe::decode {

double clamp_probability(double p)
{
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

double fit_threshold(std::span<const acoustic::Posteriogram> posteriograms,
                     std::span<const roll::PianoRoll> truth)
{
    if (posteriograms.empty()) throw DataError("fit_threshold: empty corpus");
    if (posteriograms.size() != truth.size()) {
        throw DataError("fit_threshold: " + std::to_string(posteriograms.size()) + " posteriograms but " +
                        std::to_string(truth.size()) + " rolls");
    }
    std::vector<double> on_probs;
    std::vector<double> off_probs;
    for (std::size_t n = 0; n < posteriograms.size(); ++n) {
        const auto& pg = posteriograms[n];
        const auto& ref = truth[n];
        if (static_cast<std::size_t>(pg.pitches()) != ref.pitches()) {
            throw DimensionError("fit_threshold: posteriogram has " + std::to_string(pg.pitches()) +
                                 " pitches, roll has " + std::to_string(ref.pitches()));
        }
        const std::size_t frames = std::min(static_cast<std::size_t>(pg.frames()), ref.frames());
        if (frames != ref.frames() || frames != static_cast<std::size_t>(pg.frames())) {
            log::warn("fit_threshold: track " + std::to_string(n) + " length mismatch (" +
                      std::to_string(pg.frames()) + " vs " + std::to_string(ref.frames()) + "), truncating");
        }
        for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t p = 0; p < ref.pitches(); ++p) {
                const double v = pg.probs(static_cast<nn::Index>(t), static_cast<nn::Index>(p));
                (ref.active(t, p) ? on_probs : off_probs).push_back(v);
            }
        }
    }
    std::sort(on_probs.begin(), on_probs.end());
    std::sort(off_probs.begin(), off_probs.end());
    auto above = [](const std::vector<double>& v, double theta) {
        return static_cast<double>(v.end() - std::upper_bound(v.begin(), v.end(), theta));
    };

    double best_theta = 0.0;
    double best_f = -1.0;
    for (int j = 0; j <= 100; ++j) {
        const double theta = j / 100.0;
        const double tp = above(on_probs, theta);
        const double fp = above(off_probs, theta);
        const double fn = static_cast<double>(on_probs.size()) - tp;
        const double denom = 2.0 * tp + fp + fn;
        const double f = denom > 0.0 ? 2.0 * tp / denom : 0.0;
        if (f > best_f) {
            best_f = f;
            best_theta = theta;
        }
    }
    return best_theta;
}

roll::PianoRoll threshold_decode(const acoustic::Posteriogram& pg, double theta)
{
    const auto frames = static_cast<std::size_t>(pg.frames());
    const auto pitches = static_cast<std::size_t>(pg.pitches());
    roll::PianoRoll out(frames, pg.frame_rate, pitches);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t p = 0; p < pitches; ++p) {
            if (pg.probs(static_cast<nn::Index>(t), static_cast<nn::Index>(p)) > theta) out.set(t, p);
        }
    }
    return out;
}

std::vector<PitchHmm> fit_pitch_hmms(std::span<const roll::PianoRoll> rolls)
{
    if (rolls.empty()) throw DataError("fit_pitch_hmms: empty corpus");
    const std::size_t pitches = rolls.front().pitches();
    std::vector<double> on(pitches, 0.0);
    std::vector<std::array<std::array<double, 2>, 2>> counts(pitches, {{{0.0, 0.0}, {0.0, 0.0}}});
    double frames = 0.0;
    for (const auto& r : rolls) {
        if (r.pitches() != pitches) {
            throw DimensionError("fit_pitch_hmms: rolls have " + std::to_string(pitches) + " and " +
                                 std::to_string(r.pitches()) + " pitches");
        }
        frames += static_cast<double>(r.frames());
        for (std::size_t t = 0; t < r.frames(); ++t) {
            for (std::size_t p = 0; p < pitches; ++p) {
                const int now = r.active(t, p) ? 1 : 0;
                on[p] += now;
                if (t > 0) counts[p][r.active(t - 1, p) ? 1 : 0][now] += 1.0;
            }
        }
    }
    std::vector<PitchHmm> out(pitches);
    for (std::size_t p = 0; p < pitches; ++p) {
        out[p].prior = (on[p] + 1.0) / (frames + 2.0);
        for (int a = 0; a < 2; ++a) {
            const double row = counts[p][a][0] + counts[p][a][1];
            out[p].transition[a][1] = (counts[p][a][1] + 1.0) / (row + 2.0);
            out[p].transition[a][0] = 1.0 - out[p].transition[a][1];
        }
    }
    return out;
}

std::vector<std::uint8_t> viterbi_path(std::span<const double> probs, const PitchHmm& hmm)
{
    const std::size_t n = probs.size();
    std::vector<std::uint8_t> path(n, 0);
    if (n == 0) return path;

    const double prior = clamp_probability(hmm.prior);
    const double log_prior[2] = {std::log1p(-prior), std::log(prior)};
    double log_a[2][2];
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) log_a[a][b] = std::log(hmm.transition[a][b]);
    }
    auto emission = [&](std::size_t t, int q) {
        const double p = clamp_probability(probs[t]);
        return q == 1 ? std::log(p) - log_prior[1] : std::log1p(-p) - log_prior[0];
    };

    std::vector<std::array<std::uint8_t, 2>> back(n);
    double delta[2] = {log_prior[0] + emission(0, 0), log_prior[1] + emission(0, 1)};
    for (std::size_t t = 1; t < n; ++t) {
        double next[2];
        for (int q = 0; q < 2; ++q) {
            const double from_off = delta[0] + log_a[0][q];
            const double from_on = delta[1] + log_a[1][q];
            back[t][q] = from_on > from_off ? 1 : 0;
            next[q] = std::max(from_off, from_on) + emission(t, q);
        }
        delta[0] = next[0];
        delta[1] = next[1];
    }
    path[n - 1] = delta[1] > delta[0] ? 1 : 0;
    for (std::size_t t = n - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
    return path;
}

roll::PianoRoll hmm_decode(const acoustic::Posteriogram& pg, std::span<const PitchHmm> hmms)
{
    const auto frames = static_cast<std::size_t>(pg.frames());
    const auto pitches = static_cast<std::size_t>(pg.pitches());
    if (hmms.size() != pitches) {
        throw DimensionError("hmm_decode: posteriogram has " + std::to_string(pitches) + " pitches, " +
                             std::to_string(hmms.size()) + " HMMs given");
    }
    roll::PianoRoll out(frames, pg.frame_rate, pitches);
    std::vector<double> column(frames);
    for (std::size_t p = 0; p < pitches; ++p) {
        for (std::size_t t = 0; t < frames; ++t) {
            column[t] = pg.probs(static_cast<nn::Index>(t), static_cast<nn::Index>(p));
        }
        const auto path = viterbi_path(column, hmms[p]);
        for (std::size_t t = 0; t < frames; ++t) {
            if (path[t]) out.set(t, p);
        }
    }
    return out;
}

PitchMarginals fit_pitch_marginals(std::span<const roll::PianoRoll> rolls)
{
    if (rolls.empty()) throw DataError("fit_pitch_marginals: empty corpus");
    const std::size_t pitches = rolls.front().pitches();
    std::vector<double> on(pitches, 0.0);
    double frames = 0.0;
    for (const auto& r : rolls) {
        if (r.pitches() != pitches) {
            throw DimensionError("fit_pitch_marginals: rolls have " + std::to_string(pitches) + " and " +
                                 std::to_string(r.pitches()) + " pitches");
        }
        frames += static_cast<double>(r.frames());
        for (std::size_t t = 0; t < r.frames(); ++t) {
            for (std::size_t p = 0; p < pitches; ++p) on[p] += r.active(t, p) ? 1.0 : 0.0;
        }
    }
    PitchMarginals m;
    m.p.resize(pitches);
    for (std::size_t p = 0; p < pitches; ++p) m.p[p] = (on[p] + 1.0) / (frames + 2.0);
    return m;
}

} // namespace pianoscribe::decode
