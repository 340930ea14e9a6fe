#include "pianoscribe/decode/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/decode/topk.hpp"

namespace pianoscribe::decode {

namespace {

void check_dims(const acoustic::Posteriogram& pg, const SequencePrior& prior, const PitchMarginals* marginals,
                const char* who)
{
    const auto pitches = static_cast<std::size_t>(pg.pitches());
    if (pitches != prior.pitches()) {
        throw DimensionError(std::string(who) + ": posteriogram has " + std::to_string(pitches) +
                             " pitches, prior has " + std::to_string(prior.pitches()));
    }
    if (marginals != nullptr && marginals->p.size() != pitches) {
        throw DimensionError(std::string(who) + ": posteriogram has " + std::to_string(pitches) +
                             " pitches, marginals have " + std::to_string(marginals->p.size()));
    }
    if (pitches > PitchSet::kCapacity) {
        throw DimensionError(std::string(who) + ": " + std::to_string(pitches) + " pitches exceed capacity");
    }
}

double marginal_log_prob(const PitchMarginals& m, const PitchSet& y)
{
    double lp = 0.0;
    for (std::size_t i = 0; i < m.p.size(); ++i) {
        const double p = clamp_probability(m.p[i]);
        lp += y.test(i) ? std::log(p) : std::log1p(-p);
    }
    return lp;
}

std::vector<double> frame_row(const acoustic::Posteriogram& pg, std::size_t t)
{
    std::vector<double> row(static_cast<std::size_t>(pg.pitches()));
    for (std::size_t p = 0; p < row.size(); ++p) {
        row[p] = pg.probs(static_cast<nn::Index>(t), static_cast<nn::Index>(p));
    }
    return row;
}

// Frame-t candidates, before the prior term, shared by every beam entry.
struct FrameProposal {
    PitchSet config;
    double term;
};

std::vector<FrameProposal> propose(const acoustic::Posteriogram& pg, std::size_t t, std::size_t branch,
                                   const PitchMarginals* marginals)
{
    const auto row = frame_row(pg, t);
    std::vector<FrameProposal> out;
    for (const auto& c : top_k_configs(row, branch)) {
        const double term = c.log_prob - (marginals != nullptr ? marginal_log_prob(*marginals, c.config) : 0.0);
        out.push_back({c.config, term});
    }
    return out;
}

// Scores every (entry, proposal) pair, best first.
std::vector<BeamEntry> expand(const std::vector<BeamEntry>& beam, const std::vector<FrameProposal>& proposals,
                              const SequencePrior& prior, std::size_t& evaluations)
{
    std::vector<BeamEntry> candidates;
    candidates.reserve(beam.size() * proposals.size());
    for (const auto& e : beam) {
        for (const auto& prop : proposals) {
            const double score = e.score + prior.log_prob(*e.state, prop.config) + prop.term;
            ++evaluations;
            if (!std::isfinite(score)) {
                throw NumericalError("decode: non-finite candidate score");
            }
            candidates.push_back(BeamEntry{score, e.seq.push(prop.config), nullptr, e.state});
        }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const BeamEntry& a, const BeamEntry& b) { return better(a.score, a.seq, b.score, b.seq); });
    return candidates;
}

void advance_states(std::vector<BeamEntry>& beam, const SequencePrior& prior)
{
    for (auto& e : beam) e.state = prior.advance(*e.parent_state, e.seq.back());
}

DecodeResult finish(const acoustic::Posteriogram& pg, const BeamEntry& best, std::size_t evaluations)
{
    const auto frames = static_cast<std::size_t>(pg.frames());
    const auto pitches = static_cast<std::size_t>(pg.pitches());
    DecodeResult out{roll::PianoRoll(frames, pg.frame_rate, pitches), best.score, evaluations};
    const auto seq = best.seq.frames();
    for (std::size_t t = 0; t < seq.size(); ++t) {
        for (std::size_t p = 0; p < pitches; ++p) {
            if (seq[t].test(p)) out.roll.set(t, p);
        }
    }
    return out;
}

DecodeResult empty_result(const acoustic::Posteriogram& pg)
{
    return {roll::PianoRoll(0, pg.frame_rate, static_cast<std::size_t>(pg.pitches())), 0.0, 0};
}

} // namespace

double acoustic_term(const acoustic::Posteriogram& pg, std::size_t t, const PitchSet& y,
                     const PitchMarginals* marginals)
{
    double lp = 0.0;
    for (nn::Index p = 0; p < pg.pitches(); ++p) {
        const double q = clamp_probability(pg.probs(static_cast<nn::Index>(t), p));
        lp += y.test(static_cast<std::size_t>(p)) ? std::log(q) : std::log1p(-q);
    }
    if (marginals != nullptr) lp -= marginal_log_prob(*marginals, y);
    return lp;
}

DecodeResult hybrid_decode(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                           const PitchMarginals* marginals, const HybridConfig& config)
{
    check_dims(pg, prior, marginals, "hybrid_decode");
    if (config.beam_width == 0 || config.branch == 0 || config.chain == 0 || config.hash_n == 0) {
        throw ConfigError("hybrid_decode: w, K, k and hash_n must be at least 1");
    }
    const auto frames = static_cast<std::size_t>(pg.frames());
    if (frames == 0) return empty_result(pg);

    std::vector<BeamEntry> beam{BeamEntry{0.0, Sequence{}, prior.initial_state(), nullptr}};
    std::size_t evaluations = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        const auto proposals = propose(pg, t, config.branch, marginals);
        HashedBeam next(config.beam_width, config.chain, config.hash_n);
        for (auto& c : expand(beam, proposals, prior, evaluations)) next.insert(std::move(c));
        if (next.size() == 0) throw Error("hybrid_decode: beam emptied at frame " + std::to_string(t));
        beam = next.entries_best_first();
        if (t + 1 < frames) advance_states(beam, prior);
    }
    return finish(pg, beam.front(), evaluations);
}

DecodeResult hybrid_decode(const acoustic::Posteriogram& pg, const mlm::RnnNade& model,
                           const PitchMarginals* marginals, const HybridConfig& config)
{
    return hybrid_decode(pg, RnnNadePrior(model), marginals, config);
}

DecodeResult legacy_beam_decode(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                                const PitchMarginals* marginals, std::size_t width, std::size_t branch)
{
    check_dims(pg, prior, marginals, "legacy_beam_decode");
    if (width == 0 || branch == 0) throw ConfigError("legacy_beam_decode: w and K must be at least 1");
    const auto frames = static_cast<std::size_t>(pg.frames());
    if (frames == 0) return empty_result(pg);

    std::vector<BeamEntry> beam{BeamEntry{0.0, Sequence{}, prior.initial_state(), nullptr}};
    std::size_t evaluations = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        auto candidates = expand(beam, propose(pg, t, branch, marginals), prior, evaluations);
        if (candidates.size() > width) candidates.resize(width);
        beam = std::move(candidates);
        if (t + 1 < frames) advance_states(beam, prior);
    }
    return finish(pg, beam.front(), evaluations);
}

DecodeResult legacy_beam_decode(const acoustic::Posteriogram& pg, const mlm::RnnNade& model,
                                const PitchMarginals* marginals, std::size_t width, std::size_t branch)
{
    return legacy_beam_decode(pg, RnnNadePrior(model), marginals, width, branch);
}

double score_sequence(const acoustic::Posteriogram& pg, const SequencePrior& prior,
                      const PitchMarginals* marginals, const roll::PianoRoll& roll)
{
    check_dims(pg, prior, marginals, "score_sequence");
    if (roll.pitches() != static_cast<std::size_t>(pg.pitches())) {
        throw DimensionError("score_sequence: roll has " + std::to_string(roll.pitches()) +
                             " pitches, posteriogram has " + std::to_string(pg.pitches()));
    }
    if (roll.frames() != static_cast<std::size_t>(pg.frames())) {
        throw DimensionError("score_sequence: roll has " + std::to_string(roll.frames()) +
                             " frames, posteriogram has " + std::to_string(pg.frames()));
    }
    auto state = prior.initial_state();
    double total = 0.0;
    for (std::size_t t = 0; t < roll.frames(); ++t) {
        PitchSet y;
        for (std::size_t p = 0; p < roll.pitches(); ++p) y.set(p, roll.active(t, p));
        total += prior.log_prob(*state, y) + acoustic_term(pg, t, y, marginals);
        state = prior.advance(*state, y);
    }
    return total;
}

} // namespace pianoscribe::decode
