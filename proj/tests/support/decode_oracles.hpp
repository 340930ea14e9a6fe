#pragma once

// Brute-force references for the decoders. Nothing here calls into the search
// code; only the prior interface and plain arithmetic are used.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/decode/prior.hpp"
#include "pianoscribe/mlm/rnn_nade.hpp"

namespace oracle {

using pianoscribe::acoustic::Posteriogram;
using pianoscribe::decode::PitchSet;
using pianoscribe::decode::SequencePrior;

inline PitchSet from_code(unsigned code, std::size_t d)
{
    PitchSet s;
    for (std::size_t i = 0; i < d; ++i) s.set(i, (code >> i) & 1u);
    return s;
}

inline double clamp(double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); }

inline double bernoulli_log_prob(const std::vector<double>& probs, unsigned code)
{
    double lp = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = clamp(probs[i]);
        lp += ((code >> i) & 1u) ? std::log(p) : std::log1p(-p);
    }
    return lp;
}

inline std::vector<double> row(const Posteriogram& pg, std::size_t t)
{
    std::vector<double> r(static_cast<std::size_t>(pg.pitches()));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = pg.probs(static_cast<long>(t), static_cast<long>(i));
    return r;
}

/// Bit-pattern order: first differing pitch (lowest index) decides, 0 first.
inline bool code_less(unsigned a, unsigned b)
{
    const unsigned diff = a ^ b;
    if (diff == 0) return false;
    const unsigned low = diff & (~diff + 1u);
    return (a & low) == 0;
}

/// All 2^D configurations sorted by log-probability, ties by bit pattern.
inline std::vector<std::pair<unsigned, double>> sorted_configs(const std::vector<double>& probs)
{
    std::vector<std::pair<unsigned, double>> all;
    for (unsigned c = 0; c < (1u << probs.size()); ++c) all.emplace_back(c, bernoulli_log_prob(probs, c));
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return code_less(a.first, b.first);
    });
    return all;
}

inline double marginal_term(const std::vector<double>* marginals, unsigned code)
{
    return marginals != nullptr ? bernoulli_log_prob(*marginals, code) : 0.0;
}

struct Best {
    std::vector<unsigned> codes;
    double score = -INFINITY;
};

/// Exhaustive search over all (2^D)^T sequences.
inline Best brute_force(const Posteriogram& pg, const SequencePrior& prior, const std::vector<double>* marginals)
{
    const std::size_t d = static_cast<std::size_t>(pg.pitches());
    const std::size_t frames = static_cast<std::size_t>(pg.frames());
    const unsigned configs = 1u << d;
    Best best;
    std::vector<unsigned> codes(frames, 0);
    std::vector<SequencePrior::StatePtr> states(frames + 1);
    std::vector<double> prefix(frames + 1, 0.0);
    states[0] = prior.initial_state();
    // Odometer over sequences; prefix scores are reused where unchanged.
    std::size_t valid = 0;
    while (true) {
        for (std::size_t t = valid; t < frames; ++t) {
            const PitchSet y = from_code(codes[t], d);
            prefix[t + 1] = prefix[t] + prior.log_prob(*states[t], y) + bernoulli_log_prob(row(pg, t), codes[t]) -
                            marginal_term(marginals, codes[t]);
            states[t + 1] = prior.advance(*states[t], y);
        }
        const double score = prefix[frames];
        bool take = score > best.score;
        if (score == best.score) {
            for (std::size_t t = 0; t < frames; ++t) {
                if (codes[t] != best.codes[t]) {
                    take = code_less(codes[t], best.codes[t]);
                    break;
                }
            }
        }
        if (take) {
            best.score = score;
            best.codes = codes;
        }
        std::size_t t = frames;
        while (t > 0 && codes[t - 1] + 1 == configs) codes[--t] = 0;
        if (t == 0) break;
        ++codes[t - 1];
        valid = t - 1;
    }
    return best;
}

/// Plain beam search written independently of the library: every survivor
/// is extended by every configuration and the best `width` prefixes (score
/// descending, smaller codes first on ties) survive each frame.
inline Best reference_beam(const Posteriogram& pg, const SequencePrior& prior, const std::vector<double>* marginals,
                           std::size_t width)
{
    struct Hyp {
        std::vector<unsigned> codes;
        double score;
        SequencePrior::StatePtr state;
    };
    const std::size_t d = static_cast<std::size_t>(pg.pitches());
    std::vector<Hyp> beam{{{}, 0.0, prior.initial_state()}};
    for (std::size_t t = 0; t < static_cast<std::size_t>(pg.frames()); ++t) {
        std::vector<Hyp> next;
        for (const auto& h : beam) {
            for (unsigned c = 0; c < (1u << d); ++c) {
                const PitchSet y = from_code(c, d);
                Hyp e{h.codes, h.score + prior.log_prob(*h.state, y) + bernoulli_log_prob(row(pg, t), c) -
                                   marginal_term(marginals, c),
                      nullptr};
                e.codes.push_back(c);
                e.state = prior.advance(*h.state, y);
                next.push_back(std::move(e));
            }
        }
        std::sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) {
            if (a.score != b.score) return a.score > b.score;
            for (std::size_t i = 0; i < a.codes.size(); ++i) {
                if (a.codes[i] != b.codes[i]) return code_less(a.codes[i], b.codes[i]);
            }
            return false;
        });
        if (next.size() > width) next.resize(width);
        beam = std::move(next);
    }
    return {beam.front().codes, beam.front().score};
}

/// Rank (0 = best) of `prefix` among all sequences of its length, by prefix
/// score alone.
inline std::size_t prefix_rank(const Posteriogram& pg, const SequencePrior& prior,
                               const std::vector<double>* marginals, const std::vector<unsigned>& prefix)
{
    const std::size_t d = static_cast<std::size_t>(pg.pitches());
    const std::size_t n = prefix.size();
    auto score_of = [&](const std::vector<unsigned>& codes) {
        double s = 0.0;
        auto state = prior.initial_state();
        for (std::size_t t = 0; t < n; ++t) {
            const PitchSet y = from_code(codes[t], d);
            s += prior.log_prob(*state, y) + bernoulli_log_prob(row(pg, t), codes[t]) - marginal_term(marginals, codes[t]);
            state = prior.advance(*state, y);
        }
        return s;
    };
    const double target = score_of(prefix);
    std::size_t rank = 0;
    std::vector<unsigned> codes(n, 0);
    const unsigned configs = 1u << d;
    while (true) {
        if (score_of(codes) > target) ++rank;
        std::size_t t = n;
        while (t > 0 && codes[t - 1] + 1 == configs) codes[--t] = 0;
        if (t == 0) break;
        ++codes[t - 1];
    }
    return rank;
}

/// First-order prior over frames given by a log transition table; row
/// `configs` (one past the last code) is the initial distribution.
class FirstOrderPrior final : public SequencePrior {
public:
    FirstOrderPrior(std::size_t d, std::vector<std::vector<double>> table) : d_(d), table_(std::move(table)) {}

    static FirstOrderPrior random(std::size_t d, std::mt19937_64& rng)
    {
        const unsigned configs = 1u << d;
        std::vector<std::vector<double>> table(configs + 1, std::vector<double>(configs));
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (auto& r : table) {
            double z = 0.0;
            for (auto& x : r) {
                x = u(rng);
                z += std::exp(x);
            }
            for (auto& x : r) x -= std::log(z);
        }
        return FirstOrderPrior(d, std::move(table));
    }

    std::size_t pitches() const override { return d_; }
    StatePtr initial_state() const override { return std::make_shared<Last>(1u << d_); }
    double log_prob(const State& s, const PitchSet& y) const override
    {
        return table_[static_cast<const Last&>(s).code][code_of(y)];
    }
    StatePtr advance(const State&, const PitchSet& y) const override
    {
        return std::make_shared<Last>(code_of(y));
    }
    const std::vector<std::vector<double>>& table() const { return table_; }

private:
    struct Last final : State {
        explicit Last(unsigned c) : code(c) {}
        unsigned code;
    };
    unsigned code_of(const PitchSet& y) const
    {
        unsigned c = 0;
        for (std::size_t i = 0; i < d_; ++i) c |= y.test(i) ? (1u << i) : 0u;
        return c;
    }

    std::size_t d_;
    std::vector<std::vector<double>> table_;
};

/// Max-product dynamic programming over the 2^D-state chain.
inline Best chain_dp(const Posteriogram& pg, const FirstOrderPrior& prior, const std::vector<double>* marginals)
{
    const std::size_t d = prior.pitches();
    const unsigned configs = 1u << d;
    const std::size_t frames = static_cast<std::size_t>(pg.frames());
    const auto& table = prior.table();
    auto local = [&](std::size_t t, unsigned c) {
        return bernoulli_log_prob(row(pg, t), c) - marginal_term(marginals, c);
    };
    std::vector<std::vector<double>> delta(frames, std::vector<double>(configs));
    std::vector<std::vector<unsigned>> back(frames, std::vector<unsigned>(configs, 0));
    for (unsigned c = 0; c < configs; ++c) delta[0][c] = table[configs][c] + local(0, c);
    for (std::size_t t = 1; t < frames; ++t) {
        for (unsigned c = 0; c < configs; ++c) {
            double m = -INFINITY;
            for (unsigned p = 0; p < configs; ++p) {
                const double v = delta[t - 1][p] + table[p][c];
                if (v > m) {
                    m = v;
                    back[t][c] = p;
                }
            }
            delta[t][c] = m + local(t, c);
        }
    }
    Best best;
    best.codes.assign(frames, 0);
    unsigned arg = 0;
    for (unsigned c = 0; c < configs; ++c) {
        if (delta[frames - 1][c] > delta[frames - 1][arg]) arg = c;
    }
    best.score = delta[frames - 1][arg];
    for (std::size_t t = frames; t-- > 0;) {
        best.codes[t] = arg;
        arg = back[t][arg];
    }
    return best;
}

/// Exhaustive 2-state path search; emissions are scaled likelihoods.
inline std::vector<std::uint8_t> exhaustive_two_state(const std::vector<double>& probs, double prior,
                                                      const double transition[2][2])
{
    const std::size_t n = probs.size();
    double best = -INFINITY;
    unsigned arg = 0;
    for (unsigned path = 0; path < (1u << n); ++path) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const int q = (path >> t) & 1u;
            const double p = clamp(probs[t]);
            s += q ? std::log(p / prior) : std::log((1.0 - p) / (1.0 - prior));
            s += t == 0 ? std::log(q ? prior : 1.0 - prior) : std::log(transition[(path >> (t - 1)) & 1u][q]);
        }
        if (s > best) {
            best = s;
            arg = path;
        }
    }
    std::vector<std::uint8_t> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = (arg >> t) & 1u;
    return out;
}

/// RnnNade with every parameter drawn uniformly, bias maps included.
inline pianoscribe::mlm::RnnNade random_rnn_nade(long d, long rnn_hidden, long nade_hidden, std::mt19937_64& rng,
                                                 double scale = 1.0)
{
    pianoscribe::mlm::RnnNade m({d, rnn_hidden, nade_hidden, 1});
    m.init(rng);
    for (auto* p : m.parameters()) pianoscribe::nn::fill_uniform(p->value, scale, rng);
    return m;
}

} // namespace oracle
