#pragma once

#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <vector>

#include "pianoscribe/decode/pitch_set.hpp"

namespace pianoscribe::decode {

struct ScoredConfig {
    PitchSet config;
    double log_prob = 0.0;
};

/// Enumerates binary configurations under independent Bernoulli pitch
/// probabilities in non-increasing log-probability, without repeats. Equal
/// log-probabilities come out in PitchSet order. log_prob is always the sum
/// over pitches, in index order, of log p or log(1 - p).
///
/// Internally, subsets of bit flips away from the per-bit argmax are expanded
/// through a heap on total flip cost (add the next cheapest flip, or replace
/// the last one). A small pending set absorbs rounding differences between
/// flip-cost sums and the reported log-probabilities.
class ConfigEnumerator {
public:
    /// Probabilities are clamped into [1e-6, 1 - 1e-6].
    explicit ConfigEnumerator(std::span<const double> probs);

    std::optional<ScoredConfig> next();

private:
    struct Subset {
        double cost;
        std::vector<std::size_t> flips;  // positions in order_, ascending
    };
    struct CostGreater {
        bool operator()(const Subset& a, const Subset& b) const;
    };
    struct Pending {
        ScoredConfig item;
        double cost;
    };
    struct Better {
        bool operator()(const Pending& a, const Pending& b) const;
    };

    void take_from_heap();

    std::vector<double> log_on_;
    std::vector<double> log_off_;
    std::vector<double> cost_;        // flip cost of order_[j]
    std::vector<std::size_t> order_;  // pitch indices by ascending flip cost
    PitchSet argmax_;
    std::priority_queue<Subset, std::vector<Subset>, CostGreater> heap_;
    std::set<Pending, Better> pending_;
};

/// The first min(k, 2^D) configurations of a ConfigEnumerator.
std::vector<ScoredConfig> top_k_configs(std::span<const double> probs, std::size_t k);

} // namespace pianoscribe::decode
