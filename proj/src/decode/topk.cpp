#include "pianoscribe/decode/topk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/decode/postprocess.hpp"

namespace pianoscribe::decode {

namespace {

// Slack when deciding that a heap item could still tie the best pending one.
constexpr double kCostSlack = 1e-9;
// Bound on the pending set; only reached when huge numbers of flips cost zero.
constexpr std::size_t kPendingCap = 65536;

} // namespace

bool ConfigEnumerator::CostGreater::operator()(const Subset& a, const Subset& b) const
{
    if (a.cost != b.cost) return a.cost > b.cost;
    return a.flips > b.flips;
}

bool ConfigEnumerator::Better::operator()(const Pending& a, const Pending& b) const
{
    if (a.item.log_prob != b.item.log_prob) return a.item.log_prob > b.item.log_prob;
    return a.item.config < b.item.config;
}

ConfigEnumerator::ConfigEnumerator(std::span<const double> probs)
{
    if (probs.size() > PitchSet::kCapacity) {
        throw DimensionError("top_k_configs: " + std::to_string(probs.size()) + " pitches exceed capacity " +
                             std::to_string(PitchSet::kCapacity));
    }
    const std::size_t d = probs.size();
    log_on_.resize(d);
    log_off_.resize(d);
    std::vector<double> flip_cost(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double p = clamp_probability(probs[i]);
        log_on_[i] = std::log(p);
        log_off_[i] = std::log1p(-p);
        if (p > 0.5) argmax_.set(i);
        flip_cost[i] = std::abs(log_on_[i] - log_off_[i]);
    }
    order_.resize(d);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return flip_cost[a] < flip_cost[b]; });
    cost_.resize(d);
    for (std::size_t j = 0; j < d; ++j) cost_[j] = flip_cost[order_[j]];
    heap_.push(Subset{0.0, {}});
}

void ConfigEnumerator::take_from_heap()
{
    Subset s = heap_.top();
    heap_.pop();

    // Successors: append the next flip, or move the last flip one step on.
    const std::size_t next = s.flips.empty() ? 0 : s.flips.back() + 1;
    if (next < cost_.size()) {
        Subset add = s;
        add.flips.push_back(next);
        add.cost += cost_[next];
        heap_.push(std::move(add));
        if (!s.flips.empty()) {
            Subset shift = s;
            shift.flips.back() = next;
            shift.cost += cost_[next] - cost_[next - 1];
            heap_.push(std::move(shift));
        }
    }

    PitchSet config = argmax_;
    for (std::size_t j : s.flips) config.flip(order_[j]);
    double lp = 0.0;
    for (std::size_t i = 0; i < log_on_.size(); ++i) lp += config.test(i) ? log_on_[i] : log_off_[i];
    pending_.insert(Pending{ScoredConfig{config, lp}, s.cost});
}

std::optional<ScoredConfig> ConfigEnumerator::next()
{
    if (pending_.empty()) {
        if (heap_.empty()) return std::nullopt;
        take_from_heap();
    }
    while (!heap_.empty() && pending_.size() < kPendingCap &&
           heap_.top().cost <= pending_.begin()->cost + kCostSlack) {
        take_from_heap();
    }
    ScoredConfig out = pending_.begin()->item;
    pending_.erase(pending_.begin());
    return out;
}

std::vector<ScoredConfig> top_k_configs(std::span<const double> probs, std::size_t k)
{
    ConfigEnumerator it(probs);
    std::vector<ScoredConfig> out;
    while (out.size() < k) {
        auto c = it.next();
        if (!c) break;
        out.push_back(*c);
    }
    return out;
}

} // namespace pianoscribe::decode
