#pragma once

#include <cstddef>
#include <memory>

#include "pianoscribe/decode/pitch_set.hpp"
#include "pianoscribe/mlm/rnn_nade.hpp"

namespace pianoscribe::decode {

/// Autoregressive prior over frame sequences, log P(y_t | y_<t).
class SequencePrior {
public:
    struct State {
        virtual ~State() = default;
    };
    using StatePtr = std::shared_ptr<const State>;

    virtual ~SequencePrior() = default;

    virtual std::size_t pitches() const = 0;
    virtual StatePtr initial_state() const = 0;
    virtual double log_prob(const State& state, const PitchSet& y) const = 0;
    virtual StatePtr advance(const State& state, const PitchSet& y) const = 0;
};

/// Adapts an RnnNade. The model must outlive the adapter.
class RnnNadePrior final : public SequencePrior {
public:
    explicit RnnNadePrior(const mlm::RnnNade& model) : model_(model) {}

    std::size_t pitches() const override { return static_cast<std::size_t>(model_.visible()); }
    StatePtr initial_state() const override;
    double log_prob(const State& state, const PitchSet& y) const override;
    StatePtr advance(const State& state, const PitchSet& y) const override;

private:
    struct MlmStateBox final : State {
        mlm::MlmState value;
    };

    const mlm::RnnNade& model_;
};

} // namespace pianoscribe::decode
