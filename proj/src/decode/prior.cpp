#include "pianoscribe/decode/prior.hpp"

namespace pianoscribe::decode {

SequencePrior::StatePtr RnnNadePrior::initial_state() const
{
    auto box = std::make_shared<MlmStateBox>();
    box->value = model_.initial_state();
    return box;
}

double RnnNadePrior::log_prob(const State& state, const PitchSet& y) const
{
    return model_.log_prob(static_cast<const MlmStateBox&>(state).value, y.to_vector(pitches()));
}

SequencePrior::StatePtr RnnNadePrior::advance(const State& state, const PitchSet& y) const
{
    auto box = std::make_shared<MlmStateBox>();
    box->value = model_.advance(static_cast<const MlmStateBox&>(state).value, y.to_vector(pitches()));
    return box;
}

} // namespace pianoscribe::decode
