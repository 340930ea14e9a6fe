#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pianoscribe/mlm/nade.hpp"
#include "pianoscribe/numerics/layers.hpp"
#include "pianoscribe/numerics/optimizer.hpp"
#include "pianoscribe/numerics/serialize.hpp"
#include "pianoscribe/numerics/training.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::mlm {

struct RnnNadeConfig {
    nn::Index visible = 88;
    nn::Index rnn_hidden = 200;
    nn::Index nade_hidden = 150;
    int layers = 1;
};

/// Recurrent state for one hypothesis. `hidden` holds every recurrent layer
/// after consuming the frames so far; the conditional biases it implies are
/// cached alongside.
struct MlmState {
    std::vector<nn::Vector> hidden;
    nn::Vector last;
    nn::Vector bias_v;
    nn::Vector bias_h;
};

/// NADE whose biases at step t are b_v + W1 h_t and b_h + W2 h_t, where h_t is
/// the top recurrent layer after reading y_0 .. y_{t-1} (zero at t = 0).
class RnnNade {
public:
    RnnNade() = default;
    explicit RnnNade(RnnNadeConfig config);

    const RnnNadeConfig& config() const { return config_; }
    nn::Index visible() const { return config_.visible; }

    /// Seeded initialization. The bias maps W1 and W2 start at zero.
    void init(nn::Rng& rng);

    MlmState initial_state() const;
    MlmState advance(const MlmState& state, const nn::Vector& y) const;
    /// Consumes the columns of `frames` in one unrolled pass.
    MlmState advance_sequence(const MlmState& state, const nn::Matrix& frames) const;
    Nade conditional(const MlmState& state) const;
    /// log P(y | state) without materializing the conditional Nade.
    double log_prob(const MlmState& state, const nn::Vector& y) const;

    /// Sum over t of log P(y_t | y_<t) for the columns of `frames` (D x T),
    /// computed by unrolling the recurrence over the whole sequence at once.
    double sequence_log_prob(const nn::Matrix& frames) const;

    /// Adds the gradient of the summed sequence NLL into the parameter
    /// gradients and returns that NLL.
    double accumulate_gradient(const nn::Matrix& frames);

    nn::ParameterList parameters();

    std::vector<nn::RecurrentLayer> rnn;
    nn::Parameter W;    // H x D
    nn::Parameter V;    // D x H
    nn::Parameter b_h;  // H x 1
    nn::Parameter b_v;  // D x 1
    nn::Parameter W1;   // D x H_rnn
    nn::Parameter W2;   // H x H_rnn

private:
    void cache_biases(MlmState& state) const;

    RnnNadeConfig config_;
};

inline MlmState mlm_initial_state(const RnnNade& m) { return m.initial_state(); }
inline Nade mlm_conditional(const RnnNade& m, const MlmState& s) { return m.conditional(s); }
inline MlmState mlm_advance(const RnnNade& m, const MlmState& s, const nn::Vector& y) { return m.advance(s, y); }

/// Piano roll as a D x T matrix of 0/1 columns.
nn::Matrix roll_columns(const roll::PianoRoll& roll);

struct MlmTrainingConfig {
    nn::OptimizerConfig optimizer{nn::OptimizerKind::sgd_momentum, 0.001, 1000, 0.9, 5.0};
    int max_epochs = 500;
    int patience = 20;
    int sequence_length = 100;
    int batch_size = 10;  // subsequences per update
    std::uint64_t seed = 1;
};

struct MlmTrainingResult {
    RnnNade model;
    nn::TrainingLog log;
};

/// BPTT training on fixed-length subsequences (state reset at each one),
/// minimizing mean per-frame NLL. Validation runs over whole rolls; the
/// returned model is the best validation epoch. With no validation rolls the
/// training loss drives early stopping. Training also ends once the learning
/// rate schedule reaches zero.
MlmTrainingResult train_mlm(std::span<const roll::PianoRoll> train, std::span<const roll::PianoRoll> valid,
                            const RnnNadeConfig& model_config, const MlmTrainingConfig& config);

/// Mean per-frame NLL (nats) over whole rolls.
double mean_frame_nll(const RnnNade& model, std::span<const roll::PianoRoll> rolls);

nn::ModelContainer to_container(const RnnNade& model);
RnnNade rnn_nade_from_container(const nn::ModelContainer& container);
void save_rnn_nade(const std::filesystem::path& path, const RnnNade& model);
RnnNade load_rnn_nade(const std::filesystem::path& path);

} // namespace pianoscribe::mlm
