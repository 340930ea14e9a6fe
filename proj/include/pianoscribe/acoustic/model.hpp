#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pianoscribe/acoustic/posteriogram.hpp"
#include "pianoscribe/features/features.hpp"
#include "pianoscribe/numerics/layers.hpp"
#include "pianoscribe/numerics/optimizer.hpp"
#include "pianoscribe/numerics/serialize.hpp"
#include "pianoscribe/numerics/training.hpp"
#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::acoustic {

enum class ModelKind { dnn, rnn, convnet };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

struct ConvSpec {
    nn::Index channels = 50;
    nn::Index kernel_h = 5;  // time
    nn::Index kernel_w = 25; // frequency
    nn::Index pool_h = 1;
    nn::Index pool_w = 3;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct AcousticConfig {
    ModelKind kind = ModelKind::dnn;
    nn::Index input_dim = 252;
    nn::Index output_dim = 88;
    /// Hidden widths of the DNN or the recurrent stack.
    std::vector<nn::Index> hidden{125, 125, 125};
    /// Activation of DNN hidden layers and ConvNet fully connected layers.
    nn::Activation hidden_activation = nn::Activation::sigmoid;
    int window = 7;
    std::vector<ConvSpec> conv{{50, 5, 25, 1, 3}, {50, 3, 5, 1, 3}};
    nn::Activation conv_activation = nn::Activation::tanh;
    std::vector<nn::Index> fully_connected{1000, 200};
    double input_dropout = 0.0;
    /// Applied to every hidden representation, conv maps included.
    double hidden_dropout = 0.0;

    friend bool operator==(const AcousticConfig&, const AcousticConfig&) = default;
};

/// Best-performing sizes per kind, with the dropout each recipe trains with.
AcousticConfig default_acoustic_config(ModelKind kind, nn::Index input_dim = 252);

struct MapShape {
    nn::Index channels = 0;
    nn::Index height = 0;
    nn::Index width = 0;
};

/// A feature sequence with its aligned binary targets.
struct LabeledTrack {
    features::FeatureSequence features;
    roll::PianoRoll roll;
};

struct FrameRef {
    std::size_t track = 0;
    nn::Index frame = 0;
};

class AcousticModel {
public:
    AcousticModel() = default;
    /// Throws ConfigError on inconsistent sizes, including conv maps smaller
    /// than their kernels.
    explicit AcousticModel(AcousticConfig config);

    const AcousticConfig& config() const { return config_; }
    void init(nn::Rng& rng);

    /// Map shape after each conv layer (pooling included), ConvNet only.
    std::vector<MapShape> conv_shapes() const;
    nn::Index parameter_count() const;

    /// T x output logits. DNN is frame-wise, RNN runs left to right from a
    /// zero state, ConvNet sees zero-padded context windows.
    nn::Matrix logits(const features::FeatureSequence& fs) const;
    Posteriogram predict(const features::FeatureSequence& fs) const;

    /// Summed Bernoulli NLL of the referenced frames; adds its gradient.
    /// DNN and ConvNet only. Dropout is applied when `dropout` is non-null.
    double accumulate_gradient(std::span<const LabeledTrack> data, std::span<const FrameRef> batch,
                               nn::Rng* dropout);
    /// Summed NLL over a T x D input and T x P target block; adds its
    /// gradient. RNN only; the state starts at zero.
    double accumulate_sequence_gradient(const nn::Matrix& inputs, const nn::Matrix& targets);

    nn::ParameterList parameters();

    std::vector<nn::ConvLayer> conv;
    std::vector<nn::RecurrentLayer> recurrent;
    /// Hidden dense layers followed by the sigmoid output layer.
    std::vector<nn::DenseLayer> dense;

    /// Feature normalization the model was trained with, if any.
    std::optional<features::Standardizer> standardizer;

private:
    nn::Matrix conv_logits(const nn::Matrix& frames) const;

    AcousticConfig config_;
};

/// Prediction from raw features: applies the stored standardizer first.
Posteriogram predict_posteriogram(const AcousticModel& model, const features::FeatureSequence& fs);

struct AcousticTrainingConfig {
    nn::OptimizerConfig optimizer{nn::OptimizerKind::adadelta, 1.0, 0, 0.9, std::nullopt};
    int max_epochs = 200;
    int patience = 20;
    int batch_size = 100;       // frames, or subsequences for the RNN
    int sequence_length = 100;  // RNN subsequence length
    std::uint64_t seed = 1;
};

/// Per-kind optimizer recipe: ADADELTA with batches of 100 for the DNN;
/// momentum SGD at 0.001 decaying over 1000 updates, clipped at 5, on
/// subsequences of 100 for the RNN; momentum SGD at 0.01 with batches of 256
/// for the ConvNet.
AcousticTrainingConfig default_training_config(ModelKind kind);

struct AcousticTrainingResult {
    AcousticModel model;
    nn::TrainingLog log;
};

/// Minimizes mean per-frame summed Bernoulli NLL. The returned model is the
/// best validation epoch; with no validation tracks the training loss is
/// tracked instead. Throws DataError when labels and features disagree in
/// length.
AcousticTrainingResult train_acoustic(const AcousticConfig& model_config, std::span<const LabeledTrack> train,
                                      std::span<const LabeledTrack> valid, const AcousticTrainingConfig& config);

/// Mean per-frame NLL (nats) over whole tracks.
double mean_frame_nll(const AcousticModel& model, std::span<const LabeledTrack> tracks);

nn::ModelContainer to_container(const AcousticModel& model);
AcousticModel acoustic_model_from_container(const nn::ModelContainer& container);
void save_acoustic_model(const std::filesystem::path& path, const AcousticModel& model);
AcousticModel load_acoustic_model(const std::filesystem::path& path);

} // namespace pianoscribe::acoustic
