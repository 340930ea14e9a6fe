#include "pianoscribe/acoustic/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/numerics/loss.hpp"

namespace pianoscribe::acoustic {

using nn::Index;
using nn::Matrix;

namespace {

// Frames per ConvNet inference chunk; bounds the im2col buffers.
constexpr Index kConvChunk = 256;

std::string dims_str(Index h, Index w)
{
    return std::to_string(h) + "x" + std::to_string(w);
}

void apply_mask(Matrix& m, const Matrix& mask)
{
    m.array() *= mask.array();
}

// Zero-padded window x D maps for the given frames of one sequence.
nn::FeatureMaps window_maps(const nn::Matrix& frames, std::span<const Index> centres, int window)
{
    const Index k = (window - 1) / 2;
    const Index d = frames.cols();
    nn::FeatureMaps maps(1, window, d, static_cast<Index>(centres.size()));
    for (Index n = 0; n < maps.count; ++n) {
        for (Index r = 0; r < window; ++r) {
            const Index src = centres[static_cast<std::size_t>(n)] - k + r;
            if (src < 0 || src >= frames.rows()) continue;
            maps.data.block(0, n * maps.cells() + r * d, 1, d) = frames.row(src);
        }
    }
    return maps;
}

Matrix flatten(const nn::FeatureMaps& maps)
{
    return Eigen::Map<const Matrix>(maps.data.data(), maps.channels * maps.cells(), maps.count);
}

nn::FeatureMaps unflatten(const Matrix& flat, const MapShape& shape, Index count)
{
    nn::FeatureMaps maps(shape.channels, shape.height, shape.width, count);
    maps.data = Eigen::Map<const Matrix>(flat.data(), shape.channels, count * shape.height * shape.width);
    return maps;
}

Matrix targets_of(const roll::PianoRoll& r)
{
    Matrix y(static_cast<Index>(r.frames()), static_cast<Index>(r.pitches()));
    for (std::size_t t = 0; t < r.frames(); ++t) {
        for (std::size_t p = 0; p < r.pitches(); ++p) {
            y(static_cast<Index>(t), static_cast<Index>(p)) = r.active(t, p) ? 1.0 : 0.0;
        }
    }
    return y;
}

} // namespace

std::string_view to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::dnn: return "dnn";
    case ModelKind::rnn: return "rnn";
    case ModelKind::convnet: return "convnet";
    }
    return "dnn";
}

ModelKind model_kind_from_string(std::string_view name)
{
    if (name == "dnn") return ModelKind::dnn;
    if (name == "rnn") return ModelKind::rnn;
    if (name == "convnet") return ModelKind::convnet;
    throw ConfigError("unknown acoustic model kind '" + std::string(name) + "' (expected dnn, rnn or convnet)");
}

AcousticConfig default_acoustic_config(ModelKind kind, Index input_dim)
{
    AcousticConfig c;
    c.kind = kind;
    c.input_dim = input_dim;
    switch (kind) {
    case ModelKind::dnn:
        c.hidden = {125, 125, 125};
        c.input_dropout = 0.3;
        c.hidden_dropout = 0.3;
        break;
    case ModelKind::rnn:
        c.hidden = {200, 200};
        break;
    case ModelKind::convnet:
        c.hidden.clear();
        c.hidden_dropout = 0.5;
        break;
    }
    return c;
}

AcousticModel::AcousticModel(AcousticConfig config) : config_(std::move(config))
{
    const AcousticConfig& c = config_;
    if (c.input_dim < 1 || c.output_dim < 1) throw ConfigError("acoustic model input and output sizes must be positive");
    for (double r : {c.input_dropout, c.hidden_dropout}) {
        if (r < 0.0 || r >= 1.0) throw ConfigError("dropout rates must lie in [0, 1)");
    }
    auto check_widths = [](const std::vector<Index>& widths, const char* what) {
        for (Index w : widths) {
            if (w < 1) throw ConfigError(std::string(what) + " widths must be positive");
        }
    };

    Index in = c.input_dim;
    switch (c.kind) {
    case ModelKind::dnn:
        check_widths(c.hidden, "hidden layer");
        for (Index h : c.hidden) {
            dense.emplace_back(in, h, c.hidden_activation);
            in = h;
        }
        break;
    case ModelKind::rnn:
        if (c.hidden.empty()) throw ConfigError("RNN needs at least one recurrent layer");
        check_widths(c.hidden, "recurrent layer");
        for (Index h : c.hidden) {
            recurrent.emplace_back(in, h);
            in = h;
        }
        break;
    case ModelKind::convnet: {
        if (c.window < 1 || c.window % 2 == 0) {
            throw ConfigError("ConvNet window must be a positive odd frame count, got " + std::to_string(c.window));
        }
        if (c.conv.empty()) throw ConfigError("ConvNet needs at least one conv layer");
        check_widths(c.fully_connected, "fully connected layer");
        (void)conv_shapes();  // validates the map arithmetic
        Index channels = 1;
        for (const ConvSpec& s : c.conv) {
            conv.emplace_back(channels, s.channels, s.kernel_h, s.kernel_w, s.pool_h, s.pool_w, c.conv_activation);
            channels = s.channels;
        }
        const MapShape last = conv_shapes().back();
        in = last.channels * last.height * last.width;
        for (Index h : c.fully_connected) {
            dense.emplace_back(in, h, c.hidden_activation);
            in = h;
        }
        break;
    }
    }
    dense.emplace_back(in, c.output_dim, nn::Activation::sigmoid);
}

std::vector<MapShape> AcousticModel::conv_shapes() const
{
    std::vector<MapShape> out;
    if (config_.kind != ModelKind::convnet) return out;
    Index h = config_.window;
    Index w = config_.input_dim;
    for (std::size_t i = 0; i < config_.conv.size(); ++i) {
        const ConvSpec& s = config_.conv[i];
        if (s.channels < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.pool_h < 1 || s.pool_w < 1) {
            throw ConfigError("conv layer " + std::to_string(i + 1) + " has a non-positive size");
        }
        if (h < s.kernel_h || w < s.kernel_w) {
            throw ConfigError("conv layer " + std::to_string(i + 1) + " kernel " + dims_str(s.kernel_h, s.kernel_w) +
                              " exceeds its input map " + dims_str(h, w));
        }
        h = (h - s.kernel_h + 1) / s.pool_h;
        w = (w - s.kernel_w + 1) / s.pool_w;
        if (h < 1 || w < 1) {
            throw ConfigError("conv layer " + std::to_string(i + 1) + " pooling " + dims_str(s.pool_h, s.pool_w) +
                              " leaves an empty map");
        }
        out.push_back({s.channels, h, w});
    }
    return out;
}

void AcousticModel::init(nn::Rng& rng)
{
    for (auto& l : conv) l.init(rng);
    for (auto& l : recurrent) l.init(rng);
    for (auto& l : dense) l.init(rng);
}

nn::ParameterList AcousticModel::parameters()
{
    nn::ParameterList out;
    for (auto& l : conv) {
        for (auto* p : l.parameters()) out.push_back(p);
    }
    for (auto& l : recurrent) {
        for (auto* p : l.parameters()) out.push_back(p);
    }
    for (auto& l : dense) {
        for (auto* p : l.parameters()) out.push_back(p);
    }
    return out;
}

Index AcousticModel::parameter_count() const
{
    return nn::parameter_count(const_cast<AcousticModel*>(this)->parameters());
}

Matrix AcousticModel::conv_logits(const Matrix& frames) const
{
    const Index total = frames.rows();
    Matrix out(config_.output_dim, total);
    std::vector<Index> centres;
    for (Index start = 0; start < total; start += kConvChunk) {
        const Index n = std::min(kConvChunk, total - start);
        centres.resize(static_cast<std::size_t>(n));
        std::iota(centres.begin(), centres.end(), start);
        nn::FeatureMaps maps = window_maps(frames, centres, config_.window);
        for (const auto& l : conv) maps = l.forward(maps);
        Matrix a = flatten(maps);
        for (std::size_t i = 0; i + 1 < dense.size(); ++i) a = dense[i].forward(a);
        out.middleCols(start, n) = dense.back().pre_activation(a);
    }
    return out;
}

Matrix AcousticModel::logits(const features::FeatureSequence& fs) const
{
    if (fs.dims() != config_.input_dim) {
        throw DimensionError("acoustic model expects " + std::to_string(config_.input_dim) +
                             "-dimensional features, got " + std::to_string(fs.dims()));
    }
    if (fs.length() == 0) return Matrix(0, config_.output_dim);
    Matrix z;
    switch (config_.kind) {
    case ModelKind::dnn: {
        Matrix a = fs.frames.transpose();
        for (std::size_t i = 0; i + 1 < dense.size(); ++i) a = dense[i].forward(a);
        z = dense.back().pre_activation(a);
        break;
    }
    case ModelKind::rnn: {
        Matrix a = fs.frames.transpose();
        for (const auto& l : recurrent) a = l.forward_sequence(a, nn::Vector::Zero(l.hidden_size()));
        z = dense.back().pre_activation(a);
        break;
    }
    case ModelKind::convnet:
        z = conv_logits(fs.frames);
        break;
    }
    return z.transpose();
}

Posteriogram AcousticModel::predict(const features::FeatureSequence& fs) const
{
    Posteriogram pg;
    pg.probs = nn::sigmoid(logits(fs));
    pg.frame_rate = fs.frame_rate;
    return pg;
}

Posteriogram predict_posteriogram(const AcousticModel& model, const features::FeatureSequence& fs)
{
    if (!model.standardizer) return model.predict(fs);
    return model.predict(features::apply_standardizer(fs, *model.standardizer));
}

double AcousticModel::accumulate_gradient(std::span<const LabeledTrack> data, std::span<const FrameRef> batch,
                                          nn::Rng* dropout)
{
    if (config_.kind == ModelKind::rnn) throw ConfigError("RNN gradients are computed per sequence");
    const auto n = static_cast<Index>(batch.size());
    Matrix targets(config_.output_dim, n);
    for (Index i = 0; i < n; ++i) {
        const FrameRef& f = batch[static_cast<std::size_t>(i)];
        const auto& r = data[f.track].roll;
        for (Index p = 0; p < config_.output_dim; ++p) {
            targets(p, i) = r.active(static_cast<std::size_t>(f.frame), static_cast<std::size_t>(p)) ? 1.0 : 0.0;
        }
    }
    auto mask = [&](Index rows, Index cols, double rate) {
        return dropout != nullptr ? nn::dropout_mask(rows, cols, rate, *dropout) : Matrix::Ones(rows, cols);
    };

    // Input representation, with conv layers run first for the ConvNet.
    Matrix input;
    std::vector<nn::FeatureMaps> conv_in;
    std::vector<nn::ConvLayer::Cache> conv_cache(conv.size());
    std::vector<Matrix> conv_masks;
    MapShape last_shape;
    if (config_.kind == ModelKind::dnn) {
        input.resize(config_.input_dim, n);
        for (Index i = 0; i < n; ++i) {
            const FrameRef& f = batch[static_cast<std::size_t>(i)];
            input.col(i) = data[f.track].features.frames.row(f.frame).transpose();
        }
        apply_mask(input, mask(input.rows(), input.cols(), config_.input_dropout));
    } else {
        nn::FeatureMaps maps(1, config_.window, config_.input_dim, n);
        for (Index i = 0; i < n; ++i) {
            const FrameRef& f = batch[static_cast<std::size_t>(i)];
            const Index centre[1] = {f.frame};
            maps.data.middleCols(i * maps.cells(), maps.cells()) =
                window_maps(data[f.track].features.frames, centre, config_.window).data;
        }
        apply_mask(maps.data, mask(maps.data.rows(), maps.data.cols(), config_.input_dropout));
        for (std::size_t l = 0; l < conv.size(); ++l) {
            conv_in.push_back(maps);
            maps = conv[l].forward(maps, &conv_cache[l]);
            conv_masks.push_back(mask(maps.data.rows(), maps.data.cols(), config_.hidden_dropout));
            apply_mask(maps.data, conv_masks.back());
        }
        last_shape = {maps.channels, maps.height, maps.width};
        input = flatten(maps);
    }

    // Dense stack.
    std::vector<Matrix> in(dense.size());
    std::vector<Matrix> out(dense.size() - 1);
    std::vector<Matrix> masks(dense.size() - 1);
    in[0] = std::move(input);
    for (std::size_t l = 0; l + 1 < dense.size(); ++l) {
        out[l] = dense[l].forward(in[l]);
        masks[l] = mask(out[l].rows(), out[l].cols(), config_.hidden_dropout);
        in[l + 1] = out[l].cwiseProduct(masks[l]);
    }
    const Matrix z = dense.back().pre_activation(in.back());
    const double nll = nn::bernoulli_nll_from_logits(z, targets);

    Matrix g = dense.back().backward_pre(in.back(), nn::sigmoid(z) - targets);
    for (std::size_t l = dense.size() - 1; l-- > 0;) {
        g = dense[l].backward(in[l], out[l], g.cwiseProduct(masks[l]));
    }
    if (config_.kind == ModelKind::convnet) {
        nn::FeatureMaps gm = unflatten(g, last_shape, n);
        for (std::size_t l = conv.size(); l-- > 0;) {
            apply_mask(gm.data, conv_masks[l]);
            gm = conv[l].backward(conv_cache[l], gm);
        }
    }
    return nll;
}

double AcousticModel::accumulate_sequence_gradient(const Matrix& inputs, const Matrix& targets)
{
    if (config_.kind != ModelKind::rnn) throw ConfigError("sequence gradients are only defined for the RNN");
    if (inputs.cols() != config_.input_dim || targets.cols() != config_.output_dim ||
        inputs.rows() != targets.rows()) {
        throw DimensionError("RNN gradient: inputs " + dims_str(inputs.rows(), inputs.cols()) + " and targets " +
                             dims_str(targets.rows(), targets.cols()) + " do not fit the model");
    }
    std::vector<Matrix> xs{inputs.transpose()};
    for (const auto& l : recurrent) xs.push_back(l.forward_sequence(xs.back(), nn::Vector::Zero(l.hidden_size())));
    const Matrix y = targets.transpose();
    const Matrix z = dense.back().pre_activation(xs.back());
    const double nll = nn::bernoulli_nll_from_logits(z, y);
    Matrix g = dense.back().backward_pre(xs.back(), nn::sigmoid(z) - y);
    for (std::size_t l = recurrent.size(); l-- > 0;) {
        g = recurrent[l].backward_sequence(xs[l], xs[l + 1], nn::Vector::Zero(recurrent[l].hidden_size()), g);
    }
    return nll;
}

AcousticTrainingConfig default_training_config(ModelKind kind)
{
    AcousticTrainingConfig c;
    switch (kind) {
    case ModelKind::dnn:
        c.optimizer = {nn::OptimizerKind::adadelta, 1.0, 0, 0.9, std::nullopt};
        c.batch_size = 100;
        break;
    case ModelKind::rnn:
        c.optimizer = {nn::OptimizerKind::sgd_momentum, 0.001, 1000, 0.9, 5.0};
        c.batch_size = 10;
        c.sequence_length = 100;
        break;
    case ModelKind::convnet:
        c.optimizer = {nn::OptimizerKind::sgd_momentum, 0.01, 10000, 0.9, std::nullopt};
        c.batch_size = 256;
        break;
    }
    return c;
}

double mean_frame_nll(const AcousticModel& model, std::span<const LabeledTrack> tracks)
{
    double nll = 0.0;
    Index frames = 0;
    for (const auto& t : tracks) {
        nll += nn::bernoulli_nll_from_logits(model.logits(t.features), targets_of(t.roll));
        frames += t.features.length();
    }
    return frames == 0 ? 0.0 : nll / static_cast<double>(frames);
}

AcousticTrainingResult train_acoustic(const AcousticConfig& model_config, std::span<const LabeledTrack> train,
                                      std::span<const LabeledTrack> valid, const AcousticTrainingConfig& config)
{
    if (train.empty()) throw DataError("acoustic training corpus is empty");
    if (config.batch_size < 1 || config.sequence_length < 1) {
        throw ConfigError("batch size and sequence length must be positive");
    }
    auto check = [&](const LabeledTrack& t, const char* set, std::size_t i) {
        const std::string item = std::string(set) + " item " + std::to_string(i);
        if (static_cast<std::size_t>(t.features.length()) != t.roll.frames()) {
            throw DataError(item + ": " + std::to_string(t.features.length()) + " feature frames but " +
                            std::to_string(t.roll.frames()) + " label frames");
        }
        if (t.features.dims() != model_config.input_dim) {
            throw DimensionError(item + ": features have " + std::to_string(t.features.dims()) +
                                 " dimensions, model expects " + std::to_string(model_config.input_dim));
        }
        if (static_cast<Index>(t.roll.pitches()) != model_config.output_dim) {
            throw DimensionError(item + ": labels have " + std::to_string(t.roll.pitches()) +
                                 " pitches, model expects " + std::to_string(model_config.output_dim));
        }
    };
    for (std::size_t i = 0; i < train.size(); ++i) check(train[i], "training", i);
    for (std::size_t i = 0; i < valid.size(); ++i) check(valid[i], "validation", i);

    nn::Rng rng(config.seed);
    AcousticTrainingResult result{AcousticModel(model_config), {}};
    AcousticModel& model = result.model;
    model.init(rng);
    AcousticModel best = model;
    nn::Optimizer optimizer(config.optimizer);
    nn::EarlyStopping stopping(config.patience);
    const nn::ParameterList params = model.parameters();

    // Units of shuffling: single frames, or (track, start) subsequences.
    std::vector<FrameRef> units;
    const bool recurrent = model_config.kind == ModelKind::rnn;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const Index frames = train[i].features.length();
        const Index step = recurrent ? config.sequence_length : 1;
        for (Index t = 0; t < frames; t += step) units.push_back({i, t});
    }
    if (units.empty()) throw DataError("acoustic training tracks contain no frames");
    std::vector<Matrix> targets;
    if (recurrent) {
        for (const auto& t : train) targets.push_back(targets_of(t.roll));
    }

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(units.begin(), units.end(), rng);
        double train_nll = 0.0;
        Index train_frames = 0;
        for (std::size_t begin = 0; begin < units.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(units.size(), begin + static_cast<std::size_t>(config.batch_size));
            nn::zero_grads(params);
            double batch_nll = 0.0;
            Index batch_frames = 0;
            if (recurrent) {
                for (std::size_t u = begin; u < end; ++u) {
                    const FrameRef& f = units[u];
                    const Index len = std::min<Index>(config.sequence_length, train[f.track].features.length() - f.frame);
                    batch_nll += model.accumulate_sequence_gradient(
                        train[f.track].features.frames.middleRows(f.frame, len),
                        targets[f.track].middleRows(f.frame, len));
                    batch_frames += len;
                }
            } else {
                batch_nll = model.accumulate_gradient(train, std::span(units).subspan(begin, end - begin), &rng);
                batch_frames = static_cast<Index>(end - begin);
            }
            if (!std::isfinite(batch_nll)) {
                throw NumericalError("acoustic training loss is not finite at epoch " + std::to_string(epoch));
            }
            for (nn::Parameter* p : params) {
                p->grad /= static_cast<double>(batch_frames);
                nn::require_finite(p->grad, "gradient of " + p->name + " at epoch " + std::to_string(epoch));
            }
            optimizer.step(params);
            train_nll += batch_nll;
            train_frames += batch_frames;
        }
        const double mean_train = train_nll / static_cast<double>(train_frames);
        const double mean_valid = valid.empty() ? mean_train : mean_frame_nll(model, valid);
        if (!std::isfinite(mean_valid)) {
            throw NumericalError("acoustic validation loss is not finite at epoch " + std::to_string(epoch));
        }
        if (stopping.update(mean_valid)) best = model;
        result.log.epochs.push_back({epoch, mean_train, mean_valid, stopping.best()});
        if (stopping.should_stop()) {
            result.log.stopped_early = true;
            break;
        }
        if (config.optimizer.decay_horizon > 0 && optimizer.iteration() >= config.optimizer.decay_horizon) break;
    }
    result.log.best_epoch = stopping.best_epoch();
    result.model = std::move(best);
    return result;
}

// ------------------------------------------------------------- serialization

nn::ModelContainer to_container(const AcousticModel& model)
{
    const AcousticConfig& c = model.config();
    nlohmann::json conv = nlohmann::json::array();
    for (const auto& s : c.conv) conv.push_back({s.channels, s.kernel_h, s.kernel_w, s.pool_h, s.pool_w});
    nlohmann::json header{{"model", "acoustic"},
                          {"kind", to_string(c.kind)},
                          {"input_dim", c.input_dim},
                          {"output_dim", c.output_dim},
                          {"hidden", c.hidden},
                          {"hidden_activation", nn::to_string(c.hidden_activation)},
                          {"window", c.window},
                          {"conv", conv},
                          {"conv_activation", nn::to_string(c.conv_activation)},
                          {"fully_connected", c.fully_connected},
                          {"input_dropout", c.input_dropout},
                          {"hidden_dropout", c.hidden_dropout}};
    if (model.standardizer) {
        const auto& s = *model.standardizer;
        header["standardizer"] = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                                  {"stddev", std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size())}};
    }
    nn::ModelContainer out;
    out.header = header.dump();
    for (const auto& l : model.conv) {
        out.layers.push_back({nn::LayerTag::conv, {nn::to_blob(l.kernels.value), nn::to_blob(l.bias.value)}});
    }
    for (const auto& l : model.recurrent) {
        out.layers.push_back({nn::LayerTag::recurrent,
                              {nn::to_blob(l.input_weight.value), nn::to_blob(l.recurrent_weight.value),
                               nn::to_blob(l.bias.value)}});
    }
    for (const auto& l : model.dense) {
        out.layers.push_back({nn::LayerTag::dense, {nn::to_blob(l.weight.value), nn::to_blob(l.bias.value)}});
    }
    return out;
}

AcousticModel acoustic_model_from_container(const nn::ModelContainer& container)
{
    AcousticConfig c;
    std::optional<features::Standardizer> standardizer;
    try {
        const auto h = nlohmann::json::parse(container.header);
        if (h.at("model") != "acoustic") {
            throw FormatError("model file holds a " + h.at("model").get<std::string>() + ", not an acoustic model");
        }
        c.kind = model_kind_from_string(h.at("kind").get<std::string>());
        c.input_dim = h.at("input_dim").get<Index>();
        c.output_dim = h.at("output_dim").get<Index>();
        c.hidden = h.at("hidden").get<std::vector<Index>>();
        c.hidden_activation = nn::activation_from_string(h.at("hidden_activation").get<std::string>());
        c.window = h.at("window").get<int>();
        c.conv.clear();
        for (const auto& s : h.at("conv")) {
            const auto v = s.get<std::vector<Index>>();
            if (v.size() != 5) throw FormatError("conv layer spec needs 5 integers");
            c.conv.push_back({v[0], v[1], v[2], v[3], v[4]});
        }
        c.conv_activation = nn::activation_from_string(h.at("conv_activation").get<std::string>());
        c.fully_connected = h.at("fully_connected").get<std::vector<Index>>();
        c.input_dropout = h.at("input_dropout").get<double>();
        c.hidden_dropout = h.at("hidden_dropout").get<double>();
        if (h.contains("standardizer")) {
            const auto mean = h.at("standardizer").at("mean").get<std::vector<double>>();
            const auto sd = h.at("standardizer").at("stddev").get<std::vector<double>>();
            standardizer = features::Standardizer{Eigen::Map<const nn::Vector>(mean.data(), static_cast<Index>(mean.size())),
                                                  Eigen::Map<const nn::Vector>(sd.data(), static_cast<Index>(sd.size()))};
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad acoustic model header: ") + e.what());
    }
    AcousticModel model(c);
    model.standardizer = std::move(standardizer);
    const std::size_t expected = model.conv.size() + model.recurrent.size() + model.dense.size();
    if (container.layers.size() != expected) {
        throw FormatError("acoustic model file has " + std::to_string(container.layers.size()) +
                          " layers, expected " + std::to_string(expected));
    }
    std::size_t next = 0;
    auto take = [&](nn::LayerTag tag, std::initializer_list<nn::Parameter*> params) {
        const auto& blob = container.layers[next++];
        if (blob.tag != tag || blob.tensors.size() != params.size()) {
            throw FormatError("unexpected layer layout in acoustic model file at layer " + std::to_string(next - 1));
        }
        std::size_t i = 0;
        for (nn::Parameter* p : params) {
            p->value = nn::from_blob(blob.tensors[i++], p->value.rows(), p->value.cols());
        }
    };
    for (auto& l : model.conv) take(nn::LayerTag::conv, {&l.kernels, &l.bias});
    for (auto& l : model.recurrent) take(nn::LayerTag::recurrent, {&l.input_weight, &l.recurrent_weight, &l.bias});
    for (auto& l : model.dense) take(nn::LayerTag::dense, {&l.weight, &l.bias});
    return model;
}

void save_acoustic_model(const std::filesystem::path& path, const AcousticModel& model)
{
    nn::save_container(path, to_container(model));
}

AcousticModel load_acoustic_model(const std::filesystem::path& path)
{
    return acoustic_model_from_container(nn::load_container(path));
}

} // namespace pianoscribe::acoustic
