#include "pianoscribe/mlm/rnn_nade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::mlm {

using nn::Index;
using nn::Matrix;
using nn::Vector;

RnnNade::RnnNade(RnnNadeConfig config)
    : W("nade.W", config.nade_hidden, config.visible), V("nade.V", config.visible, config.nade_hidden),
      b_h("nade.b_h", config.nade_hidden, 1), b_v("nade.b_v", config.visible, 1),
      W1("W1", config.visible, config.rnn_hidden), W2("W2", config.nade_hidden, config.rnn_hidden), config_(config)
{
    if (config.visible <= 0 || config.rnn_hidden <= 0 || config.nade_hidden <= 0 || config.layers < 1) {
        throw ConfigError("RNN-NADE sizes must be positive");
    }
    for (int l = 0; l < config.layers; ++l) {
        rnn.emplace_back(l == 0 ? config.visible : config.rnn_hidden, config.rnn_hidden);
        rnn.back().input_weight.name = "rnn" + std::to_string(l) + ".Wf";
        rnn.back().recurrent_weight.name = "rnn" + std::to_string(l) + ".Wr";
        rnn.back().bias.name = "rnn" + std::to_string(l) + ".b";
    }
}

void RnnNade::init(nn::Rng& rng)
{
    for (auto& layer : rnn) {
        layer.init(rng);
    }
    const double limit = nn::glorot_limit(config_.visible, config_.nade_hidden);
    nn::fill_uniform(W.value, limit, rng);
    nn::fill_uniform(V.value, limit, rng);
    b_h.value.setZero();
    b_v.value.setZero();
    W1.value.setZero();
    W2.value.setZero();
}

nn::ParameterList RnnNade::parameters()
{
    nn::ParameterList params;
    for (auto& layer : rnn) {
        for (nn::Parameter* p : layer.parameters()) {
            params.push_back(p);
        }
    }
    for (nn::Parameter* p : {&W, &V, &b_h, &b_v, &W1, &W2}) {
        params.push_back(p);
    }
    return params;
}

void RnnNade::cache_biases(MlmState& state) const
{
    const Vector& top = state.hidden.back();
    state.bias_v = b_v.value.col(0) + W1.value * top;
    state.bias_h = b_h.value.col(0) + W2.value * top;
}

MlmState RnnNade::initial_state() const
{
    MlmState s;
    s.hidden.assign(rnn.size(), Vector::Zero(config_.rnn_hidden));
    s.last = Vector::Zero(config_.visible);
    cache_biases(s);
    return s;
}

MlmState RnnNade::advance(const MlmState& state, const Vector& y) const
{
    if (y.size() != config_.visible) {
        throw DimensionError("MLM frame has " + std::to_string(y.size()) + " pitches, model expects " +
                             std::to_string(config_.visible));
    }
    if (((y.array() != 0.0) && (y.array() != 1.0)).any()) {
        throw DataError("MLM frames must be binary");
    }
    MlmState next;
    next.hidden.reserve(rnn.size());
    Vector input = y;
    for (std::size_t l = 0; l < rnn.size(); ++l) {
        next.hidden.push_back(rnn[l].step(input, state.hidden[l]));
        input = next.hidden.back();
    }
    next.last = y;
    cache_biases(next);
    return next;
}

MlmState RnnNade::advance_sequence(const MlmState& state, const Matrix& frames) const
{
    if (frames.cols() == 0) {
        return state;
    }
    if (frames.rows() != config_.visible) {
        throw DimensionError("MLM frames have " + std::to_string(frames.rows()) + " pitches, model expects " +
                             std::to_string(config_.visible));
    }
    MlmState next;
    Matrix input = frames;
    for (std::size_t l = 0; l < rnn.size(); ++l) {
        input = rnn[l].forward_sequence(input, state.hidden[l]);
        next.hidden.push_back(input.col(input.cols() - 1));
    }
    next.last = frames.col(frames.cols() - 1);
    cache_biases(next);
    return next;
}

Nade RnnNade::conditional(const MlmState& state) const
{
    Nade n;
    n.W = W.value;
    n.V = V.value;
    n.b_h = state.bias_h;
    n.b_v = state.bias_v;
    return n;
}

double RnnNade::log_prob(const MlmState& state, const Vector& y) const
{
    return nade_log_prob(W.value, V.value, state.bias_h, state.bias_v, y);
}

namespace {

// Hidden outputs of every layer over inputs y_0 .. y_{T-2}.
std::vector<Matrix> unroll(const std::vector<nn::RecurrentLayer>& rnn, const Matrix& frames)
{
    std::vector<Matrix> outputs;
    const Index steps = std::max<Index>(0, frames.cols() - 1);
    Matrix input = frames.leftCols(steps);
    for (const auto& layer : rnn) {
        outputs.push_back(layer.forward_sequence(input, Vector::Zero(layer.hidden_size())));
        input = outputs.back();
    }
    return outputs;
}

} // namespace

double RnnNade::sequence_log_prob(const Matrix& frames) const
{
    if (frames.rows() != config_.visible) {
        throw DimensionError("sequence has " + std::to_string(frames.rows()) + " pitches, model expects " +
                             std::to_string(config_.visible));
    }
    if (frames.cols() == 0) {
        return 0.0;
    }
    const std::vector<Matrix> hidden = unroll(rnn, frames);
    const Matrix& top = hidden.back();
    const Vector bv = b_v.value.col(0);
    const Vector bh = b_h.value.col(0);
    double lp = nade_log_prob(W.value, V.value, bh, bv, frames.col(0));
    for (Index t = 1; t < frames.cols(); ++t) {
        const Vector h = top.col(t - 1);
        lp += nade_log_prob(W.value, V.value, bh + W2.value * h, bv + W1.value * h, frames.col(t));
    }
    return lp;
}

double RnnNade::accumulate_gradient(const Matrix& frames)
{
    if (frames.rows() != config_.visible) {
        throw DimensionError("sequence has " + std::to_string(frames.rows()) + " pitches, model expects " +
                             std::to_string(config_.visible));
    }
    const Index steps = frames.cols();
    if (steps == 0) {
        return 0.0;
    }
    const std::vector<Matrix> hidden = unroll(rnn, frames);
    const Matrix& top = hidden.back();
    Matrix grad_top = Matrix::Zero(config_.rnn_hidden, steps - 1);
    const Vector bv = b_v.value.col(0);
    const Vector bh = b_h.value.col(0);
    double nll = 0.0;
    for (Index t = 0; t < steps; ++t) {
        Vector dbv = Vector::Zero(config_.visible);
        Vector dbh = Vector::Zero(config_.nade_hidden);
        if (t == 0) {
            nll += nade_nll_gradient(W.value, V.value, bh, bv, frames.col(0), {W.grad, V.grad, dbh, dbv});
        } else {
            const Vector h = top.col(t - 1);
            nll += nade_nll_gradient(W.value, V.value, bh + W2.value * h, bv + W1.value * h, frames.col(t),
                                     {W.grad, V.grad, dbh, dbv});
            W1.grad.noalias() += dbv * h.transpose();
            W2.grad.noalias() += dbh * h.transpose();
            grad_top.col(t - 1) = W1.value.transpose() * dbv + W2.value.transpose() * dbh;
        }
        b_v.grad.col(0) += dbv;
        b_h.grad.col(0) += dbh;
    }
    Matrix grad = grad_top;
    for (std::size_t l = rnn.size(); l-- > 0;) {
        const Matrix input = l == 0 ? Matrix(frames.leftCols(steps - 1)) : hidden[l - 1];
        grad = rnn[l].backward_sequence(input, hidden[l], Vector::Zero(rnn[l].hidden_size()), grad);
    }
    return nll;
}

Matrix roll_columns(const roll::PianoRoll& roll)
{
    Matrix m = Matrix::Zero(static_cast<Index>(roll.pitches()), static_cast<Index>(roll.frames()));
    for (std::size_t t = 0; t < roll.frames(); ++t) {
        for (std::size_t p = 0; p < roll.pitches(); ++p) {
            if (roll.active(t, p)) {
                m(static_cast<Index>(p), static_cast<Index>(t)) = 1.0;
            }
        }
    }
    return m;
}

double mean_frame_nll(const RnnNade& model, std::span<const roll::PianoRoll> rolls)
{
    double nll = 0.0;
    std::size_t frames = 0;
    for (const auto& r : rolls) {
        nll -= model.sequence_log_prob(roll_columns(r));
        frames += r.frames();
    }
    return frames == 0 ? 0.0 : nll / static_cast<double>(frames);
}

MlmTrainingResult train_mlm(std::span<const roll::PianoRoll> train, std::span<const roll::PianoRoll> valid,
                            const RnnNadeConfig& model_config, const MlmTrainingConfig& config)
{
    if (train.empty()) {
        throw DataError("MLM training corpus is empty");
    }
    if (config.sequence_length < 1 || config.batch_size < 1) {
        throw ConfigError("sequence length and batch size must be positive");
    }
    const double rate = train.front().frame_rate();
    auto check_roll = [&](const roll::PianoRoll& r, const char* set, std::size_t i) {
        if (std::abs(r.frame_rate() - rate) > 1e-9 * rate) {
            throw DataError(std::string(set) + " roll " + std::to_string(i) + " has frame rate " +
                            std::to_string(r.frame_rate()) + ", expected " + std::to_string(rate));
        }
        if (static_cast<Index>(r.pitches()) != model_config.visible) {
            throw DimensionError(std::string(set) + " roll " + std::to_string(i) + " has " +
                                 std::to_string(r.pitches()) + " pitches, model expects " +
                                 std::to_string(model_config.visible));
        }
    };
    for (std::size_t i = 0; i < train.size(); ++i) check_roll(train[i], "training", i);
    for (std::size_t i = 0; i < valid.size(); ++i) check_roll(valid[i], "validation", i);

    std::vector<Matrix> chunks;
    for (const auto& r : train) {
        const Matrix cols = roll_columns(r);
        for (Index start = 0; start < cols.cols(); start += config.sequence_length) {
            chunks.push_back(cols.middleCols(start, std::min<Index>(config.sequence_length, cols.cols() - start)));
        }
    }
    if (chunks.empty()) {
        throw DataError("MLM training rolls contain no frames");
    }

    nn::Rng rng(config.seed);
    MlmTrainingResult result{RnnNade(model_config), {}};
    RnnNade& model = result.model;
    model.init(rng);
    RnnNade best = model;
    nn::Optimizer optimizer(config.optimizer);
    nn::EarlyStopping stopping(config.patience);
    const nn::ParameterList params = model.parameters();

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_nll = 0.0;
        Index train_frames = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            nn::zero_grads(params);
            double batch_nll = 0.0;
            Index batch_frames = 0;
            for (std::size_t i = begin; i < end; ++i) {
                batch_nll += model.accumulate_gradient(chunks[order[i]]);
                batch_frames += chunks[order[i]].cols();
            }
            if (!std::isfinite(batch_nll)) {
                throw NumericalError("MLM training loss is not finite at epoch " + std::to_string(epoch));
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
            throw NumericalError("MLM validation loss is not finite at epoch " + std::to_string(epoch));
        }
        if (stopping.update(mean_valid)) {
            best = model;
        }
        result.log.epochs.push_back({epoch, mean_train, mean_valid, stopping.best()});
        if (stopping.should_stop()) {
            result.log.stopped_early = true;
            break;
        }
        if (config.optimizer.decay_horizon > 0 && optimizer.iteration() >= config.optimizer.decay_horizon) {
            break;
        }
    }
    result.log.best_epoch = stopping.best_epoch();
    result.model = std::move(best);
    return result;
}

nn::ModelContainer to_container(const RnnNade& model)
{
    const RnnNadeConfig& c = model.config();
    nn::ModelContainer out;
    out.header = nlohmann::json{{"model", "rnn-nade"},
                                {"visible", c.visible},
                                {"rnn_hidden", c.rnn_hidden},
                                {"nade_hidden", c.nade_hidden},
                                {"layers", c.layers}}
                     .dump();
    for (const auto& layer : model.rnn) {
        out.layers.push_back({nn::LayerTag::recurrent,
                              {nn::to_blob(layer.input_weight.value), nn::to_blob(layer.recurrent_weight.value),
                               nn::to_blob(layer.bias.value)}});
    }
    out.layers.push_back({nn::LayerTag::nade,
                          {nn::to_blob(model.W.value), nn::to_blob(model.V.value), nn::to_blob(model.b_h.value),
                           nn::to_blob(model.b_v.value)}});
    out.layers.push_back({nn::LayerTag::bias_map, {nn::to_blob(model.W1.value), nn::to_blob(model.W2.value)}});
    return out;
}

RnnNade rnn_nade_from_container(const nn::ModelContainer& container)
{
    RnnNadeConfig c;
    try {
        const auto header = nlohmann::json::parse(container.header);
        if (header.at("model") != "rnn-nade") {
            throw FormatError("model file holds a " + header.at("model").get<std::string>() + ", not an RNN-NADE");
        }
        c.visible = header.at("visible").get<Index>();
        c.rnn_hidden = header.at("rnn_hidden").get<Index>();
        c.nade_hidden = header.at("nade_hidden").get<Index>();
        c.layers = header.at("layers").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad RNN-NADE header: ") + e.what());
    }
    RnnNade model(c);
    if (container.layers.size() != static_cast<std::size_t>(c.layers) + 2) {
        throw FormatError("RNN-NADE file has " + std::to_string(container.layers.size()) + " layers, expected " +
                          std::to_string(c.layers + 2));
    }
    auto expect = [](const nn::LayerBlob& blob, nn::LayerTag tag, std::size_t tensors) {
        if (blob.tag != tag || blob.tensors.size() != tensors) {
            throw FormatError("unexpected layer layout in RNN-NADE file");
        }
    };
    auto load = [](nn::Parameter& p, const nn::TensorBlob& blob) {
        p.value = nn::from_blob(blob, p.value.rows(), p.value.cols());
    };
    for (int l = 0; l < c.layers; ++l) {
        const auto& blob = container.layers[static_cast<std::size_t>(l)];
        expect(blob, nn::LayerTag::recurrent, 3);
        load(model.rnn[static_cast<std::size_t>(l)].input_weight, blob.tensors[0]);
        load(model.rnn[static_cast<std::size_t>(l)].recurrent_weight, blob.tensors[1]);
        load(model.rnn[static_cast<std::size_t>(l)].bias, blob.tensors[2]);
    }
    const auto& nade = container.layers[static_cast<std::size_t>(c.layers)];
    expect(nade, nn::LayerTag::nade, 4);
    load(model.W, nade.tensors[0]);
    load(model.V, nade.tensors[1]);
    load(model.b_h, nade.tensors[2]);
    load(model.b_v, nade.tensors[3]);
    const auto& maps = container.layers[static_cast<std::size_t>(c.layers) + 1];
    expect(maps, nn::LayerTag::bias_map, 2);
    load(model.W1, maps.tensors[0]);
    load(model.W2, maps.tensors[1]);
    return model;
}

void save_rnn_nade(const std::filesystem::path& path, const RnnNade& model)
{
    nn::save_container(path, to_container(model));
}

RnnNade load_rnn_nade(const std::filesystem::path& path)
{
    return rnn_nade_from_container(nn::load_container(path));
}

} // namespace pianoscribe::mlm
