#include "pianoscribe/numerics/layers.hpp"

#include <string>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::nn {

namespace {

std::string shape_str(Index r, Index c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace

// ---------------------------------------------------------------- DenseLayer

DenseLayer::DenseLayer(Index in, Index out, Activation act)
    : weight("weight", out, in), bias("bias", out, 1), activation(act)
{
}

void DenseLayer::init(Rng& rng)
{
    fill_uniform(weight.value, glorot_limit(input_size(), output_size()), rng);
    bias.value.setZero();
}

Matrix DenseLayer::pre_activation(const Matrix& x) const
{
    if (x.rows() != input_size()) {
        throw DimensionError("dense layer expects input of size " + std::to_string(input_size()) +
                             ", got " + std::to_string(x.rows()));
    }
    Matrix z = weight.value * x;
    z.colwise() += bias.value.col(0);
    return z;
}

Matrix DenseLayer::forward(const Matrix& x) const
{
    return activate(activation, pre_activation(x));
}

Vector DenseLayer::forward(const Vector& x) const
{
    Matrix y = forward(Matrix(x));
    return y.col(0);
}

Matrix DenseLayer::backward_pre(const Matrix& x, const Matrix& grad_pre)
{
    weight.grad.noalias() += grad_pre * x.transpose();
    bias.grad.col(0) += grad_pre.rowwise().sum();
    return weight.value.transpose() * grad_pre;
}

Matrix DenseLayer::backward(const Matrix& x, const Matrix& y, const Matrix& grad_out)
{
    Matrix grad_pre = grad_out.cwiseProduct(activation_derivative(activation, y));
    return backward_pre(x, grad_pre);
}

// ------------------------------------------------------------ RecurrentLayer

RecurrentLayer::RecurrentLayer(Index in, Index hidden)
    : input_weight("input_weight", hidden, in),
      recurrent_weight("recurrent_weight", hidden, hidden),
      bias("bias", hidden, 1)
{
}

void RecurrentLayer::init(Rng& rng)
{
    fill_uniform(input_weight.value, glorot_limit(input_size(), hidden_size()), rng);
    fill_uniform(recurrent_weight.value, 0.1 * glorot_limit(hidden_size(), hidden_size()), rng);
    bias.value.setZero();
}

Vector RecurrentLayer::step(const Vector& x, const Vector& h_prev) const
{
    if (x.size() != input_size()) {
        throw DimensionError("recurrent layer expects input of size " + std::to_string(input_size()) +
                             ", got " + std::to_string(x.size()));
    }
    if (h_prev.size() != hidden_size()) {
        throw DimensionError("recurrent layer expects hidden state of size " +
                             std::to_string(hidden_size()) + ", got " + std::to_string(h_prev.size()));
    }
    Vector z = input_weight.value * x + recurrent_weight.value * h_prev + bias.value.col(0);
    return z.array().tanh().matrix();
}

Matrix RecurrentLayer::forward_sequence(const Matrix& x, const Vector& h0) const
{
    if (x.rows() != input_size()) {
        throw DimensionError("recurrent layer expects input of size " + std::to_string(input_size()) +
                             ", got " + std::to_string(x.rows()));
    }
    if (h0.size() != hidden_size()) {
        throw DimensionError("recurrent layer initial state has wrong size");
    }
    // Input projections for all steps in one product; the recurrence stays sequential.
    Matrix z = input_weight.value * x;
    z.colwise() += bias.value.col(0);
    Matrix h(hidden_size(), x.cols());
    Vector prev = h0;
    for (Index t = 0; t < x.cols(); ++t) {
        Vector zt = z.col(t) + recurrent_weight.value * prev;
        h.col(t) = zt.array().tanh().matrix();
        prev = h.col(t);
    }
    return h;
}

Matrix RecurrentLayer::backward_sequence(const Matrix& x, const Matrix& h, const Vector& h0,
                                         const Matrix& grad_h)
{
    const Index steps = x.cols();
    Matrix dz(hidden_size(), steps);
    Vector carry = Vector::Zero(hidden_size());
    for (Index t = steps - 1; t >= 0; --t) {
        Vector dh = grad_h.col(t) + carry;
        dz.col(t) = dh.cwiseProduct((1.0 - h.col(t).array().square()).matrix());
        carry.noalias() = recurrent_weight.value.transpose() * dz.col(t);
    }
    Matrix h_prev(hidden_size(), steps);
    if (steps > 0) {
        h_prev.col(0) = h0;
        h_prev.rightCols(steps - 1) = h.leftCols(steps - 1);
    }
    input_weight.grad.noalias() += dz * x.transpose();
    recurrent_weight.grad.noalias() += dz * h_prev.transpose();
    bias.grad.col(0) += dz.rowwise().sum();
    return input_weight.value.transpose() * dz;
}

// ----------------------------------------------------------------- ConvLayer

ConvLayer::ConvLayer(Index in_ch, Index out_ch, Index kh, Index kw, Index ph, Index pw, Activation act)
    : in_channels(in_ch), out_channels(out_ch), kernel_h(kh), kernel_w(kw), pool_h(ph), pool_w(pw),
      kernels("kernels", out_ch, in_ch * kh * kw), bias("bias", out_ch, 1), activation(act)
{
    if (in_ch <= 0 || out_ch <= 0 || kh <= 0 || kw <= 0 || ph <= 0 || pw <= 0) {
        throw ConfigError("convolution dimensions must be positive");
    }
}

void ConvLayer::init(Rng& rng)
{
    const Index fan_in = in_channels * kernel_h * kernel_w;
    const Index fan_out = out_channels * kernel_h * kernel_w;
    fill_uniform(kernels.value, glorot_limit(fan_in, fan_out), rng);
    bias.value.setZero();
}

FeatureMaps ConvLayer::forward(const FeatureMaps& x, Cache* cache) const
{
    if (x.channels != in_channels) {
        throw DimensionError("conv layer expects " + std::to_string(in_channels) + " channels, got " +
                             std::to_string(x.channels));
    }
    if (x.height < kernel_h || x.width < kernel_w) {
        throw DimensionError("conv kernel " + shape_str(kernel_h, kernel_w) + " larger than input " +
                             shape_str(x.height, x.width));
    }
    const Index oh = conv_height(x.height);
    const Index ow = conv_width(x.width);
    const Index ph = oh / pool_h;
    const Index pw = ow / pool_w;
    if (ph == 0 || pw == 0) {
        throw DimensionError("pooling " + shape_str(pool_h, pool_w) + " larger than feature map " +
                             shape_str(oh, ow));
    }

    Matrix patches(in_channels * kernel_h * kernel_w, x.count * oh * ow);
    for (Index n = 0; n < x.count; ++n) {
        const Index base_in = n * x.cells();
        for (Index a = 0; a < oh; ++a) {
            for (Index b = 0; b < ow; ++b) {
                const Index col = n * oh * ow + a * ow + b;
                Index row = 0;
                for (Index r = 0; r < in_channels; ++r) {
                    for (Index u = 0; u < kernel_h; ++u) {
                        const Index src = base_in + (a + u) * x.width + b;
                        for (Index v = 0; v < kernel_w; ++v) {
                            patches(row++, col) = x.data(r, src + v);
                        }
                    }
                }
            }
        }
    }

    Matrix pre = kernels.value * patches;
    pre.colwise() += bias.value.col(0);
    Matrix act = activate(activation, std::move(pre));

    FeatureMaps out(out_channels, ph, pw, x.count);
    std::vector<Index> argmax(static_cast<std::size_t>(out.data.size()));
    for (Index n = 0; n < x.count; ++n) {
        for (Index i = 0; i < ph; ++i) {
            for (Index j = 0; j < pw; ++j) {
                const Index out_col = n * ph * pw + i * pw + j;
                for (Index c = 0; c < out_channels; ++c) {
                    Index best = n * oh * ow + (i * pool_h) * ow + j * pool_w;
                    double best_val = act(c, best);
                    for (Index u = 0; u < pool_h; ++u) {
                        for (Index v = 0; v < pool_w; ++v) {
                            const Index idx = n * oh * ow + (i * pool_h + u) * ow + (j * pool_w + v);
                            if (act(c, idx) > best_val) {
                                best_val = act(c, idx);
                                best = idx;
                            }
                        }
                    }
                    out.data(c, out_col) = best_val;
                    argmax[static_cast<std::size_t>(out_col * out_channels + c)] = best;
                }
            }
        }
    }

    if (cache != nullptr) {
        cache->in_height = x.height;
        cache->in_width = x.width;
        cache->count = x.count;
        cache->patches = std::move(patches);
        cache->activated = std::move(act);
        cache->argmax = std::move(argmax);
    }
    return out;
}

FeatureMaps ConvLayer::backward(const Cache& cache, const FeatureMaps& grad_out)
{
    const Index oh = conv_height(cache.in_height);
    const Index ow = conv_width(cache.in_width);
    Matrix grad_act = Matrix::Zero(out_channels, cache.count * oh * ow);
    for (Index col = 0; col < grad_out.data.cols(); ++col) {
        for (Index c = 0; c < out_channels; ++c) {
            grad_act(c, cache.argmax[static_cast<std::size_t>(col * out_channels + c)]) += grad_out.data(c, col);
        }
    }
    Matrix grad_pre = grad_act.cwiseProduct(activation_derivative(activation, cache.activated));
    kernels.grad.noalias() += grad_pre * cache.patches.transpose();
    bias.grad.col(0) += grad_pre.rowwise().sum();

    Matrix grad_patches = kernels.value.transpose() * grad_pre;
    FeatureMaps grad_in(in_channels, cache.in_height, cache.in_width, cache.count);
    for (Index n = 0; n < cache.count; ++n) {
        const Index base_in = n * grad_in.cells();
        for (Index a = 0; a < oh; ++a) {
            for (Index b = 0; b < ow; ++b) {
                const Index col = n * oh * ow + a * ow + b;
                Index row = 0;
                for (Index r = 0; r < in_channels; ++r) {
                    for (Index u = 0; u < kernel_h; ++u) {
                        const Index dst = base_in + (a + u) * grad_in.width + b;
                        for (Index v = 0; v < kernel_w; ++v) {
                            grad_in.data(r, dst + v) += grad_patches(row++, col);
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

// ------------------------------------------------------------------- helpers

Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng)
{
    if (rate <= 0.0) {
        return Matrix::Ones(rows, cols);
    }
    if (rate >= 1.0) {
        throw ConfigError("dropout rate must be below 1");
    }
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            mask(r, c) = dist(rng) < rate ? 0.0 : keep_scale;
        }
    }
    return mask;
}

Vector dense_forward(const Vector& x, const DenseLayer& layer)
{
    return layer.forward(x);
}

Vector recurrent_step(const Vector& x, const Vector& h_prev, const RecurrentLayer& layer)
{
    return layer.step(x, h_prev);
}

FeatureMaps conv_forward(const FeatureMaps& x, const ConvLayer& layer)
{
    return layer.forward(x);
}

} // namespace pianoscribe::nn
