#pragma once

#include <vector>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::nn {

/// Fully connected layer y = f(W x + b). Batched calls take one sample per
/// column.
struct DenseLayer {
    Parameter weight;  // out x in
    Parameter bias;    // out x 1
    Activation activation = Activation::sigmoid;

    DenseLayer() = default;
    DenseLayer(Index in, Index out, Activation act);

    Index input_size() const { return weight.value.cols(); }
    Index output_size() const { return weight.value.rows(); }

    void init(Rng& rng);

    Vector forward(const Vector& x) const;
    Matrix forward(const Matrix& x) const;
    Matrix pre_activation(const Matrix& x) const;

    /// Accumulates parameter gradients given dL/d(output) and returns dL/d(input).
    Matrix backward(const Matrix& x, const Matrix& y, const Matrix& grad_out);
    /// Same, starting from dL/d(pre-activation).
    Matrix backward_pre(const Matrix& x, const Matrix& grad_pre);

    ParameterList parameters() { return {&weight, &bias}; }
};

/// Elman layer h_t = tanh(Wf x_t + Wr h_{t-1} + b).
struct RecurrentLayer {
    Parameter input_weight;      // hidden x in
    Parameter recurrent_weight;  // hidden x hidden
    Parameter bias;              // hidden x 1

    RecurrentLayer() = default;
    RecurrentLayer(Index in, Index hidden);

    Index input_size() const { return input_weight.value.cols(); }
    Index hidden_size() const { return recurrent_weight.value.rows(); }

    /// Recurrent matrix gets a tenth of the dense bound.
    void init(Rng& rng);

    Vector step(const Vector& x, const Vector& h_prev) const;

    /// Columns of `x` are time steps; returns hidden states with the same layout.
    Matrix forward_sequence(const Matrix& x, const Vector& h0) const;

    /// Backpropagation through time over one unrolled sequence. `grad_h` holds
    /// dL/dh_t arriving from above; returns dL/dx_t per column.
    Matrix backward_sequence(const Matrix& x, const Matrix& h, const Vector& h0, const Matrix& grad_h);

    ParameterList parameters() { return {&input_weight, &recurrent_weight, &bias}; }
};

/// A batch of multi-channel 2-D maps (time x frequency). Column
/// `n*height*width + row*width + col` of `data` holds all channels of one cell.
struct FeatureMaps {
    Index channels = 0;
    Index height = 0;
    Index width = 0;
    Index count = 0;
    Matrix data;

    FeatureMaps() = default;
    FeatureMaps(Index c, Index h, Index w, Index n = 1)
        : channels(c), height(h), width(w), count(n), data(Matrix::Zero(c, n * h * w))
    {
    }

    Index cells() const { return height * width; }
    double& at(Index sample, Index channel, Index row, Index col)
    {
        return data(channel, sample * cells() + row * width + col);
    }
    double at(Index sample, Index channel, Index row, Index col) const
    {
        return data(channel, sample * cells() + row * width + col);
    }
};

/// Valid-mode 2-D cross-correlation summed over input channels, bias,
/// activation, then non-overlapping max pooling. Pooling drops trailing cells
/// that do not fill a whole pool window.
struct ConvLayer {
    Index in_channels = 0;
    Index out_channels = 0;
    Index kernel_h = 1;
    Index kernel_w = 1;
    Index pool_h = 1;
    Index pool_w = 1;
    Parameter kernels;  // out x (in * kernel_h * kernel_w), row-major over (in, kh, kw)
    Parameter bias;     // out x 1
    Activation activation = Activation::tanh;

    struct Cache {
        Index in_height = 0;
        Index in_width = 0;
        Index count = 0;
        Matrix patches;
        Matrix activated;
        std::vector<Index> argmax;
    };

    ConvLayer() = default;
    ConvLayer(Index in_ch, Index out_ch, Index kh, Index kw, Index ph, Index pw,
              Activation act = Activation::tanh);

    void init(Rng& rng);

    Index conv_height(Index in_h) const { return in_h - kernel_h + 1; }
    Index conv_width(Index in_w) const { return in_w - kernel_w + 1; }
    Index output_height(Index in_h) const { return conv_height(in_h) / pool_h; }
    Index output_width(Index in_w) const { return conv_width(in_w) / pool_w; }

    FeatureMaps forward(const FeatureMaps& x, Cache* cache = nullptr) const;
    /// Returns dL/d(input) and accumulates kernel and bias gradients.
    FeatureMaps backward(const Cache& cache, const FeatureMaps& grad_out);

    ParameterList parameters() { return {&kernels, &bias}; }
};

/// Inverted dropout mask: entries are 0 with probability `rate`, otherwise
/// 1/(1-rate).
Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng);

// Free-function forms of the single-sample forward passes.
Vector dense_forward(const Vector& x, const DenseLayer& layer);
Vector recurrent_step(const Vector& x, const Vector& h_prev, const RecurrentLayer& layer);
FeatureMaps conv_forward(const FeatureMaps& x, const ConvLayer& layer);

} // namespace pianoscribe::nn
