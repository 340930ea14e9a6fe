#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "pianoscribe/features/features.hpp"

namespace pianoscribe::features {

struct CqtConfig {
    double sample_rate = 16000.0;
    int hop = 512;
    double min_frequency = 27.5;  // A0
    int bins_per_octave = 36;
    int octaves = 7;
    /// Spectral kernel entries below this fraction of the row peak are dropped.
    double sparsity = 1e-3;
};

/// Constant-Q magnitude spectrogram computed with a sparse spectral kernel:
/// each frame is one FFT of an fft_size() segment centred on sample t*hop,
/// followed by a product with the precomputed kernels. Frame t covers samples
/// around t*hop, zero padded past either end, giving floor(n/hop)+1 frames.
/// transform() is const and safe to call concurrently.
class ConstantQ {
public:
    explicit ConstantQ(CqtConfig config = {});

    const CqtConfig& config() const { return config_; }
    std::size_t bins() const { return frequencies_.size(); }
    std::size_t fft_size() const { return fft_size_; }
    double quality() const { return q_; }
    const std::vector<double>& center_frequencies() const { return frequencies_; }
    /// Window length in samples of bin k.
    std::size_t window_length(std::size_t bin) const { return window_lengths_[bin]; }

    /// Throws DataError when the input is shorter than one hop.
    FeatureSequence transform(std::span<const double> samples) const;

private:
    struct SparseRow {
        std::vector<std::size_t> index;
        std::vector<std::complex<double>> weight;
    };

    CqtConfig config_;
    double q_ = 0.0;
    std::size_t fft_size_ = 0;
    std::vector<double> frequencies_;
    std::vector<std::size_t> window_lengths_;
    std::vector<SparseRow> kernel_;
    std::shared_ptr<void> plan_;  // fftw_plan for the r2c transform
};

/// 252-bin CQT at 16 kHz, hop 512, using a shared default transform.
FeatureSequence cqt(std::span<const double> samples);

} // namespace pianoscribe::features
