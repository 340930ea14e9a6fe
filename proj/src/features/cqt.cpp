#include "pianoscribe/features/cqt.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::features {

namespace {

// FFTW planning is not thread-safe; execution on a finished plan is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n)
{
    return std::unique_ptr<T[], FftwFree>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

} // namespace

ConstantQ::ConstantQ(CqtConfig config) : config_(config)
{
    if (config_.hop <= 0 || config_.bins_per_octave <= 0 || config_.octaves <= 0 || !(config_.min_frequency > 0.0) ||
        !(config_.sample_rate > 0.0)) {
        throw ConfigError("invalid CQT configuration");
    }
    const std::size_t bins = static_cast<std::size_t>(config_.bins_per_octave) * config_.octaves;
    q_ = 1.0 / (std::pow(2.0, 1.0 / config_.bins_per_octave) - 1.0);
    for (std::size_t k = 0; k < bins; ++k) {
        const double f = config_.min_frequency * std::pow(2.0, static_cast<double>(k) / config_.bins_per_octave);
        if (f >= config_.sample_rate / 2.0) {
            throw ConfigError("CQT bin " + std::to_string(k) + " lies above the Nyquist frequency");
        }
        frequencies_.push_back(f);
        window_lengths_.push_back(static_cast<std::size_t>(std::ceil(q_ * config_.sample_rate / f)));
    }
    fft_size_ = 1;
    while (fft_size_ < window_lengths_.front()) {
        fft_size_ *= 2;
    }

    const std::size_t n = fft_size_;
    const std::size_t half = n / 2 + 1;
    auto temporal = fftw_buffer<fftw_complex>(n);
    auto spectral = fftw_buffer<fftw_complex>(n);
    auto real_in = fftw_buffer<double>(n);
    auto real_out = fftw_buffer<fftw_complex>(half);
    fftw_plan forward;
    {
        std::lock_guard lock(planner_mutex());
        forward = fftw_plan_dft_1d(static_cast<int>(n), temporal.get(), spectral.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_plan r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_in.get(), real_out.get(), FFTW_ESTIMATE);
        plan_ = std::shared_ptr<void>(r2c, [](void* p) {
            std::lock_guard inner(planner_mutex());
            fftw_destroy_plan(static_cast<fftw_plan>(p));
        });
    }

    // Hamming-windowed complex exponential centred on segment index n/2. The
    // frame value is sum_j x_j conj(k_j) = (1/n) sum_f X_f conj(K_f); only the
    // non-negative frequencies carry kernel energy.
    kernel_.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t len = window_lengths_[k];
        std::fill_n(reinterpret_cast<double*>(temporal.get()), 2 * n, 0.0);
        const std::size_t start = n / 2 - len / 2;
        const double omega = 2.0 * std::numbers::pi * frequencies_[k] / config_.sample_rate;
        for (std::size_t i = 0; i < len; ++i) {
            const double w = len > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1)) : 1.0;
            const double phase = omega * static_cast<double>(i);
            temporal[start + i][0] = w / len * std::cos(phase);
            temporal[start + i][1] = w / len * std::sin(phase);
        }
        fftw_execute(forward);
        double peak = 0.0;
        for (std::size_t f = 0; f < half; ++f) {
            peak = std::max(peak, std::hypot(spectral[f][0], spectral[f][1]));
        }
        SparseRow& row = kernel_[k];
        for (std::size_t f = 0; f < half; ++f) {
            if (std::hypot(spectral[f][0], spectral[f][1]) >= config_.sparsity * peak) {
                row.index.push_back(f);
                row.weight.emplace_back(spectral[f][0] / n, -spectral[f][1] / n);
            }
        }
    }
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
}

FeatureSequence ConstantQ::transform(std::span<const double> samples) const
{
    const auto hop = static_cast<std::size_t>(config_.hop);
    if (samples.size() < hop) {
        throw DataError("audio too short for CQT: " + std::to_string(samples.size()) + " samples, need at least " +
                        std::to_string(hop));
    }
    const std::size_t frames = samples.size() / hop + 1;
    const std::size_t n = fft_size_;
    auto segment = fftw_buffer<double>(n);
    auto spectrum = fftw_buffer<fftw_complex>(n / 2 + 1);
    const auto plan = static_cast<fftw_plan>(plan_.get());

    FeatureSequence out;
    out.frames = nn::Matrix::Zero(static_cast<nn::Index>(frames), static_cast<nn::Index>(bins()));
    out.frame_rate = config_.sample_rate / config_.hop;
    out.dim_labels = frequencies_;
    const auto total = static_cast<std::ptrdiff_t>(samples.size());
    for (std::size_t t = 0; t < frames; ++t) {
        const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(t * hop) - static_cast<std::ptrdiff_t>(n / 2);
        for (std::size_t j = 0; j < n; ++j) {
            const std::ptrdiff_t s = first + static_cast<std::ptrdiff_t>(j);
            segment[j] = s >= 0 && s < total ? samples[static_cast<std::size_t>(s)] : 0.0;
        }
        fftw_execute_dft_r2c(plan, segment.get(), spectrum.get());
        for (std::size_t k = 0; k < kernel_.size(); ++k) {
            const SparseRow& row = kernel_[k];
            std::complex<double> acc = 0.0;
            for (std::size_t i = 0; i < row.index.size(); ++i) {
                const auto& x = spectrum[row.index[i]];
                acc += std::complex<double>(x[0], x[1]) * row.weight[i];
            }
            out.frames(static_cast<nn::Index>(t), static_cast<nn::Index>(k)) = std::abs(acc);
        }
    }
    return out;
}

FeatureSequence cqt(std::span<const double> samples)
{
    static const ConstantQ transform;
    return transform.transform(samples);
}

} // namespace pianoscribe::features
