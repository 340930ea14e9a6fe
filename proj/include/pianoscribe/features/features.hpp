#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::features {

/// T x D frames, one row per frame.
struct FeatureSequence {
    nn::Matrix frames;
    double frame_rate = 31.25;
    std::vector<double> dim_labels;  // optional bin centre frequencies in Hz

    nn::Index length() const { return frames.rows(); }
    nn::Index dims() const { return frames.cols(); }
};

struct Standardizer {
    nn::Vector mean;
    nn::Vector stddev;
};

inline constexpr double kStdFloor = 1e-8;

/// Per-dimension mean and population standard deviation over every frame of
/// the corpus. Throws DataError on an empty corpus or fewer than two frames.
Standardizer fit_standardizer(std::span<const FeatureSequence> corpus);
FeatureSequence apply_standardizer(const FeatureSequence& fs, const Standardizer& s);
FeatureSequence invert_standardizer(const FeatureSequence& fs, const Standardizer& s);

/// One window x D block per frame, centred on the frame and zero padded at
/// both ends. Even or non-positive windows throw ConfigError.
std::vector<nn::Matrix> context_window(const FeatureSequence& fs, int window);

// "PSFT": magic | version u32 | T u64 | D u32 | frame_rate f64 | T*D f32, row-major.
inline constexpr std::uint32_t kFrameFileVersion = 1;

void write_frame_file(std::ostream& out, std::string_view magic, const nn::Matrix& frames, double frame_rate);
/// Returns the frames and sets `frame_rate`. Rejects a wrong magic or a
/// truncated payload with FormatError.
nn::Matrix read_frame_file(std::istream& in, std::string_view magic, double& frame_rate);

void write_features(std::ostream& out, const FeatureSequence& fs);
FeatureSequence read_features(std::istream& in);
void save_features(const std::filesystem::path& path, const FeatureSequence& fs);
FeatureSequence load_features(const std::filesystem::path& path);

} // namespace pianoscribe::features
