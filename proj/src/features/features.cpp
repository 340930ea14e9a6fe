#include "pianoscribe/features/features.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pianoscribe/common/binary_io.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"

namespace pianoscribe::features {

Standardizer fit_standardizer(std::span<const FeatureSequence> corpus)
{
    if (corpus.empty()) {
        throw DataError("cannot fit a standardizer on an empty corpus");
    }
    const nn::Index dims = corpus.front().dims();
    nn::Index frames = 0;
    nn::Vector sum = nn::Vector::Zero(dims);
    for (const auto& fs : corpus) {
        if (fs.dims() != dims) {
            throw DimensionError("feature dimension " + std::to_string(fs.dims()) + " differs from " +
                                 std::to_string(dims));
        }
        frames += fs.length();
        sum += fs.frames.colwise().sum().transpose();
    }
    if (frames < 2) {
        throw DataError("standardizer needs at least two frames, corpus has " + std::to_string(frames));
    }
    Standardizer s;
    s.mean = sum / static_cast<double>(frames);
    // Second pass around the mean keeps the variance accurate for large offsets.
    nn::Vector sq = nn::Vector::Zero(dims);
    for (const auto& fs : corpus) {
        sq += (fs.frames.rowwise() - s.mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    s.stddev = (sq / static_cast<double>(frames)).array().sqrt().max(kStdFloor).matrix();
    return s;
}

namespace {

void check_dims(const FeatureSequence& fs, const Standardizer& s)
{
    if (fs.dims() != s.mean.size() || s.stddev.size() != s.mean.size()) {
        throw DimensionError("features have " + std::to_string(fs.dims()) + " dims, standardizer has " +
                             std::to_string(s.mean.size()));
    }
}

} // namespace

FeatureSequence apply_standardizer(const FeatureSequence& fs, const Standardizer& s)
{
    check_dims(fs, s);
    FeatureSequence out = fs;
    out.frames = ((fs.frames.rowwise() - s.mean.transpose()).array().rowwise() / s.stddev.transpose().array()).matrix();
    return out;
}

FeatureSequence invert_standardizer(const FeatureSequence& fs, const Standardizer& s)
{
    check_dims(fs, s);
    FeatureSequence out = fs;
    out.frames = ((fs.frames.array().rowwise() * s.stddev.transpose().array()).matrix().rowwise() + s.mean.transpose());
    return out;
}

std::vector<nn::Matrix> context_window(const FeatureSequence& fs, int window)
{
    if (window < 1 || window % 2 == 0) {
        throw ConfigError("context window must be a positive odd frame count, got " + std::to_string(window));
    }
    const nn::Index k = (window - 1) / 2;
    const nn::Index frames = fs.length();
    std::vector<nn::Matrix> blocks;
    blocks.reserve(static_cast<std::size_t>(frames));
    for (nn::Index t = 0; t < frames; ++t) {
        nn::Matrix block = nn::Matrix::Zero(window, fs.dims());
        for (nn::Index r = 0; r < window; ++r) {
            const nn::Index src = t - k + r;
            if (src >= 0 && src < frames) {
                block.row(r) = fs.frames.row(src);
            }
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

void write_frame_file(std::ostream& out, std::string_view magic, const nn::Matrix& frames, double frame_rate)
{
    io::write_magic(out, magic);
    io::write_le<std::uint32_t>(out, kFrameFileVersion);
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(frames.rows()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames.cols()));
    io::write_le<double>(out, frame_rate);
    for (nn::Index t = 0; t < frames.rows(); ++t) {
        for (nn::Index d = 0; d < frames.cols(); ++d) {
            io::write_le<float>(out, static_cast<float>(frames(t, d)));
        }
    }
}

nn::Matrix read_frame_file(std::istream& in, std::string_view magic, double& frame_rate)
{
    io::expect_magic(in, magic);
    const auto version = io::read_le<std::uint32_t>(in);
    if (version != kFrameFileVersion) {
        throw FormatError("unsupported " + std::string(magic) + " version " + std::to_string(version));
    }
    const auto frames = io::read_le<std::uint64_t>(in);
    const auto dims = io::read_le<std::uint32_t>(in);
    frame_rate = io::read_le<double>(in);
    if (!(frame_rate > 0.0) || frames > (std::uint64_t{1} << 32) || dims > (1u << 20)) {
        throw FormatError("invalid " + std::string(magic) + " header");
    }
    nn::Matrix m(static_cast<nn::Index>(frames), static_cast<nn::Index>(dims));
    for (nn::Index t = 0; t < m.rows(); ++t) {
        try {
            for (nn::Index d = 0; d < m.cols(); ++d) {
                m(t, d) = io::read_le<float>(in);
            }
        } catch (const FormatError&) {
            throw FormatError("truncated " + std::string(magic) + " payload at frame " + std::to_string(t));
        }
    }
    return m;
}

void write_features(std::ostream& out, const FeatureSequence& fs)
{
    write_frame_file(out, "PSFT", fs.frames, fs.frame_rate);
}

FeatureSequence read_features(std::istream& in)
{
    FeatureSequence fs;
    fs.frames = read_frame_file(in, "PSFT", fs.frame_rate);
    return fs;
}

void save_features(const std::filesystem::path& path, const FeatureSequence& fs)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_features(out, fs); });
}

FeatureSequence load_features(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open feature file " + path.string());
    }
    return read_features(in);
}

} // namespace pianoscribe::features
