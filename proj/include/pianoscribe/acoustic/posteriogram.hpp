#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::acoustic {

/// T x P independent pitch probabilities, one row per frame.
struct Posteriogram {
    nn::Matrix probs;
    double frame_rate = 31.25;

    nn::Index frames() const { return probs.rows(); }
    nn::Index pitches() const { return probs.cols(); }
};

// "PSPG": same layout as PSFT with D = 88.
void write_posteriogram(std::ostream& out, const Posteriogram& pg);
Posteriogram read_posteriogram(std::istream& in);
void save_posteriogram(const std::filesystem::path& path, const Posteriogram& pg);
Posteriogram load_posteriogram(const std::filesystem::path& path);

} // namespace pianoscribe::acoustic
