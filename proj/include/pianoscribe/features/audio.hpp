#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace pianoscribe::features {

inline constexpr int kTargetSampleRate = 16000;

struct Audio {
    std::vector<double> samples;  // mono, nominally in [-1, 1]
    int sample_rate = kTargetSampleRate;
};

enum class WavEncoding { pcm16, float32 };

/// Reads 16-bit PCM or 32-bit float WAV. Multi-channel files are mixed down by
/// averaging the channels.
Audio read_wav(std::istream& in);
Audio load_wav(const std::filesystem::path& path);

void write_wav(std::ostream& out, const Audio& audio, WavEncoding encoding = WavEncoding::pcm16);
void save_wav(const std::filesystem::path& path, const Audio& audio, WavEncoding encoding = WavEncoding::pcm16);

/// Band-limited rational-ratio resampling to 16 kHz with a Kaiser-windowed
/// sinc polyphase filter. Output length is round(n * 16000 / source_rate).
/// Rates below 16 kHz are rejected with ConfigError.
std::vector<double> resample_to_16k(std::span<const double> samples, int source_rate);

} // namespace pianoscribe::features
