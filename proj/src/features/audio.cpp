#include "pianoscribe/features/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "pianoscribe/common/binary_io.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"

namespace pianoscribe::features {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
};

} // namespace

Audio read_wav(std::istream& in)
{
    io::expect_magic(in, "RIFF");
    io::read_le<std::uint32_t>(in);
    io::expect_magic(in, "WAVE");

    WavFormat fmt;
    bool have_fmt = false;
    while (true) {
        std::string id(4, '\0');
        in.read(id.data(), 4);
        if (!in) {
            throw FormatError("WAV file has no data chunk");
        }
        const auto size = io::read_le<std::uint32_t>(in);
        if (id == "fmt ") {
            if (size < 16) {
                throw FormatError("WAV fmt chunk too short");
            }
            fmt.format = io::read_le<std::uint16_t>(in);
            fmt.channels = io::read_le<std::uint16_t>(in);
            fmt.rate = io::read_le<std::uint32_t>(in);
            io::read_le<std::uint32_t>(in);  // byte rate
            io::read_le<std::uint16_t>(in);  // block align
            fmt.bits = io::read_le<std::uint16_t>(in);
            std::uint32_t consumed = 16;
            if (fmt.format == kFormatExtensible && size >= 26) {
                io::read_le<std::uint16_t>(in);  // extension size
                io::read_le<std::uint16_t>(in);  // valid bits
                io::read_le<std::uint32_t>(in);  // channel mask
                fmt.format = io::read_le<std::uint16_t>(in);  // first two GUID bytes
                consumed = 26;
            }
            in.ignore(static_cast<std::streamsize>(size - consumed + (size & 1)));
            have_fmt = true;
            continue;
        }
        if (id != "data") {
            in.ignore(static_cast<std::streamsize>(size + (size & 1)));
            continue;
        }
        if (!have_fmt) {
            throw FormatError("WAV data chunk precedes fmt chunk");
        }
        const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
        const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
        if (!pcm16 && !float32) {
            throw FormatError("unsupported WAV encoding (format " + std::to_string(fmt.format) + ", " +
                              std::to_string(fmt.bits) + " bits); expected 16-bit PCM or 32-bit float");
        }
        if (fmt.channels == 0 || fmt.rate == 0) {
            throw FormatError("WAV header has zero channels or zero sample rate");
        }
        const std::size_t frame_bytes = static_cast<std::size_t>(fmt.channels) * (fmt.bits / 8);
        const std::size_t frames = size / frame_bytes;
        Audio audio;
        audio.sample_rate = static_cast<int>(fmt.rate);
        audio.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            double sum = 0.0;
            for (std::uint16_t c = 0; c < fmt.channels; ++c) {
                sum += pcm16 ? io::read_le<std::int16_t>(in) / 32768.0 : io::read_le<float>(in);
            }
            audio.samples[i] = sum / fmt.channels;
        }
        return audio;
    }
}

Audio load_wav(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return read_wav(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_wav(std::ostream& out, const Audio& audio, WavEncoding encoding)
{
    const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));
    io::write_magic(out, "RIFF");
    io::write_le<std::uint32_t>(out, 36 + data_bytes);
    io::write_magic(out, "WAVE");
    io::write_magic(out, "fmt ");
    io::write_le<std::uint32_t>(out, 16);
    io::write_le<std::uint16_t>(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
    io::write_le<std::uint16_t>(out, 1);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate) * (bits / 8));
    io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits / 8));
    io::write_le<std::uint16_t>(out, bits);
    io::write_magic(out, "data");
    io::write_le<std::uint32_t>(out, data_bytes);
    for (double s : audio.samples) {
        if (encoding == WavEncoding::pcm16) {
            const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
            io::write_le<std::int16_t>(out, static_cast<std::int16_t>(q));
        } else {
            io::write_le<float>(out, static_cast<float>(s));
        }
    }
}

void save_wav(const std::filesystem::path& path, const Audio& audio, WavEncoding encoding)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_wav(out, audio, encoding); });
}

std::vector<double> resample_to_16k(std::span<const double> samples, int source_rate)
{
    if (source_rate < kTargetSampleRate) {
        throw ConfigError("unsupported sample rate " + std::to_string(source_rate) + " Hz; need at least 16000");
    }
    if (source_rate == kTargetSampleRate) {
        return {samples.begin(), samples.end()};
    }
    const std::int64_t g = std::gcd(kTargetSampleRate, source_rate);
    const std::int64_t up = kTargetSampleRate / g;
    const std::int64_t down = source_rate / g;

    // Low-pass in input-sample units, passband edge just under the new Nyquist.
    const double cutoff = 0.5 * static_cast<double>(up) / static_cast<double>(down) * 0.94;
    constexpr double zero_crossings = 24.0;
    constexpr double beta = 8.6;
    const auto half = static_cast<std::int64_t>(std::ceil(zero_crossings / (2.0 * cutoff)));
    const std::int64_t taps = 2 * half;
    const double norm = std::cyl_bessel_i(0.0, beta);

    // One filter per output phase; tap j weighs input sample base - half + 1 + j.
    std::vector<double> table(static_cast<std::size_t>(up * taps));
    for (std::int64_t p = 0; p < up; ++p) {
        const double frac = static_cast<double>(p) / static_cast<double>(up);
        double* row = &table[static_cast<std::size_t>(p * taps)];
        double sum = 0.0;
        for (std::int64_t j = 0; j < taps; ++j) {
            const double tau = frac - static_cast<double>(j - half + 1);
            const double u = tau / static_cast<double>(half);
            double h = 0.0;
            if (std::abs(u) < 1.0) {
                const double x = 2.0 * cutoff * tau;
                const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
                h = 2.0 * cutoff * sinc * std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - u * u)) / norm;
            }
            row[j] = h;
            sum += h;
        }
        for (std::int64_t j = 0; j < taps; ++j) {
            row[j] /= sum;
        }
    }

    const auto n_in = static_cast<std::int64_t>(samples.size());
    const auto n_out = static_cast<std::int64_t>(
        std::llround(static_cast<double>(n_in) * static_cast<double>(up) / static_cast<double>(down)));
    std::vector<double> out(static_cast<std::size_t>(n_out));
    for (std::int64_t n = 0; n < n_out; ++n) {
        const std::int64_t pos = n * down;
        const std::int64_t base = pos / up;
        const double* row = &table[static_cast<std::size_t>((pos % up) * taps)];
        const std::int64_t first = base - half + 1;
        const std::int64_t lo = std::max<std::int64_t>(0, -first);
        const std::int64_t hi = std::min<std::int64_t>(taps, n_in - first);
        double acc = 0.0;
        for (std::int64_t j = lo; j < hi; ++j) {
            acc += row[j] * samples[static_cast<std::size_t>(first + j)];
        }
        out[static_cast<std::size_t>(n)] = acc;
    }
    return out;
}

} // namespace pianoscribe::features
