#include "pianoscribe/pianoroll/pianoroll.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "pianoscribe/common/binary_io.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"

namespace pianoscribe::roll {

PianoRoll::PianoRoll(std::size_t frames, double frame_rate, std::size_t pitches)
    : frames_(frames), pitches_(pitches), frame_rate_(frame_rate), cells_(frames * pitches, 0)
{
    if (!(frame_rate > 0.0)) {
        throw ConfigError("frame rate must be positive");
    }
}

std::size_t PianoRoll::active_count() const
{
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

namespace {

// Smallest frame index t with t / rate >= time.
std::size_t first_frame_at_or_after(double time, double rate)
{
    if (time <= 0.0) {
        return 0;
    }
    auto t = static_cast<std::size_t>(std::ceil(time * rate));
    while (t > 0 && static_cast<double>(t - 1) / rate >= time) {
        --t;
    }
    while (static_cast<double>(t) / rate < time) {
        ++t;
    }
    return t;
}

} // namespace

PianoRoll events_to_roll(std::span<const NoteEvent> events, double frame_rate, double duration)
{
    if (!(frame_rate > 0.0)) {
        throw ConfigError("frame rate must be positive");
    }
    const auto frames = static_cast<std::size_t>(std::ceil(std::max(0.0, duration) * frame_rate));
    PianoRoll roll(frames, frame_rate);
    for (const NoteEvent& e : events) {
        if (!is_piano_pitch(e.pitch)) {
            throw DataError("note pitch " + std::to_string(e.pitch) + " outside the piano range");
        }
        const std::size_t begin = first_frame_at_or_after(e.onset, frame_rate);
        const std::size_t end = std::min(frames, first_frame_at_or_after(e.offset, frame_rate));
        const auto column = static_cast<std::size_t>(e.pitch - kLowestPitch);
        for (std::size_t t = begin; t < end; ++t) {
            roll.set(t, column);
        }
    }
    return roll;
}

std::vector<NoteEvent> roll_to_events(const PianoRoll& roll)
{
    std::vector<NoteEvent> events;
    const double rate = roll.frame_rate();
    for (std::size_t p = 0; p < roll.pitches(); ++p) {
        std::size_t t = 0;
        while (t < roll.frames()) {
            if (!roll.active(t, p)) {
                ++t;
                continue;
            }
            const std::size_t start = t;
            while (t < roll.frames() && roll.active(t, p)) {
                ++t;
            }
            events.push_back({kLowestPitch + static_cast<int>(p), static_cast<double>(start) / rate,
                              static_cast<double>(t) / rate});
        }
    }
    std::sort(events.begin(), events.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
    });
    return events;
}

void write_roll(std::ostream& out, const PianoRoll& roll)
{
    if (roll.pitches() != kPitchCount) {
        throw DimensionError("PSPR files hold 88-pitch rolls, got " + std::to_string(roll.pitches()));
    }
    io::write_magic(out, "PSPR");
    io::write_le<std::uint32_t>(out, kRollFormatVersion);
    io::write_le<std::uint64_t>(out, roll.frames());
    io::write_le<double>(out, roll.frame_rate());
    for (std::size_t t = 0; t < roll.frames(); ++t) {
        std::array<char, 11> packed{};
        for (std::size_t p = 0; p < kPitchCount; ++p) {
            if (roll.active(t, p)) {
                packed[p / 8] = static_cast<char>(packed[p / 8] | (1 << (p % 8)));
            }
        }
        out.write(packed.data(), packed.size());
    }
}

PianoRoll read_roll(std::istream& in)
{
    io::expect_magic(in, "PSPR");
    const auto version = io::read_le<std::uint32_t>(in);
    if (version != kRollFormatVersion) {
        throw FormatError("unsupported PSPR version " + std::to_string(version));
    }
    const auto frames = io::read_le<std::uint64_t>(in);
    const auto rate = io::read_le<double>(in);
    if (!(rate > 0.0) || frames > (std::uint64_t{1} << 32)) {
        throw FormatError("invalid PSPR header");
    }
    PianoRoll roll(static_cast<std::size_t>(frames), rate);
    for (std::size_t t = 0; t < frames; ++t) {
        std::array<unsigned char, 11> packed{};
        in.read(reinterpret_cast<char*>(packed.data()), packed.size());
        if (!in) {
            throw FormatError("truncated PSPR payload at frame " + std::to_string(t));
        }
        for (std::size_t p = 0; p < kPitchCount; ++p) {
            if ((packed[p / 8] >> (p % 8)) & 1) {
                roll.set(t, p);
            }
        }
    }
    return roll;
}

void save_roll(const std::filesystem::path& path, const PianoRoll& roll)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_roll(out, roll); });
}

PianoRoll load_roll(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open roll file " + path.string());
    }
    return read_roll(in);
}

namespace {

std::string format_double(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), ptr};
}

double parse_double(const std::string& s, std::size_t line)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("bad number '" + s + "' on CSV line " + std::to_string(line));
    }
    return v;
}

} // namespace

void write_events_csv(std::ostream& out, std::span<const NoteEvent> events)
{
    out << "pitch,onset,offset\n";
    for (const NoteEvent& e : events) {
        out << e.pitch << ',' << format_double(e.onset) << ',' << format_double(e.offset) << '\n';
    }
}

std::vector<NoteEvent> read_events_csv(std::istream& in)
{
    std::vector<NoteEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || (line_no == 1 && line.rfind("pitch", 0) == 0)) {
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            throw FormatError("expected 3 fields on CSV line " + std::to_string(line_no));
        }
        NoteEvent e;
        e.pitch = static_cast<int>(parse_double(a, line_no));
        e.onset = parse_double(b, line_no);
        e.offset = parse_double(c, line_no);
        events.push_back(e);
    }
    return events;
}

void save_events_csv(const std::filesystem::path& path, std::span<const NoteEvent> events)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_events_csv(out, events); });
}

std::vector<NoteEvent> load_events_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return read_events_csv(in);
}

} // namespace pianoscribe::roll
