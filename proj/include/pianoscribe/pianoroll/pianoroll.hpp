#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace pianoscribe::roll {

inline constexpr int kLowestPitch = 21;   // A0
inline constexpr int kHighestPitch = 108; // C8
inline constexpr std::size_t kPitchCount = 88;

inline constexpr bool is_piano_pitch(int midi_pitch)
{
    return midi_pitch >= kLowestPitch && midi_pitch <= kHighestPitch;
}

/// A note with onset and offset in seconds.
struct NoteEvent {
    int pitch = 60;
    double onset = 0.0;
    double offset = 0.0;

    friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Binary time x pitch matrix. Column i stands for MIDI pitch 21 + i when the
/// roll is 88 wide; narrower rolls are used by the decoders on reduced pitch sets.
class PianoRoll {
public:
    PianoRoll() = default;
    PianoRoll(std::size_t frames, double frame_rate, std::size_t pitches = kPitchCount);

    std::size_t frames() const { return frames_; }
    std::size_t pitches() const { return pitches_; }
    double frame_rate() const { return frame_rate_; }

    bool active(std::size_t frame, std::size_t pitch) const { return cells_[frame * pitches_ + pitch] != 0; }
    void set(std::size_t frame, std::size_t pitch, bool on = true)
    {
        cells_[frame * pitches_ + pitch] = on ? 1 : 0;
    }

    std::span<const std::uint8_t> row(std::size_t frame) const
    {
        return {cells_.data() + frame * pitches_, pitches_};
    }

    std::size_t active_count() const;

    friend bool operator==(const PianoRoll&, const PianoRoll&) = default;

private:
    std::size_t frames_ = 0;
    std::size_t pitches_ = kPitchCount;
    double frame_rate_ = 1.0;
    std::vector<std::uint8_t> cells_;
};

/// Cell (t, p) is set iff onset <= t / frame_rate < offset. The roll has
/// ceil(duration * frame_rate) frames; events running past the end are cut.
PianoRoll events_to_roll(std::span<const NoteEvent> events, double frame_rate, double duration);

/// Each maximal run of active frames in a column becomes one note spanning
/// [start, end + 1) / frame_rate. Events are sorted by onset then pitch.
std::vector<NoteEvent> roll_to_events(const PianoRoll& roll);

// "PSPR" roll file: magic | version u32 | T u64 | frame_rate f64 | T x 11
// bytes, pitch i stored in byte i / 8 at bit i % 8 (least significant first).
inline constexpr std::uint32_t kRollFormatVersion = 1;

void write_roll(std::ostream& out, const PianoRoll& roll);
PianoRoll read_roll(std::istream& in);
void save_roll(const std::filesystem::path& path, const PianoRoll& roll);
PianoRoll load_roll(const std::filesystem::path& path);

/// CSV with header "pitch,onset,offset".
void write_events_csv(std::ostream& out, std::span<const NoteEvent> events);
std::vector<NoteEvent> read_events_csv(std::istream& in);
void save_events_csv(const std::filesystem::path& path, std::span<const NoteEvent> events);
std::vector<NoteEvent> load_events_csv(const std::filesystem::path& path);

} // namespace pianoscribe::roll
