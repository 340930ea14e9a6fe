#include "pianoscribe/pianoroll/midi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::roll {

namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const unsigned char> bytes, std::size_t base = 0) : bytes_(bytes), base_(base) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ >= bytes_.size(); }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw FormatError("MIDI parse error at byte " + std::to_string(base_ + pos_) + ": " + what);
    }

    std::uint8_t u8()
    {
        if (pos_ >= bytes_.size()) {
            fail("unexpected end of data");
        }
        return bytes_[pos_++];
    }

    std::uint8_t peek() const
    {
        if (pos_ >= bytes_.size()) {
            fail("unexpected end of data");
        }
        return bytes_[pos_];
    }

    std::uint16_t u16()
    {
        const std::uint16_t hi = u8();
        return static_cast<std::uint16_t>((hi << 8) | u8());
    }

    std::uint32_t u32()
    {
        const std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }

    std::uint32_t vlq()
    {
        std::uint32_t value = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            value = (value << 7) | (b & 0x7F);
            if ((b & 0x80) == 0) {
                return value;
            }
        }
        fail("variable-length quantity longer than 4 bytes");
    }

    std::string tag()
    {
        std::string s;
        for (int i = 0; i < 4; ++i) {
            s.push_back(static_cast<char>(u8()));
        }
        return s;
    }

    void skip(std::size_t n)
    {
        if (n > bytes_.size() - pos_) {
            fail("chunk extends past end of data");
        }
        pos_ += n;
    }

    std::span<const unsigned char> take(std::size_t n)
    {
        if (n > bytes_.size() - pos_) {
            fail("data extends past end of chunk");
        }
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t base_ = 0;
    std::size_t pos_ = 0;
};

struct RawNote {
    std::uint64_t tick;
    std::size_t track;
    std::size_t order;
    bool on;
    int channel;
    int pitch;
};

struct TempoChange {
    std::uint64_t tick;
    std::uint32_t micros_per_quarter;
};

void parse_track(std::span<const unsigned char> data, std::size_t base_offset, std::size_t track,
                 std::vector<RawNote>& notes, std::vector<TempoChange>& tempos)
{
    ByteReader r(data, base_offset);
    std::uint64_t tick = 0;
    std::uint8_t running = 0;
    std::size_t order = 0;
    while (!r.at_end()) {
        tick += r.vlq();
        std::uint8_t status = r.peek();
        if (status & 0x80) {
            r.u8();
        } else {
            if (running == 0) {
                r.fail("data byte without running status");
            }
            status = running;
        }
        if (status == 0xFF) {
            running = 0;
            const std::uint8_t type = r.u8();
            const std::uint32_t len = r.vlq();
            auto payload = r.take(len);
            if (type == 0x51) {
                if (len != 3) {
                    r.fail("tempo event with length " + std::to_string(len));
                }
                const std::uint32_t tempo = (std::uint32_t{payload[0]} << 16) | (std::uint32_t{payload[1]} << 8) |
                                            payload[2];
                if (tempo == 0) {
                    r.fail("zero tempo");
                }
                tempos.push_back({tick, tempo});
            } else if (type == 0x2F) {
                return;
            }
        } else if (status == 0xF0 || status == 0xF7) {
            running = 0;
            r.skip(r.vlq());
        } else if (status >= 0xF1) {
            r.fail("unexpected system message 0x" + std::to_string(status));
        } else {
            running = status;
            const int kind = status & 0xF0;
            const int channel = status & 0x0F;
            const std::uint8_t d1 = r.u8();
            if (kind == 0xC0 || kind == 0xD0) {
                continue;
            }
            const std::uint8_t d2 = r.u8();
            if ((d1 | d2) & 0x80) {
                r.fail("data byte with high bit set");
            }
            if (kind == 0x90 && d2 > 0) {
                notes.push_back({tick, track, order++, true, channel, d1});
            } else if (kind == 0x80 || kind == 0x90) {
                notes.push_back({tick, track, order++, false, channel, d1});
            }
        }
    }
}

} // namespace

MidiNotes midi_to_events(std::span<const unsigned char> bytes)
{
    ByteReader r(bytes);
    if (r.tag() != "MThd") {
        throw FormatError("MIDI parse error at byte 0: missing MThd header");
    }
    const std::uint32_t header_len = r.u32();
    if (header_len < 6) {
        r.fail("header chunk too short");
    }
    const std::uint16_t format = r.u16();
    const std::uint16_t track_count = r.u16();
    const std::uint16_t division = r.u16();
    r.skip(header_len - 6);
    if (format > 1) {
        r.fail("unsupported MIDI format " + std::to_string(format));
    }
    if (division == 0) {
        r.fail("zero time division");
    }

    std::vector<RawNote> raw;
    std::vector<TempoChange> tempos;
    std::size_t tracks_seen = 0;
    while (!r.at_end() && tracks_seen < track_count) {
        const std::string tag = r.tag();
        const std::uint32_t len = r.u32();
        if (tag != "MTrk") {
            r.skip(len);
            continue;
        }
        const std::size_t base = r.offset();
        auto data = r.take(len);
        parse_track(data, base, tracks_seen, raw, tempos);
        ++tracks_seen;
    }
    if (tracks_seen < track_count) {
        r.fail("expected " + std::to_string(track_count) + " tracks, found " + std::to_string(tracks_seen));
    }

    // Tick -> seconds through the merged tempo map.
    std::stable_sort(tempos.begin(), tempos.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    const bool smpte = (division & 0x8000) != 0;
    double smpte_ticks_per_second = 0.0;
    if (smpte) {
        const int fps_code = -static_cast<int>(static_cast<std::int8_t>(division >> 8));
        const double fps = fps_code == 29 ? 29.97 : static_cast<double>(fps_code);
        smpte_ticks_per_second = fps * static_cast<double>(division & 0xFF);
        if (!(smpte_ticks_per_second > 0.0)) {
            throw FormatError("MIDI parse error at byte 12: invalid SMPTE division");
        }
    }
    auto to_seconds = [&](std::uint64_t tick) {
        if (smpte) {
            return static_cast<double>(tick) / smpte_ticks_per_second;
        }
        double seconds = 0.0;
        std::uint64_t last_tick = 0;
        std::uint32_t tempo = 500000;
        for (const TempoChange& change : tempos) {
            if (change.tick >= tick) {
                break;
            }
            seconds += static_cast<double>(change.tick - last_tick) * tempo / (1e6 * division);
            last_tick = change.tick;
            tempo = change.micros_per_quarter;
        }
        return seconds + static_cast<double>(tick - last_tick) * tempo / (1e6 * division);
    };

    std::stable_sort(raw.begin(), raw.end(), [](const RawNote& a, const RawNote& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        if (a.track != b.track) return a.track < b.track;
        return a.order < b.order;
    });

    MidiNotes result;
    std::map<std::pair<int, int>, std::deque<std::uint64_t>> open;
    std::uint64_t last_tick = 0;
    auto emit = [&](int pitch, std::uint64_t on_tick, std::uint64_t off_tick) {
        if (!is_piano_pitch(pitch)) {
            ++result.dropped_out_of_range;
            return;
        }
        if (off_tick <= on_tick) {
            ++result.zero_length_notes;
            return;
        }
        result.events.push_back({pitch, to_seconds(on_tick), to_seconds(off_tick)});
    };
    for (const RawNote& n : raw) {
        last_tick = std::max(last_tick, n.tick);
        auto& queue = open[{n.channel, n.pitch}];
        if (n.on) {
            queue.push_back(n.tick);
        } else if (queue.empty()) {
            ++result.unmatched_note_offs;
        } else {
            emit(n.pitch, queue.front(), n.tick);
            queue.pop_front();
        }
    }
    for (auto& [key, queue] : open) {
        for (std::uint64_t on_tick : queue) {
            ++result.unterminated_notes;
            emit(key.second, on_tick, last_tick);
        }
    }
    std::stable_sort(result.events.begin(), result.events.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
    });
    return result;
}

namespace {

void put_u16(std::vector<unsigned char>& out, std::uint32_t v)
{
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    out.push_back(static_cast<unsigned char>(v & 0xFF));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    put_u16(out, v >> 16);
    put_u16(out, v & 0xFFFF);
}

void put_vlq(std::vector<unsigned char>& out, std::uint32_t v)
{
    std::array<unsigned char, 5> buf{};
    int n = 0;
    buf[n++] = static_cast<unsigned char>(v & 0x7F);
    while ((v >>= 7) != 0) {
        buf[n++] = static_cast<unsigned char>((v & 0x7F) | 0x80);
    }
    while (n > 0) {
        out.push_back(buf[--n]);
    }
}

} // namespace

std::vector<unsigned char> events_to_midi(std::span<const NoteEvent> events, int ticks_per_quarter,
                                          int microseconds_per_quarter)
{
    struct Msg {
        std::uint32_t tick;
        bool on;
        int pitch;
    };
    const double ticks_per_second = ticks_per_quarter * 1e6 / microseconds_per_quarter;
    std::vector<Msg> msgs;
    for (const NoteEvent& e : events) {
        msgs.push_back({static_cast<std::uint32_t>(std::llround(e.onset * ticks_per_second)), true, e.pitch});
        msgs.push_back({static_cast<std::uint32_t>(std::llround(e.offset * ticks_per_second)), false, e.pitch});
    }
    // Releases before attacks at the same tick keep repeated notes separate.
    std::stable_sort(msgs.begin(), msgs.end(), [](const Msg& a, const Msg& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return !a.on && b.on;
    });

    std::vector<unsigned char> track;
    put_vlq(track, 0);
    track.insert(track.end(), {0xFF, 0x51, 0x03});
    track.push_back(static_cast<unsigned char>((microseconds_per_quarter >> 16) & 0xFF));
    track.push_back(static_cast<unsigned char>((microseconds_per_quarter >> 8) & 0xFF));
    track.push_back(static_cast<unsigned char>(microseconds_per_quarter & 0xFF));
    std::uint32_t last = 0;
    for (const Msg& m : msgs) {
        put_vlq(track, m.tick - last);
        last = m.tick;
        track.push_back(m.on ? 0x90 : 0x80);
        track.push_back(static_cast<unsigned char>(m.pitch));
        track.push_back(m.on ? 80 : 0);
    }
    put_vlq(track, 0);
    track.insert(track.end(), {0xFF, 0x2F, 0x00});

    std::vector<unsigned char> out{'M', 'T', 'h', 'd'};
    put_u32(out, 6);
    put_u16(out, 0);
    put_u16(out, 1);
    put_u16(out, static_cast<std::uint32_t>(ticks_per_quarter));
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

} // namespace pianoscribe::roll
