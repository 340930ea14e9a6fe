#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pianoscribe/pianoroll/pianoroll.hpp"

namespace pianoscribe::roll {

struct MidiNotes {
    std::vector<NoteEvent> events;
    std::size_t dropped_out_of_range = 0;  // pitches outside A0..C8
    std::size_t unmatched_note_offs = 0;
    std::size_t unterminated_notes = 0;    // note-ons never released; closed at end of file
    std::size_t zero_length_notes = 0;
};

/// Parses a type-0 or type-1 Standard MIDI File. Note-ons are paired with
/// note-offs (or velocity-0 note-ons) per channel and pitch, first-on with
/// first-off. The tempo map from all tracks is applied; sustain pedal is
/// ignored. Throws FormatError with the byte offset on malformed input.
MidiNotes midi_to_events(std::span<const unsigned char> bytes);

/// Writes a type-0 file at a fixed tempo. Used by the toy corpus generator
/// and test fixtures.
std::vector<unsigned char> events_to_midi(std::span<const NoteEvent> events, int ticks_per_quarter = 480,
                                          int microseconds_per_quarter = 500000);

} // namespace pianoscribe::roll
