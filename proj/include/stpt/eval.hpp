#ifndef STPT_EVAL_HPP_
#define STPT_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "stpt/transcribe.hpp"

namespace stpt {

struct MidiParseResult {
    std::vector<NoteEvent> notes;   // sustain-pedal-adjusted durations
    bool dangling_note_on = false;  // some note-on had no matching off
};

/// Standard MIDI file, format 0 or 1. Tempo map integration converts
/// ticks to seconds. Note-on velocity 0 counts as note-off. A note whose
/// off arrives while the sustain pedal (CC64 >= 64) is down extends to
/// the first pedal release after it.
MidiParseResult parse_midi(const std::vector<uint8_t>& bytes);
MidiParseResult load_midi(const std::string& path);

struct MatchCounts {
    int tp = 0, fp = 0, fn = 0;
};

/// Greedy matching in onset order: each prediction takes the nearest
/// yet-unmatched ground-truth note of equal pitch within the tolerance
/// (ties go to the earlier note). With duration_mode, a match also needs
/// |pred.duration - gt.duration| <= 0.2 gt.duration. `optimal` switches
/// to maximum-cardinality bipartite matching over the admissible pairs.
MatchCounts match_onsets(const std::vector<NoteEvent>& pred,
                         const std::vector<NoteEvent>& gt, double tolerance_sec,
                         bool optimal = false);
MatchCounts match_with_duration(const std::vector<NoteEvent>& pred,
                                const std::vector<NoteEvent>& gt, double tolerance_sec,
                                bool optimal = false);

struct EvalReport {
    int tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f_measure = 0.0;
    double tolerance = 0.0;
    bool duration_mode = false;
    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Conventions: empty prediction vs nonempty truth scores 0; two empty
/// lists score P = R = F = 1.
EvalReport score(const std::vector<NoteEvent>& pred, const std::vector<NoteEvent>& gt,
                 double tolerance_sec, bool duration_mode, bool optimal = false);

}  // namespace stpt

#endif  // STPT_EVAL_HPP_
