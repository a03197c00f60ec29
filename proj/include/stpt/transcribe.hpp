#ifndef STPT_TRANSCRIBE_HPP_
#define STPT_TRANSCRIBE_HPP_

#include <string>
#include <vector>

#include "stpt/admm.hpp"
#include "stpt/audio.hpp"
#include "stpt/refiner.hpp"
#include "stpt/tensor.hpp"

namespace stpt {

struct NoteEvent {
    int pitch = 0;           // MIDI number
    double onset = 0.0;      // seconds
    double duration = 0.0;   // seconds, >= 0
    double intensity = 0.0;  // activation value at the onset
};

enum class DecodeMode { kDirect, kHmm };

struct PipelineConfig {
    ObjectiveSpec objective;           // lambda1 = 0.1, lambda2 = 0.4 defaults
    FrontendConfig frontend;
    int min_note_frames = 9;           // L_M; 9 frames ~ 100 ms at default hop
    double calibration_margin = 0.10;  // a_m = (1 - margin) * max activation
    bool use_refiner = false;
    DecodeMode decode_mode = DecodeMode::kDirect;
    SolveOpts solve;
    RefineOpts refine;

    /// Markov config over L templates with the frontend's overlap.
    MarkovConfig markov_for(int L) const;
    void validate() const;
};

/// Runs the Markov-regularized (no threshold) two-stage solve on the soft
/// note and returns (1 - margin) x the maximum activation. Throws on a
/// silent clip (max activation ~ 0).
double calibrate(const AudioClip& soft_note, const PatternDictionary& P,
                 const PipelineConfig& cfg);
double calibrate(const Spectrogram& V, const PatternDictionary& P,
                 const PipelineConfig& cfg);

/// Onset at (k, n) iff A[k,0,n] >= a_m and it is the window maximum over
/// frames n - L_M .. n + L_M (clamped); plateaus keep only the earliest
/// frame. Events come back with duration 0 and intensity A[k,0,n].
std::vector<NoteEvent> detect_onsets(const Tensor3& A, double a_m, int L_M,
                                     double hop_seconds,
                                     const std::vector<int>& pitch_map);

/// Walks each onset's diagonal while A[k,l,n+l] >= a_m (chain from l=0);
/// duration = chain length x hop_seconds, at least one frame.
std::vector<NoteEvent> estimate_durations(const Tensor3& A,
                                          const std::vector<NoteEvent>& onsets,
                                          double a_m, double hop_seconds,
                                          const std::vector<int>& pitch_map);

/// Same walk over a binary tensor (chain of exact ones).
std::vector<NoteEvent> estimate_durations_binary(const Tensor3& B,
                                                 const std::vector<NoteEvent>& onsets,
                                                 double hop_seconds,
                                                 const std::vector<int>& pitch_map);

/// HMM-style alternative: per key, Markov-decode A(k,:,:) directly and
/// emit one event per incrementing state run starting at a supra-threshold
/// frame; duration = run length.
std::vector<NoteEvent> decode_hmm(const Tensor3& A, double a_m, const MarkovConfig& mc,
                                  double hop_seconds, const std::vector<int>& pitch_map);

/// frontend -> two-stage solve -> optional duration refiner -> decode.
/// Events sorted by (onset, pitch).
std::vector<NoteEvent> transcribe(const AudioClip& recording, const PatternDictionary& P,
                                  double a_m, const PipelineConfig& cfg,
                                  SolveReport* report = nullptr);
std::vector<NoteEvent> transcribe(const Spectrogram& V, const PatternDictionary& P,
                                  double a_m, const PipelineConfig& cfg,
                                  SolveReport* report = nullptr);

/// CSV: header onset_sec,pitch_midi,duration_sec,intensity; 6 decimals;
/// sorted by onset then pitch.
void write_notes_csv(const std::string& path, const std::vector<NoteEvent>& events);
std::string notes_to_csv(const std::vector<NoteEvent>& events);
std::vector<NoteEvent> read_notes_csv(const std::string& path);

/// Standard MIDI file, format 0, 480 ticks per quarter, one fixed
/// 120 BPM tempo event, note-on velocity 64.
void write_notes_midi(const std::string& path, const std::vector<NoteEvent>& events);

void sort_events(std::vector<NoteEvent>& events);

}  // namespace stpt

#endif  // STPT_TRANSCRIBE_HPP_
