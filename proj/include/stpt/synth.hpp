#ifndef STPT_SYNTH_HPP_
#define STPT_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "stpt/prox.hpp"
#include "stpt/tensor.hpp"

namespace stpt {

struct SynthEvent {
    int key = 0;            // 0-based key index
    int onset_frame = 0;
    int length_frames = 1;
    double gain = 1.0;
};

/// Synthetic attack-then-decay dictionary: frame 0 is a broadband attack
/// (column norm 2x the first harmonic frame), frames >= 1 are 8-partial
/// harmonic stacks (amplitude 1/h) with per-partial exponential decay
/// drawn per key from a seeded range. Keys get distinct fundamentals.
PatternDictionary gen_dictionary(int K, int L, int M, uint64_t seed);

/// Places each event's constant-gain diagonal into a K x L x N tensor.
/// The result is a member of the Markov-state set. Throws on per-key
/// overlaps or lengths outside [min_note_len, L].
Tensor3 gen_activity(int K, int L, int N, const std::vector<SynthEvent>& events,
                     const MarkovConfig& mc);

/// V = max(synthesize(P, A) + noise_level * |gaussian|, 0), seeded.
Spectrogram gen_spectrogram(const PatternDictionary& P, const Tensor3& A,
                            double noise_level, uint64_t seed);

/// noise_level that yields the requested SNR (dB) against synthesize(P, A).
double noise_level_for_snr(const PatternDictionary& P, const Tensor3& A, double snr_db);

}  // namespace stpt

#endif  // STPT_SYNTH_HPP_
