#ifndef STPT_AUDIO_HPP_
#define STPT_AUDIO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "stpt/tensor.hpp"

namespace stpt {

struct AudioClip {
    std::vector<double> samples;  // mono, in [-1, 1]
    double sample_rate = 0.0;
};

struct FrontendConfig {
    double sample_rate = 22050.0;
    int window = 1024;           // w, samples
    int hop = 256;               // s, samples
    int bins_per_octave = 36;
    double f_min = 27.5;         // Hz
    double f_max = 11025.0;      // Hz

    /// Consecutive-template overlap for the Markov encoding, ceil(w/s).
    int overlap_frames() const { return int((window + hop - 1) / hop); }
    /// Log-spaced centers f_min * 2^(m / bins_per_octave) up to f_max.
    std::vector<double> make_freq_map() const;
    void validate() const;
};

/// RIFF/WAVE, PCM16 or IEEE float32, 1-2 channels. Channels average to
/// mono; 16-bit sample x maps to x / 32768.
AudioClip decode_wav(const std::vector<uint8_t>& bytes);
AudioClip load_wav(const std::string& path);
void save_wav(const std::string& path, const AudioClip& clip);  // PCM16 mono

/// Hann-windowed magnitude DFT mapped to log-spaced bins by a
/// unit-peak triangular filterbank. Frame t covers samples
/// [t*hop, t*hop + window); N = floor((len - window)/hop) + 1.
Spectrogram logfreq_spectrogram(const AudioClip& clip, const FrontendConfig& cfg);

}  // namespace stpt

#endif  // STPT_AUDIO_HPP_
