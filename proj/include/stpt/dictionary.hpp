#ifndef STPT_DICTIONARY_HPP_
#define STPT_DICTIONARY_HPP_

#include <utility>
#include <vector>

#include "stpt/audio.hpp"
#include "stpt/tensor.hpp"

namespace stpt {

/// Builds the unnormalized pattern dictionary from one single-note clip
/// per key. Each pattern is the first L spectrogram frames after leading
/// silence (column sum < 1e-6 x clip peak) is dropped, so template 0 is
/// the onset frame. pitch_map comes out ascending.
PatternDictionary build_dictionary(
    const std::vector<std::pair<int, AudioClip>>& note_clips,
    const FrontendConfig& cfg, int L);

}  // namespace stpt

#endif  // STPT_DICTIONARY_HPP_
