#include "stpt/dictionary.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace stpt {

PatternDictionary build_dictionary(
    const std::vector<std::pair<int, AudioClip>>& note_clips,
    const FrontendConfig& cfg, int L) {
    if (note_clips.empty())
        throw std::invalid_argument("build_dictionary: no note clips given");
    if (L < 1) throw std::invalid_argument("build_dictionary: L must be >= 1");

    std::vector<std::pair<int, AudioClip>> sorted = note_clips;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i].first == sorted[i + 1].first)
            throw std::invalid_argument("build_dictionary: duplicate pitch " +
                                        std::to_string(sorted[i].first));

    const int K = int(sorted.size());
    PatternDictionary P;
    P.sample_rate = cfg.sample_rate;
    P.hop = cfg.hop;
    P.window = cfg.window;
    P.pitch_map.reserve(K);

    for (int k = 0; k < K; ++k) {
        const auto& [pitch, clip] = sorted[k];
        Spectrogram spec = logfreq_spectrogram(clip, cfg);
        const int M = spec.data.rows();
        const int N = spec.data.cols();

        std::vector<double> energy(N, 0.0);
        double peak = 0.0;
        for (int n = 0; n < N; ++n) {
            for (int m = 0; m < M; ++m) energy[n] += spec.data(m, n);
            peak = std::max(peak, energy[n]);
        }
        int start = 0;
        while (start < N && energy[start] < 1e-6 * peak) ++start;

        if (N - start < L)
            throw std::invalid_argument("build_dictionary: clip too short for pitch " +
                                        std::to_string(pitch));

        if (k == 0) P.data = Tensor3(M, L, K, 0.0);
        else if (M != P.data.d0())
            throw std::invalid_argument("build_dictionary: inconsistent bin count");

        for (int l = 0; l < L; ++l)
            for (int m = 0; m < M; ++m) P.data(m, l, k) = spec.data(m, start + l);
        P.pitch_map.push_back(pitch);
    }
    return P;
}

}  // namespace stpt
