#include "stpt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stpt/util.hpp"

namespace stpt {

namespace {
constexpr int kPartials = 8;
constexpr int kBinsPerOctave = 12;  // synthetic log-frequency axis
constexpr double kDecayLo = 0.12;   // per-frame partial decay range
constexpr double kDecayHi = 0.30;
}  // namespace

PatternDictionary gen_dictionary(int K, int L, int M, uint64_t seed) {
    if (K < 1 || L < 1 || M < 1)
        throw std::invalid_argument("gen_dictionary: K, L, M must be >= 1");
    Rng rng(seed);
    PatternDictionary P;
    P.data = Tensor3(M, L, K, 0.0);
    P.sample_rate = 22050.0;
    P.hop = 256;
    P.window = 1024;
    P.pitch_map.resize(K);
    for (int k = 0; k < K; ++k) P.pitch_map[k] = 36 + k;

    // Distinct fundamentals spread over the lower third of the axis.
    std::vector<int> f0(K);
    for (int k = 0; k < K; ++k) {
        const double t = K > 1 ? double(k) / double(K - 1) : 0.0;
        f0[k] = int(std::lround(6.0 + t * (double(M) / 3.0 - 6.0)));
    }
    for (int k = 1; k < K; ++k) f0[k] = std::max(f0[k], f0[k - 1] + 1);

    std::vector<double> decay(kPartials), harm(M);
    for (int k = 0; k < K; ++k) {
        for (int h = 0; h < kPartials; ++h) decay[h] = rng.uniform(kDecayLo, kDecayHi);

        auto harmonic_frame = [&](int l, std::vector<double>& out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (int h = 1; h <= kPartials; ++h) {
                const int b = f0[k] + int(std::lround(kBinsPerOctave * std::log2(double(h))));
                if (b >= 0 && b < M)
                    out[b] += (1.0 / h) * std::exp(-decay[h - 1] * (l - 1));
            }
        };

        harmonic_frame(1, harm);
        double hnorm2 = 0.0;
        for (double x : harm) hnorm2 += x * x;
        const double hnorm = std::sqrt(hnorm2);

        // Attack: flat broadband jitter scaled to twice the harmonic frame norm.
        double unorm2 = 0.0;
        std::vector<double> attack(M);
        for (int m = 0; m < M; ++m) {
            attack[m] = rng.uniform(0.5, 1.0);
            unorm2 += attack[m] * attack[m];
        }
        const double scale = hnorm > 0.0 ? 2.0 * hnorm / std::sqrt(unorm2) : 0.0;
        for (int m = 0; m < M; ++m) P.data(m, 0, k) = attack[m] * scale;

        for (int l = 1; l < L; ++l) {
            harmonic_frame(l, harm);
            for (int m = 0; m < M; ++m) P.data(m, l, k) = harm[m];
        }
    }
    return P;
}

Tensor3 gen_activity(int K, int L, int N, const std::vector<SynthEvent>& events,
                     const MarkovConfig& mc) {
    Tensor3 A(K, L, N, 0.0);
    std::vector<std::vector<std::pair<int, int>>> spans(K);
    for (const auto& e : events) {
        if (e.key < 0 || e.key >= K)
            throw std::invalid_argument("gen_activity: key out of range");
        if (e.length_frames < mc.min_note_len || e.length_frames > L)
            throw std::invalid_argument("gen_activity: length out of range for event at frame " +
                                        std::to_string(e.onset_frame));
        if (e.onset_frame < 0 || e.onset_frame + e.length_frames > N)
            throw std::invalid_argument("gen_activity: event exceeds frame range");
        for (const auto& [lo, hi] : spans[e.key])
            if (!(e.onset_frame + e.length_frames <= lo || hi <= e.onset_frame))
                throw std::invalid_argument("gen_activity: overlapping events for key " +
                                            std::to_string(e.key));
        spans[e.key].emplace_back(e.onset_frame, e.onset_frame + e.length_frames);
        for (int j = 0; j < e.length_frames; ++j)
            A(e.key, j, e.onset_frame + j) = e.gain;
    }
    return A;
}

Spectrogram gen_spectrogram(const PatternDictionary& P, const Tensor3& A,
                            double noise_level, uint64_t seed) {
    if (noise_level < 0.0)
        throw std::invalid_argument("gen_spectrogram: noise_level must be >= 0");
    Spectrogram V;
    V.data = synthesize(P, A);
    V.sample_rate = P.sample_rate;
    V.hop = P.hop;
    V.window = P.window;
    V.freq_map.resize(P.data.d0());
    for (int m = 0; m < P.data.d0(); ++m)
        V.freq_map[m] = 27.5 * std::pow(2.0, double(m) / kBinsPerOctave);

    if (noise_level > 0.0) {
        Rng rng(seed);
        for (size_t i = 0; i < V.data.size(); ++i) {
            const double v = V.data.data()[i] + noise_level * std::abs(rng.gaussian());
            V.data.data()[i] = std::max(v, 0.0);
        }
    }
    return V;
}

double noise_level_for_snr(const PatternDictionary& P, const Tensor3& A, double snr_db) {
    const Mat S = synthesize(P, A);
    const double signal = frobenius_norm(S);
    return signal / (std::pow(10.0, snr_db / 20.0) * std::sqrt(double(S.size())));
}

}  // namespace stpt
