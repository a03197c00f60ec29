#include "stpt/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace stpt {

namespace {

uint32_t read_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace

std::vector<double> FrontendConfig::make_freq_map() const {
    validate();
    std::vector<double> centers;
    for (int m = 0;; ++m) {
        const double f = f_min * std::pow(2.0, double(m) / bins_per_octave);
        if (f > f_max) break;
        centers.push_back(f);
    }
    return centers;
}

void FrontendConfig::validate() const {
    if (!(f_min < f_max) || !(f_max <= sample_rate / 2.0))
        throw std::invalid_argument("frontend: need f_min < f_max <= sample_rate/2");
    if (hop < 1 || window < hop)
        throw std::invalid_argument("frontend: need window >= hop >= 1");
    if (bins_per_octave < 1)
        throw std::invalid_argument("frontend: bins_per_octave must be >= 1");
}

AudioClip decode_wav(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("decode_wav: malformed header");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    const uint8_t* data = nullptr;
    size_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const uint32_t chunk_size = read_u32(bytes.data() + pos + 4);
        const uint8_t* body = bytes.data() + pos + 8;
        if (pos + 8 + chunk_size > bytes.size()) {
            if (std::memcmp(bytes.data() + pos, "data", 4) == 0)
                throw std::runtime_error("decode_wav: truncated data chunk");
            throw std::runtime_error("decode_wav: truncated chunk");
        }
        if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw std::runtime_error("decode_wav: malformed header");
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32(body + 4);
            bits = read_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            data = body;
            data_len = chunk_size;
        }
        pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr)
        throw std::runtime_error("decode_wav: malformed header");
    if (channels < 1 || channels > 2)
        throw std::runtime_error("decode_wav: unsupported channel count");
    const bool pcm16 = format == 1 && bits == 16;
    const bool f32 = format == 3 && bits == 32;
    if (!pcm16 && !f32)
        throw std::runtime_error("decode_wav: unsupported codec");

    const size_t bytes_per_sample = pcm16 ? 2 : 4;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t frames = data_len / frame_bytes;

    AudioClip clip;
    clip.sample_rate = double(rate);
    clip.samples.resize(frames);
    for (size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int ch = 0; ch < channels; ++ch) {
            const uint8_t* sp = data + i * frame_bytes + ch * bytes_per_sample;
            if (pcm16) {
                const int16_t s = int16_t(read_u16(sp));
                acc += double(s) / 32768.0;
            } else {
                float f;
                std::memcpy(&f, sp, 4);
                acc += double(f);
            }
        }
        clip.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
    }
    return clip;
}

AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

void save_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const uint32_t n = uint32_t(clip.samples.size());
    const uint32_t data_len = n * 2;
    const uint32_t rate = uint32_t(clip.sample_rate);
    auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(1);          // PCM
    u16(1);          // mono
    u32(rate);
    u32(rate * 2);   // byte rate
    u16(2);          // block align
    u16(16);         // bits
    out.write("data", 4);
    u32(data_len);
    for (double s : clip.samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const int16_t q = int16_t(std::lround(clamped * 32767.0));
        u16(uint16_t(q));
    }
}

namespace {
// FFTW planning is not thread-safe; execution of a plan on its own buffers is.
std::mutex g_fftw_plan_mutex;
}  // namespace

Spectrogram logfreq_spectrogram(const AudioClip& clip, const FrontendConfig& cfg) {
    cfg.validate();
    if (clip.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("logfreq_spectrogram: sample-rate mismatch (no resampler)");
    const int w = cfg.window, s = cfg.hop;
    const long len = long(clip.samples.size());
    if (len < w)
        throw std::invalid_argument("logfreq_spectrogram: clip shorter than one window");
    const int N = int((len - w) / s) + 1;

    const std::vector<double> centers = cfg.make_freq_map();
    const int M = int(centers.size());
    const int half = w / 2;

    // Unit-peak triangular filters over the DFT bin frequencies; edge
    // filters extend one log step beyond the first/last center.
    const double step = std::pow(2.0, 1.0 / cfg.bins_per_octave);
    Mat filters(M, half + 1, 0.0);
    for (int m = 0; m < M; ++m) {
        const double lo = m > 0 ? centers[m - 1] : centers[0] / step;
        const double mid = centers[m];
        const double hi = m + 1 < M ? centers[m + 1] : centers[M - 1] * step;
        for (int i = 0; i <= half; ++i) {
            const double f = double(i) * cfg.sample_rate / w;
            if (f <= lo || f >= hi) continue;
            filters(m, i) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
    }

    std::vector<double> hann(w);
    for (int i = 0; i < w; ++i)
        hann[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i) / w));

    Spectrogram V;
    V.data = Mat(M, N, 0.0);
    V.sample_rate = cfg.sample_rate;
    V.hop = s;
    V.window = w;
    V.freq_map = centers;

    double* in = fftw_alloc_real(w);
    fftw_complex* out = fftw_alloc_complex(half + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
        plan = fftw_plan_dft_r2c_1d(w, in, out, FFTW_ESTIMATE);
    }

    std::vector<double> mag(half + 1);
    for (int t = 0; t < N; ++t) {
        const double* src = clip.samples.data() + size_t(t) * s;
        for (int i = 0; i < w; ++i) in[i] = src[i] * hann[i];
        fftw_execute(plan);
        for (int i = 0; i <= half; ++i)
            mag[i] = std::hypot(out[i][0], out[i][1]);
        for (int m = 0; m < M; ++m) {
            double acc = 0.0;
            const double* f = filters.data() + size_t(m) * (half + 1);
            for (int i = 0; i <= half; ++i) acc += f[i] * mag[i];
            V.data(m, t) = acc;
        }
    }

    {
        std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return V;
}

}  // namespace stpt
