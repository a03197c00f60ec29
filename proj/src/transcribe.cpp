#include "stpt/transcribe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stpt {

MarkovConfig PipelineConfig::markov_for(int L) const {
    MarkovConfig mc;
    mc.templates = L;
    mc.min_note_len = std::min(min_note_frames, L);
    mc.overlap = frontend.overlap_frames();
    return mc;
}

void PipelineConfig::validate() const {
    if (calibration_margin < 0.0 || calibration_margin >= 1.0)
        throw std::invalid_argument("pipeline: calibration_margin must be in [0, 1)");
    if (min_note_frames < 1)
        throw std::invalid_argument("pipeline: min_note_frames must be >= 1");
}

double calibrate(const Spectrogram& V, const PatternDictionary& P,
                 const PipelineConfig& cfg) {
    cfg.validate();
    ObjectiveSpec spec = cfg.objective;
    spec.use_markov = true;
    spec.use_threshold = false;
    spec.mc = cfg.markov_for(P.num_templates());

    SolveReport rep = two_stage_solve(V.data, P, spec, cfg.solve);
    double mx = 0.0;
    for (size_t i = 0; i < rep.activity.size(); ++i)
        mx = std::max(mx, rep.activity.data()[i]);
    const double a_m = (1.0 - cfg.calibration_margin) * mx;
    if (!(a_m > 1e-12))
        throw std::invalid_argument("calibrate: silent clip, no activation found");
    return a_m;
}

double calibrate(const AudioClip& soft_note, const PatternDictionary& P,
                 const PipelineConfig& cfg) {
    return calibrate(logfreq_spectrogram(soft_note, cfg.frontend), P, cfg);
}

std::vector<NoteEvent> detect_onsets(const Tensor3& A, double a_m, int L_M,
                                     double hop_seconds,
                                     const std::vector<int>& pitch_map) {
    const int K = A.d0(), N = A.d2();
    std::vector<NoteEvent> out;
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n) {
            const double v = A(k, 0, n);
            if (v < a_m) continue;
            const int lo = std::max(0, n - L_M);
            const int hi = std::min(N - 1, n + L_M);
            bool keep = true;
            // Strict against earlier frames so a plateau reports once.
            for (int m = lo; m < n && keep; ++m)
                if (A(k, 0, m) >= v) keep = false;
            for (int m = n + 1; m <= hi && keep; ++m)
                if (A(k, 0, m) > v) keep = false;
            if (keep)
                out.push_back({pitch_map[k], n * hop_seconds, 0.0, v});
        }
    }
    sort_events(out);
    return out;
}

namespace {

int key_of_pitch(const std::vector<int>& pitch_map, int pitch) {
    for (size_t k = 0; k < pitch_map.size(); ++k)
        if (pitch_map[k] == pitch) return int(k);
    throw std::invalid_argument("pitch not in dictionary: " + std::to_string(pitch));
}

template <typename Pred>
std::vector<NoteEvent> walk_diagonals(const Tensor3& src,
                                      const std::vector<NoteEvent>& onsets,
                                      double hop_seconds,
                                      const std::vector<int>& pitch_map, Pred alive) {
    const int L = src.d1(), N = src.d2();
    std::vector<NoteEvent> out;
    out.reserve(onsets.size());
    for (const NoteEvent& e : onsets) {
        const int k = key_of_pitch(pitch_map, e.pitch);
        const int n0 = int(std::lround(e.onset / hop_seconds));
        int len = 0;
        while (len < L && n0 + len < N && alive(src(k, len, n0 + len))) ++len;
        NoteEvent ev = e;
        ev.duration = std::max(len, 1) * hop_seconds;
        out.push_back(ev);
    }
    sort_events(out);
    return out;
}

}  // namespace

std::vector<NoteEvent> estimate_durations(const Tensor3& A,
                                          const std::vector<NoteEvent>& onsets,
                                          double a_m, double hop_seconds,
                                          const std::vector<int>& pitch_map) {
    return walk_diagonals(A, onsets, hop_seconds, pitch_map,
                          [a_m](double v) { return v >= a_m; });
}

std::vector<NoteEvent> estimate_durations_binary(const Tensor3& B,
                                                 const std::vector<NoteEvent>& onsets,
                                                 double hop_seconds,
                                                 const std::vector<int>& pitch_map) {
    return walk_diagonals(B, onsets, hop_seconds, pitch_map,
                          [](double v) { return v >= 0.5; });
}

std::vector<NoteEvent> decode_hmm(const Tensor3& A, double a_m, const MarkovConfig& mc,
                                  double hop_seconds, const std::vector<int>& pitch_map) {
    const int K = A.d0(), N = A.d2();
    MarkovProjection proj = markov_project(A, mc);
    std::vector<NoteEvent> out;
    for (int k = 0; k < K; ++k) {
        const std::vector<int>& seq = proj.sequences[k];
        int n = 0;
        while (n < N) {
            if (seq[n] != 0) { ++n; continue; }
            // Run of incrementing states starting at state 0.
            int run = 1;
            while (n + run < N && seq[n + run] == run) ++run;
            if (A(k, 0, n) >= a_m)
                out.push_back({pitch_map[k], n * hop_seconds, run * hop_seconds, A(k, 0, n)});
            n += run;
        }
    }
    sort_events(out);
    return out;
}

std::vector<NoteEvent> transcribe(const Spectrogram& V, const PatternDictionary& P,
                                  double a_m, const PipelineConfig& cfg,
                                  SolveReport* report) {
    cfg.validate();
    const int L = P.num_templates();
    ObjectiveSpec spec = cfg.objective;
    spec.use_markov = true;
    spec.use_threshold = true;
    spec.a_m = a_m;
    spec.mc = cfg.markov_for(L);

    SolveReport rep = two_stage_solve(V.data, P, spec, cfg.solve);
    const Tensor3& A = rep.activity;
    const double hop_sec = V.hop > 0 ? double(V.hop) / V.sample_rate : P.hop_seconds();

    std::vector<NoteEvent> events;
    if (cfg.decode_mode == DecodeMode::kHmm) {
        events = decode_hmm(A, a_m, spec.mc, hop_sec, P.pitch_map);
    } else {
        events = detect_onsets(A, a_m, cfg.min_note_frames, hop_sec, P.pitch_map);
        if (cfg.use_refiner) {
            auto [b0, g0] = init_bg(A, a_m);
            RefineResult ref = refine(V.data, P, b0, g0, a_m, spec.mc, cfg.refine);
            events = estimate_durations_binary(ref.B, events, hop_sec, P.pitch_map);
        } else {
            events = estimate_durations(A, events, a_m, hop_sec, P.pitch_map);
        }
    }
    if (report) *report = std::move(rep);
    sort_events(events);
    return events;
}

std::vector<NoteEvent> transcribe(const AudioClip& recording, const PatternDictionary& P,
                                  double a_m, const PipelineConfig& cfg,
                                  SolveReport* report) {
    if (recording.samples.empty()) return {};
    Spectrogram V = logfreq_spectrogram(recording, cfg.frontend);
    return transcribe(V, P, a_m, cfg, report);
}

void sort_events(std::vector<NoteEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const NoteEvent& a, const NoteEvent& b) {
        if (a.onset != b.onset) return a.onset < b.onset;
        return a.pitch < b.pitch;
    });
}

std::string notes_to_csv(const std::vector<NoteEvent>& events) {
    std::vector<NoteEvent> sorted = events;
    sort_events(sorted);
    std::string out = "onset_sec,pitch_midi,duration_sec,intensity\n";
    char line[128];
    for (const NoteEvent& e : sorted) {
        std::snprintf(line, sizeof line, "%.6f,%d,%.6f,%.6f\n", e.onset, e.pitch,
                      e.duration, e.intensity);
        out += line;
    }
    return out;
}

void write_notes_csv(const std::string& path, const std::vector<NoteEvent>& events) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << notes_to_csv(events);
}

std::vector<NoteEvent> read_notes_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("note csv: empty file: " + path);
    std::vector<NoteEvent> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        NoteEvent e;
        std::istringstream ss(line);
        std::string field;
        try {
            std::getline(ss, field, ',');
            e.onset = std::stod(field);
            std::getline(ss, field, ',');
            e.pitch = std::stoi(field);
            std::getline(ss, field, ',');
            e.duration = std::stod(field);
            if (std::getline(ss, field, ',')) e.intensity = std::stod(field);
        } catch (const std::exception&) {
            throw std::runtime_error("note csv: bad line in " + path + ": " + line);
        }
        out.push_back(e);
    }
    return out;
}

namespace {

void push_varlen(std::vector<uint8_t>& out, uint32_t value) {
    uint8_t buf[4];
    int n = 0;
    buf[n++] = value & 0x7f;
    while (value >>= 7) buf[n++] = 0x80 | (value & 0x7f);
    while (n--) out.push_back(buf[n]);
}

}  // namespace

void write_notes_midi(const std::string& path, const std::vector<NoteEvent>& events) {
    constexpr int kTicksPerQuarter = 480;
    constexpr double kSecondsPerQuarter = 0.5;  // 120 BPM
    auto to_ticks = [&](double sec) {
        return uint32_t(std::lround(sec / kSecondsPerQuarter * kTicksPerQuarter));
    };

    struct MidiMoment {
        uint32_t tick;
        int order;  // offs before ons at the same tick
        uint8_t status, d1, d2;
    };
    std::vector<MidiMoment> moments;
    for (const NoteEvent& e : events) {
        const uint32_t on = to_ticks(e.onset);
        const uint32_t off = std::max(on + 1, to_ticks(e.onset + e.duration));
        moments.push_back({on, 1, 0x90, uint8_t(e.pitch), 64});
        moments.push_back({off, 0, 0x80, uint8_t(e.pitch), 0});
    }
    std::sort(moments.begin(), moments.end(), [](const MidiMoment& a, const MidiMoment& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        if (a.order != b.order) return a.order < b.order;
        return a.d1 < b.d1;
    });

    std::vector<uint8_t> track;
    // Tempo meta event: 500000 us per quarter.
    push_varlen(track, 0);
    const uint8_t tempo[] = {0xff, 0x51, 0x03, 0x07, 0xa1, 0x20};
    track.insert(track.end(), tempo, tempo + 6);
    uint32_t cursor = 0;
    for (const MidiMoment& m : moments) {
        push_varlen(track, m.tick - cursor);
        cursor = m.tick;
        track.push_back(m.status);
        track.push_back(m.d1);
        track.push_back(m.d2);
    }
    push_varlen(track, 0);
    const uint8_t eot[] = {0xff, 0x2f, 0x00};
    track.insert(track.end(), eot, eot + 3);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    auto be16 = [&](uint16_t v) {
        out.put(char(v >> 8));
        out.put(char(v & 0xff));
    };
    auto be32 = [&](uint32_t v) {
        out.put(char(v >> 24));
        out.put(char((v >> 16) & 0xff));
        out.put(char((v >> 8) & 0xff));
        out.put(char(v & 0xff));
    };
    out.write("MThd", 4);
    be32(6);
    be16(0);  // format 0
    be16(1);  // one track
    be16(kTicksPerQuarter);
    out.write("MTrk", 4);
    be32(uint32_t(track.size()));
    out.write(reinterpret_cast<const char*>(track.data()), std::streamsize(track.size()));
}

}  // namespace stpt
