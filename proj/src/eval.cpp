#include "stpt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

namespace stpt {

namespace {

struct RawEvent {
    uint64_t tick = 0;
    int track = 0, index = 0;     // file order for same-tick stability
    uint8_t status = 0, d1 = 0, d2 = 0;
    uint32_t tempo = 0;           // for meta 0x51
    bool is_tempo = false;
};

class MidiReader {
public:
    MidiReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}

    uint8_t u8() {
        if (pos_ >= n_) throw std::runtime_error("parse_midi: malformed chunk (truncated)");
        return p_[pos_++];
    }
    uint16_t be16() { return uint16_t(u8()) << 8 | u8(); }
    uint32_t be32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | u8();
        return v;
    }
    uint32_t varlen() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const uint8_t b = u8();
            v = v << 7 | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw std::runtime_error("parse_midi: malformed variable-length quantity");
    }
    void skip(size_t n) {
        if (pos_ + n > n_) throw std::runtime_error("parse_midi: malformed chunk (truncated)");
        pos_ += n;
    }
    size_t pos() const { return pos_; }
    void seek(size_t p) { pos_ = p; }
    bool check_magic(const char* magic) {
        if (pos_ + 4 > n_) return false;
        const bool ok = std::memcmp(p_ + pos_, magic, 4) == 0;
        pos_ += 4;
        return ok;
    }

private:
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

}  // namespace

MidiParseResult parse_midi(const std::vector<uint8_t>& bytes) {
    MidiReader r(bytes.data(), bytes.size());
    if (!r.check_magic("MThd")) throw std::runtime_error("parse_midi: malformed chunk (no MThd)");
    const uint32_t header_len = r.be32();
    if (header_len < 6) throw std::runtime_error("parse_midi: malformed chunk (header)");
    const uint16_t format = r.be16();
    const uint16_t num_tracks = r.be16();
    const uint16_t division = r.be16();
    r.skip(header_len - 6);
    if (format > 1) throw std::runtime_error("parse_midi: unsupported format " + std::to_string(format));
    if (division & 0x8000) throw std::runtime_error("parse_midi: SMPTE division unsupported");
    const double tpq = double(division);

    std::vector<RawEvent> events;
    int index = 0;
    for (int t = 0; t < num_tracks; ++t) {
        if (!r.check_magic("MTrk")) throw std::runtime_error("parse_midi: malformed chunk (no MTrk)");
        const uint32_t track_len = r.be32();
        const size_t track_end = r.pos() + track_len;
        uint64_t tick = 0;
        uint8_t running = 0;
        while (r.pos() < track_end) {
            tick += r.varlen();
            uint8_t status = r.u8();
            if (status < 0x80) {
                if (running == 0) throw std::runtime_error("parse_midi: malformed chunk (running status)");
                r.seek(r.pos() - 1);
                status = running;
            }
            if (status == 0xff) {
                const uint8_t type = r.u8();
                const uint32_t len = r.varlen();
                if (type == 0x51 && len == 3) {
                    uint32_t tempo = 0;
                    for (int i = 0; i < 3; ++i) tempo = tempo << 8 | r.u8();
                    RawEvent e;
                    e.tick = tick;
                    e.track = t;
                    e.index = index++;
                    e.is_tempo = true;
                    e.tempo = tempo;
                    events.push_back(e);
                } else {
                    r.skip(len);
                }
                running = 0;
                continue;
            }
            if (status == 0xf0 || status == 0xf7) {
                r.skip(r.varlen());
                running = 0;
                continue;
            }
            running = status;
            const uint8_t kind = status & 0xf0;
            const int data_bytes = (kind == 0xc0 || kind == 0xd0) ? 1 : 2;
            RawEvent e;
            e.tick = tick;
            e.track = t;
            e.index = index++;
            e.status = status;
            e.d1 = r.u8();
            if (data_bytes == 2) e.d2 = r.u8();
            if (kind == 0x80 || kind == 0x90 || (kind == 0xb0 && e.d1 == 64))
                events.push_back(e);
        }
        r.seek(track_end);
    }

    std::stable_sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.index < b.index;
    });

    // Integrate the tempo map: default 120 BPM until the first change.
    std::vector<double> seconds(events.size());
    {
        double sec = 0.0;
        uint64_t last_tick = 0;
        double us_per_tick = 500000.0 / tpq;
        for (size_t i = 0; i < events.size(); ++i) {
            sec += double(events[i].tick - last_tick) * us_per_tick * 1e-6;
            last_tick = events[i].tick;
            seconds[i] = sec;
            if (events[i].is_tempo) us_per_tick = double(events[i].tempo) / tpq;
        }
    }

    MidiParseResult result;
    struct Open {
        double onset;
        double velocity;
    };
    std::map<std::pair<int, int>, std::vector<Open>> open;  // (channel, pitch)
    std::map<int, bool> pedal_down;                          // per channel
    struct Pending {
        int pitch;
        double onset, velocity;
        int channel;
    };
    std::vector<Pending> held;  // closed under pedal, waiting for release
    double final_time = events.empty() ? 0.0 : seconds.back();

    auto close_note = [&](int channel, int pitch, double onset, double vel, double off_time) {
        if (pedal_down[channel]) {
            held.push_back({pitch, onset, vel, channel});
        } else {
            result.notes.push_back({pitch, onset, off_time - onset, vel});
        }
    };

    for (size_t i = 0; i < events.size(); ++i) {
        const RawEvent& e = events[i];
        if (e.is_tempo) continue;
        const uint8_t kind = e.status & 0xf0;
        const int channel = e.status & 0x0f;
        const double t = seconds[i];
        if (kind == 0xb0 && e.d1 == 64) {
            const bool down = e.d2 >= 64;
            if (!down && pedal_down[channel]) {
                // Pedal release ends every extension pending on this channel.
                auto it = held.begin();
                while (it != held.end()) {
                    if (it->channel == channel) {
                        result.notes.push_back({it->pitch, it->onset, t - it->onset, it->velocity});
                        it = held.erase(it);
                    } else {
                        ++it;
                    }
                }
            }
            pedal_down[channel] = down;
        } else if (kind == 0x90 && e.d2 > 0) {
            open[{channel, e.d1}].push_back({t, double(e.d2)});
        } else if (kind == 0x80 || (kind == 0x90 && e.d2 == 0)) {
            auto& stack = open[{channel, e.d1}];
            if (stack.empty()) continue;  // stray note-off
            const Open note = stack.front();
            stack.erase(stack.begin());
            close_note(channel, e.d1, note.onset, note.velocity, t);
        }
    }

    // Anything still open or pedal-held closes at track end.
    for (auto& [key, stack] : open) {
        for (const Open& note : stack) {
            result.dangling_note_on = true;
            result.notes.push_back({key.second, note.onset, final_time - note.onset, note.velocity});
        }
    }
    for (const auto& h : held)
        result.notes.push_back({h.pitch, h.onset, final_time - h.onset, h.velocity});

    sort_events(result.notes);
    return result;
}

MidiParseResult load_midi(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_midi(bytes);
}

namespace {

bool duration_ok(const NoteEvent& pred, const NoteEvent& gt) {
    return std::abs(pred.duration - gt.duration) <= 0.2 * gt.duration;
}

MatchCounts match_greedy(const std::vector<NoteEvent>& pred,
                         const std::vector<NoteEvent>& gt, double tol, bool with_duration) {
    std::vector<NoteEvent> ps = pred, gs = gt;
    sort_events(ps);
    sort_events(gs);
    std::vector<bool> used(gs.size(), false);
    MatchCounts c;
    for (const NoteEvent& p : ps) {
        int best = -1;
        double best_d = 0.0;
        for (size_t i = 0; i < gs.size(); ++i) {
            if (used[i] || gs[i].pitch != p.pitch) continue;
            const double d = std::abs(gs[i].onset - p.onset);
            if (d > tol) continue;
            if (with_duration && !duration_ok(p, gs[i])) continue;
            if (best < 0 || d < best_d) {  // ties keep the earlier note
                best = int(i);
                best_d = d;
            }
        }
        if (best >= 0) {
            used[size_t(best)] = true;
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    c.fn = int(gs.size()) - c.tp;
    return c;
}

// Kuhn's augmenting paths over the admissibility graph.
MatchCounts match_optimal(const std::vector<NoteEvent>& pred,
                          const std::vector<NoteEvent>& gt, double tol, bool with_duration) {
    std::vector<std::vector<int>> adj(pred.size());
    for (size_t i = 0; i < pred.size(); ++i)
        for (size_t j = 0; j < gt.size(); ++j) {
            if (pred[i].pitch != gt[j].pitch) continue;
            if (std::abs(pred[i].onset - gt[j].onset) > tol) continue;
            if (with_duration && !duration_ok(pred[i], gt[j])) continue;
            adj[i].push_back(int(j));
        }
    std::vector<int> match_gt(gt.size(), -1);
    std::vector<char> visited;
    std::function<bool(int)> try_augment = [&](int i) -> bool {
        for (int j : adj[i]) {
            if (visited[j]) continue;
            visited[j] = 1;
            if (match_gt[j] < 0 || try_augment(match_gt[j])) {
                match_gt[j] = i;
                return true;
            }
        }
        return false;
    };
    MatchCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        visited.assign(gt.size(), 0);
        if (try_augment(int(i))) ++c.tp;
    }
    c.fp = int(pred.size()) - c.tp;
    c.fn = int(gt.size()) - c.tp;
    return c;
}

}  // namespace

MatchCounts match_onsets(const std::vector<NoteEvent>& pred,
                         const std::vector<NoteEvent>& gt, double tolerance_sec,
                         bool optimal) {
    return optimal ? match_optimal(pred, gt, tolerance_sec, false)
                   : match_greedy(pred, gt, tolerance_sec, false);
}

MatchCounts match_with_duration(const std::vector<NoteEvent>& pred,
                                const std::vector<NoteEvent>& gt, double tolerance_sec,
                                bool optimal) {
    return optimal ? match_optimal(pred, gt, tolerance_sec, true)
                   : match_greedy(pred, gt, tolerance_sec, true);
}

EvalReport score(const std::vector<NoteEvent>& pred, const std::vector<NoteEvent>& gt,
                 double tolerance_sec, bool duration_mode, bool optimal) {
    EvalReport r;
    r.tolerance = tolerance_sec;
    r.duration_mode = duration_mode;
    if (pred.empty() && gt.empty()) {
        r.precision = r.recall = r.f_measure = 1.0;
        return r;
    }
    const MatchCounts c = duration_mode ? match_with_duration(pred, gt, tolerance_sec, optimal)
                                        : match_onsets(pred, gt, tolerance_sec, optimal);
    r.tp = c.tp;
    r.fp = c.fp;
    r.fn = c.fn;
    r.precision = c.tp + c.fp > 0 ? double(c.tp) / (c.tp + c.fp) : 0.0;
    r.recall = c.tp + c.fn > 0 ? double(c.tp) / (c.tp + c.fn) : 0.0;
    r.f_measure = r.precision + r.recall > 0.0
                      ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                      : 0.0;
    return r;
}

nlohmann::json EvalReport::to_json() const {
    return {
        {"tp", tp},        {"fp", fp},         {"fn", fn},
        {"precision", precision}, {"recall", recall}, {"f_measure", f_measure},
        {"tolerance_sec", tolerance}, {"duration_mode", duration_mode},
    };
}

std::string EvalReport::to_table() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "TP %-6d FP %-6d FN %-6d\n"
                  "precision %.6f  recall %.6f  f-measure %.6f\n"
                  "tolerance %.0f ms%s\n",
                  tp, fp, fn, precision, recall, f_measure, tolerance * 1000.0,
                  duration_mode ? "  (duration mode, 20% rule)" : "");
    return buf;
}

}  // namespace stpt
