// stpt - spectro-temporal pattern transcription toolchain.
//
// Subcommands: dict-build, calibrate, transcribe, eval, synth.
// Exit codes: 0 success, 1 I/O failure, 2 validation/calibration failure,
// 3 numerical divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "stpt/admm.hpp"
#include "stpt/audio.hpp"
#include "stpt/container.hpp"
#include "stpt/dictionary.hpp"
#include "stpt/eval.hpp"
#include "stpt/refiner.hpp"
#include "stpt/synth.hpp"
#include "stpt/transcribe.hpp"
#include "stpt/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    int threads = 1;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    return json::parse(in);
}

// Config-file values apply only where the flag was not given.
template <typename T>
void fill_from_config(const json& cfg, const char* key, T& var, const CLI::Option* opt) {
    if (opt != nullptr && opt->count() > 0) return;
    if (cfg.contains(key)) var = cfg[key].get<T>();
}

void add_frontend_flags(CLI::App* cmd, stpt::FrontendConfig& fc,
                        std::map<std::string, CLI::Option*>& opts) {
    opts["sample_rate"] = cmd->add_option("--sample-rate", fc.sample_rate, "Expected sample rate (Hz)");
    opts["window"] = cmd->add_option("--window", fc.window, "Analysis window (samples)");
    opts["hop"] = cmd->add_option("--hop", fc.hop, "Frame step (samples)");
    opts["bins_per_octave"] = cmd->add_option("--bins-per-octave", fc.bins_per_octave, "Log-frequency resolution");
    opts["f_min"] = cmd->add_option("--fmin", fc.f_min, "Lowest filter center (Hz)");
    opts["f_max"] = cmd->add_option("--fmax", fc.f_max, "Highest filter center (Hz)");
}

void apply_frontend_config(const json& cfg, stpt::FrontendConfig& fc,
                           std::map<std::string, CLI::Option*>& opts) {
    fill_from_config(cfg, "sample_rate", fc.sample_rate, opts["sample_rate"]);
    fill_from_config(cfg, "window", fc.window, opts["window"]);
    fill_from_config(cfg, "hop", fc.hop, opts["hop"]);
    fill_from_config(cfg, "bins_per_octave", fc.bins_per_octave, opts["bins_per_octave"]);
    fill_from_config(cfg, "f_min", fc.f_min, opts["f_min"]);
    fill_from_config(cfg, "f_max", fc.f_max, opts["f_max"]);
}

json frontend_json(const stpt::FrontendConfig& fc) {
    return {{"sample_rate", fc.sample_rate}, {"window", fc.window},
            {"hop", fc.hop},                 {"bins_per_octave", fc.bins_per_octave},
            {"f_min", fc.f_min},             {"f_max", fc.f_max}};
}

// Transcribe input: WAV audio or a spectrogram tensor container.
stpt::Spectrogram load_input_spectrogram(const std::string& path,
                                         const stpt::FrontendConfig& fc) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open: " + path);
    char magic[4] = {0};
    probe.read(magic, 4);
    if (std::string(magic, 4) == "RIFF") {
        stpt::AudioClip clip = stpt::load_wav(path);
        return stpt::logfreq_spectrogram(clip, fc);
    }
    return stpt::load_spectrogram(path);
}

std::vector<stpt::SynthEvent> read_events_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open events file: " + path);
    std::vector<stpt::SynthEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.find("key") == 0) continue;  // header
        stpt::SynthEvent e;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &e.key, &e.onset_frame,
                        &e.length_frames, &e.gain) != 4)
            throw std::invalid_argument("events file: bad line: " + line);
        events.push_back(e);
    }
    return events;
}

int run_dict_build(const std::string& notes_dir, const std::string& out_path,
                   int pattern_frames, const std::vector<int>& pitches,
                   const stpt::FrontendConfig& fc) {
    std::vector<std::pair<int, stpt::AudioClip>> clips;
    if (!pitches.empty()) {
        for (int pitch : pitches) {
            char name[16];
            std::snprintf(name, sizeof name, "%03d.wav", pitch);
            const fs::path p = fs::path(notes_dir) / name;
            if (!fs::exists(p))
                throw std::invalid_argument("missing note recording for pitch " +
                                            std::to_string(pitch) + ": " + p.string());
            clips.emplace_back(pitch, stpt::load_wav(p.string()));
        }
    } else {
        for (const auto& entry : fs::directory_iterator(notes_dir)) {
            if (entry.path().extension() != ".wav") continue;
            const std::string stem = entry.path().stem().string();
            try {
                clips.emplace_back(std::stoi(stem), stpt::load_wav(entry.path().string()));
            } catch (const std::invalid_argument&) {
                continue;  // not a pitch-named file
            }
        }
        if (clips.empty())
            throw std::invalid_argument("no pitch-named wav files in " + notes_dir);
    }
    stpt::PatternDictionary P = stpt::build_dictionary(clips, fc, pattern_frames);
    stpt::save_dictionary(out_path, P, {{"config", frontend_json(fc)}});
    std::cout << "dictionary: " << P.num_keys() << " keys, " << P.num_templates()
              << " templates, " << P.num_bins() << " bins -> " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectro-temporal pattern transcription"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "JSON config file (flags take precedence)");
    app.add_option("--threads", common.threads, "Worker thread cap");

    // dict-build
    auto* dict_cmd = app.add_subcommand("dict-build", "Build a pattern dictionary from single-note WAVs");
    std::string notes_dir, dict_out;
    int pattern_frames = 258;
    std::vector<int> pitches;
    stpt::FrontendConfig dict_fc;
    std::map<std::string, CLI::Option*> dict_fc_opts;
    dict_cmd->add_option("--notes-dir", notes_dir, "Directory of <pitch>.wav files")->required();
    dict_cmd->add_option("--out", dict_out, "Output container path")->required();
    auto* pf_opt = dict_cmd->add_option("--pattern-frames", pattern_frames, "Templates per key (L)");
    dict_cmd->add_option("--pitches", pitches, "Required MIDI pitches (default: scan directory)");
    add_frontend_flags(dict_cmd, dict_fc, dict_fc_opts);

    // calibrate
    auto* cal_cmd = app.add_subcommand("calibrate", "Derive the activity threshold from a soft note");
    std::string cal_dict, cal_note, cal_out;
    double cal_margin = 0.10;
    double cal_lambda1 = 0.1, cal_lambda2 = 0.4;
    int cal_iters = 300;
    cal_cmd->add_option("--dict", cal_dict, "Dictionary container")->required();
    cal_cmd->add_option("--soft-note", cal_note, "Soft note WAV (or V container)")->required();
    auto* margin_opt = cal_cmd->add_option("--margin", cal_margin, "Fraction below max activation");
    cal_cmd->add_option("--out", cal_out, "Output JSON path");
    auto* cal_l1 = cal_cmd->add_option("--lambda1", cal_lambda1, "Sparsity weight");
    auto* cal_l2 = cal_cmd->add_option("--lambda2", cal_lambda2, "TDV weight");
    auto* cal_it = cal_cmd->add_option("--iters", cal_iters, "Iterations per stage");

    // transcribe
    auto* tr_cmd = app.add_subcommand("transcribe", "Transcribe a recording to a note list");
    std::string tr_dict, tr_in, tr_out, tr_midi, tr_dump_act, tr_dump_res;
    double tr_am = 0.0, tr_lambda1 = 0.1, tr_lambda2 = 0.4;
    int tr_iters = 300, tr_min_note = -1;
    std::string tr_decode = "direct";
    bool tr_refine = false;
    stpt::FrontendConfig tr_fc;
    std::map<std::string, CLI::Option*> tr_fc_opts;
    tr_cmd->add_option("--dict", tr_dict, "Dictionary container")->required();
    tr_cmd->add_option("--a-m", tr_am, "Activity threshold from calibrate")->required();
    tr_cmd->add_option("--in", tr_in, "Input WAV (or V container)")->required();
    tr_cmd->add_option("--out", tr_out, "Output note CSV")->required();
    tr_cmd->add_option("--midi-out", tr_midi, "Optional SMF output");
    auto* tr_l1 = tr_cmd->add_option("--lambda1", tr_lambda1, "Sparsity weight");
    auto* tr_l2 = tr_cmd->add_option("--lambda2", tr_lambda2, "TDV weight");
    auto* tr_it = tr_cmd->add_option("--iters", tr_iters, "Iterations per stage");
    tr_cmd->add_option("--decode", tr_decode, "direct|hmm")
        ->check(CLI::IsMember({"direct", "hmm"}));
    tr_cmd->add_flag("--refine-durations", tr_refine, "Run the binary Markov/strict-coupling refiner");
    tr_cmd->add_option("--min-note-frames", tr_min_note, "Minimum note length L_M (frames)");
    tr_cmd->add_option("--dump-activity", tr_dump_act, "Write flattened KLxN activity CSV");
    tr_cmd->add_option("--dump-residuals", tr_dump_res, "Write solver residual/objective JSON");
    add_frontend_flags(tr_cmd, tr_fc, tr_fc_opts);

    // eval
    auto* ev_cmd = app.add_subcommand("eval", "Score a prediction against ground truth");
    std::string ev_pred, ev_gt, ev_out;
    double ev_tol_ms = 50.0;
    bool ev_duration = false, ev_optimal = false;
    ev_cmd->add_option("--pred", ev_pred, "Predicted note CSV")->required();
    ev_cmd->add_option("--gt", ev_gt, "Ground truth (.mid or .csv)")->required();
    ev_cmd->add_option("--tolerance-ms", ev_tol_ms, "Onset tolerance (ms)");
    ev_cmd->add_flag("--duration", ev_duration, "Require duration within 20% of ground truth");
    ev_cmd->add_flag("--optimal", ev_optimal, "Optimal bipartite matching instead of greedy");
    ev_cmd->add_option("--out", ev_out, "Optional JSON report path");

    // synth
    auto* sy_cmd = app.add_subcommand("synth", "Render a synthetic oracle piece (no audio)");
    int sy_keys = 5, sy_L = 16, sy_M = 64, sy_N = 200, sy_minlen = 3;
    double sy_noise = 0.0;
    uint64_t sy_seed = 1;
    std::string sy_events, sy_out;
    sy_cmd->add_option("--keys", sy_keys, "Number of keys K");
    sy_cmd->add_option("--pattern-frames", sy_L, "Templates per key L");
    sy_cmd->add_option("--bins", sy_M, "Frequency bins M");
    sy_cmd->add_option("--frames", sy_N, "Frames N");
    sy_cmd->add_option("--min-note-frames", sy_minlen, "Minimum note length");
    sy_cmd->add_option("--events", sy_events, "CSV: key,onset_frame,length_frames,gain")->required();
    sy_cmd->add_option("--noise", sy_noise, "Additive |gaussian| noise level");
    sy_cmd->add_option("--seed", sy_seed, "RNG seed");
    sy_cmd->add_option("--out", sy_out, "Output prefix (writes .v, .p, .gt.csv)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;  // usage/validation error
    }

    try {
        stpt::set_max_threads(common.threads);
        const json cfg = load_config(common.config_path);

        if (dict_cmd->parsed()) {
            apply_frontend_config(cfg, dict_fc, dict_fc_opts);
            fill_from_config(cfg, "pattern_frames", pattern_frames, pf_opt);
            if (pattern_frames < 1) throw std::invalid_argument("pattern-frames must be >= 1");
            return run_dict_build(notes_dir, dict_out, pattern_frames, pitches, dict_fc);
        }

        if (cal_cmd->parsed()) {
            fill_from_config(cfg, "margin", cal_margin, margin_opt);
            fill_from_config(cfg, "lambda1", cal_lambda1, cal_l1);
            fill_from_config(cfg, "lambda2", cal_lambda2, cal_l2);
            fill_from_config(cfg, "iters", cal_iters, cal_it);
            if (cal_lambda1 < 0 || cal_lambda2 < 0)
                throw std::invalid_argument("lambda weights must be non-negative");
            stpt::PatternDictionary P = stpt::load_dictionary(cal_dict);
            stpt::PipelineConfig pc;
            pc.objective.lambda1 = cal_lambda1;
            pc.objective.lambda2 = cal_lambda2;
            pc.calibration_margin = cal_margin;
            pc.solve.iters = cal_iters;
            pc.frontend.sample_rate = P.sample_rate;
            pc.frontend.window = P.window;
            pc.frontend.hop = P.hop;
            stpt::Spectrogram V = load_input_spectrogram(cal_note, pc.frontend);
            const double a_m = stpt::calibrate(V, P, pc);
            json out = {{"a_m", a_m},
                        {"config", {{"margin", cal_margin},
                                    {"lambda1", cal_lambda1},
                                    {"lambda2", cal_lambda2},
                                    {"iters", cal_iters},
                                    {"frontend", frontend_json(pc.frontend)}}}};
            if (!cal_out.empty()) {
                std::ofstream f(cal_out);
                if (!f) throw std::runtime_error("cannot open for writing: " + cal_out);
                f << out.dump(2) << "\n";
            }
            std::cout << out.dump(2) << "\n";
            return 0;
        }

        if (tr_cmd->parsed()) {
            apply_frontend_config(cfg, tr_fc, tr_fc_opts);
            fill_from_config(cfg, "lambda1", tr_lambda1, tr_l1);
            fill_from_config(cfg, "lambda2", tr_lambda2, tr_l2);
            fill_from_config(cfg, "iters", tr_iters, tr_it);
            if (tr_lambda1 < 0 || tr_lambda2 < 0)
                throw std::invalid_argument("lambda weights must be non-negative");
            if (tr_am <= 0) throw std::invalid_argument("a-m must be positive");

            stpt::PatternDictionary P = stpt::load_dictionary(tr_dict);
            stpt::PipelineConfig pc;
            pc.objective.lambda1 = tr_lambda1;
            pc.objective.lambda2 = tr_lambda2;
            pc.solve.iters = tr_iters;
            pc.frontend.sample_rate = P.sample_rate;
            pc.frontend.window = P.window;
            pc.frontend.hop = P.hop;
            pc.use_refiner = tr_refine;
            pc.decode_mode = tr_decode == "hmm" ? stpt::DecodeMode::kHmm
                                                : stpt::DecodeMode::kDirect;
            if (tr_min_note > 0) pc.min_note_frames = tr_min_note;
            else pc.min_note_frames = std::max(1, int(std::ceil(0.1 * P.sample_rate / P.hop)));

            stpt::Spectrogram V = load_input_spectrogram(tr_in, pc.frontend);
            stpt::SolveReport report;
            std::vector<stpt::NoteEvent> events = stpt::transcribe(V, P, tr_am, pc, &report);
            stpt::write_notes_csv(tr_out, events);

            json sidecar = {{"a_m", tr_am},
                            {"lambda1", tr_lambda1},
                            {"lambda2", tr_lambda2},
                            {"iters", tr_iters},
                            {"decode", tr_decode},
                            {"refine_durations", tr_refine},
                            {"min_note_frames", pc.min_note_frames},
                            {"frontend", frontend_json(pc.frontend)},
                            {"events", events.size()}};
            std::ofstream side(tr_out + ".json");
            if (side) side << sidecar.dump(2) << "\n";

            if (!tr_midi.empty()) stpt::write_notes_midi(tr_midi, events);
            if (!tr_dump_act.empty()) {
                const stpt::Mat flat = stpt::flatten(report.activity);
                std::ofstream f(tr_dump_act);
                if (!f) throw std::runtime_error("cannot open for writing: " + tr_dump_act);
                for (int r = 0; r < flat.rows(); ++r) {
                    for (int c = 0; c < flat.cols(); ++c)
                        f << (c ? "," : "") << flat(r, c);
                    f << "\n";
                }
            }
            if (!tr_dump_res.empty()) {
                std::ofstream f(tr_dump_res);
                if (!f) throw std::runtime_error("cannot open for writing: " + tr_dump_res);
                f << report.to_json().dump(2) << "\n";
            }
            std::cout << events.size() << " events -> " << tr_out << "\n";
            return 0;
        }

        if (ev_cmd->parsed()) {
            std::vector<stpt::NoteEvent> pred = stpt::read_notes_csv(ev_pred);
            std::vector<stpt::NoteEvent> gt;
            if (fs::path(ev_gt).extension() == ".mid" || fs::path(ev_gt).extension() == ".midi")
                gt = stpt::load_midi(ev_gt).notes;
            else
                gt = stpt::read_notes_csv(ev_gt);
            const stpt::EvalReport rep =
                stpt::score(pred, gt, ev_tol_ms / 1000.0, ev_duration, ev_optimal);
            std::cout << rep.to_table();
            if (!ev_out.empty()) {
                std::ofstream f(ev_out);
                if (!f) throw std::runtime_error("cannot open for writing: " + ev_out);
                f << rep.to_json().dump(2) << "\n";
            }
            return 0;
        }

        if (sy_cmd->parsed()) {
            const std::vector<stpt::SynthEvent> events = read_events_file(sy_events);
            stpt::MarkovConfig mc;
            mc.templates = sy_L;
            mc.min_note_len = sy_minlen;
            stpt::PatternDictionary P = stpt::gen_dictionary(sy_keys, sy_L, sy_M, sy_seed);
            stpt::Tensor3 A = stpt::gen_activity(sy_keys, sy_L, sy_N, events, mc);
            stpt::Spectrogram V = stpt::gen_spectrogram(P, A, sy_noise, sy_seed + 1);

            stpt::save_spectrogram(sy_out + ".v", V);
            stpt::save_dictionary(sy_out + ".p", P,
                                  {{"config", {{"keys", sy_keys}, {"pattern_frames", sy_L},
                                               {"bins", sy_M}, {"frames", sy_N},
                                               {"noise", sy_noise}, {"seed", sy_seed}}}});
            std::vector<stpt::NoteEvent> gt;
            const double hop_sec = P.hop_seconds();
            for (const auto& e : events)
                gt.push_back({P.pitch_map[e.key], e.onset_frame * hop_sec,
                              e.length_frames * hop_sec, e.gain});
            stpt::write_notes_csv(sy_out + ".gt.csv", gt);
            std::cout << "synth: " << events.size() << " events -> " << sy_out
                      << ".{v,p,gt.csv}\n";
            return 0;
        }
    } catch (const stpt::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
