#include "stpt/admm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "stpt/util.hpp"

namespace stpt {

namespace {

constexpr uint64_t kPowerIterSeed = 42;
constexpr int kPowerIters = 50;
constexpr double kRelaxedMuFactor = 0.2;
constexpr int kDivergenceWindow = 20;

Mat as_mat(const std::vector<double>& v, int rows, int cols) {
    Mat m(rows, cols);
    std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
    return m;
}

void store(std::vector<double>& dst, const double* src, size_t n) {
    dst.assign(src, src + n);
}

bool all_finite(const Tensor3& t) {
    for (size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t.data()[i])) return false;
    return true;
}

}  // namespace

std::vector<Term> ObjectiveSpec::active_terms() const {
    std::vector<Term> t{Term::kKL, Term::kNonNeg};
    if (use_l1) t.push_back(Term::kL1);
    if (use_tdv) t.push_back(Term::kTDV);
    if (use_markov) t.push_back(Term::kMarkov);
    if (use_threshold) t.push_back(Term::kThreshold);
    return t;
}

ObjectiveSpec ObjectiveSpec::convex_restriction() const {
    ObjectiveSpec r = *this;
    r.use_markov = false;
    r.use_threshold = false;
    return r;
}

void ObjectiveSpec::validate(int L, int N) const {
    if (use_l1 && lambda1 < 0.0) throw std::invalid_argument("objective: lambda1 < 0");
    if (use_tdv && lambda2 < 0.0) throw std::invalid_argument("objective: lambda2 < 0");
    if (use_tdv && (L < 2 || N < 2))
        throw std::invalid_argument("objective: TDV requires L >= 2 and N >= 2");
    if (use_threshold && a_m <= 0.0)
        throw std::invalid_argument("objective: threshold term requires a_m > 0");
    if (use_markov) {
        if (mc.templates != L)
            throw std::invalid_argument("objective: markov config templates must equal L");
        if (mc.min_note_len < 1 || mc.min_note_len > L)
            throw std::invalid_argument("objective: min note length out of range");
        if (mc.overlap < 0) throw std::invalid_argument("objective: overlap < 0");
    }
}

size_t AdmmState::term_dim(int i) const {
    const int K = A.d0(), L = A.d1(), N = A.d2();
    switch (terms[i]) {
        case Term::kKL: return size_t(V->rows()) * V->cols();
        case Term::kTDV: return size_t(K) * (L - 1) * (N - 1);
        default: return size_t(K) * L * N;
    }
}

void AdmmState::apply_term(int i, const Tensor3& t, double* out) const {
    switch (terms[i]) {
        case Term::kKL: {
            Mat q = synthesize(*P, t);
            std::memcpy(out, q.data(), q.size() * sizeof(double));
            return;
        }
        case Term::kTDV: {
            Tensor3 d = tdv(t);
            std::memcpy(out, d.data(), d.size() * sizeof(double));
            return;
        }
        default:
            std::memcpy(out, t.data(), t.size() * sizeof(double));
            return;
    }
}

void AdmmState::adjoint_term_acc(int i, const double* y, double scale, Tensor3& acc) const {
    const int K = A.d0(), L = A.d1(), N = A.d2();
    switch (terms[i]) {
        case Term::kKL: {
            Mat ym(V->rows(), V->cols());
            std::memcpy(ym.data(), y, ym.size() * sizeof(double));
            Tensor3 back = adjoint_synthesize(*P, ym);
            for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] += scale * back.data()[j];
            return;
        }
        case Term::kTDV: {
            Tensor3 yt(K, L - 1, N - 1);
            std::memcpy(yt.data(), y, yt.size() * sizeof(double));
            Tensor3 back = tdv_adjoint(yt);
            for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] += scale * back.data()[j];
            return;
        }
        default:
            for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] += scale * y[j];
            return;
    }
}

AdmmState AdmmState::init(const Mat& V, const PatternDictionary& P,
                          const ObjectiveSpec& spec, const SolveOpts& opts) {
    const int M = P.data.d0(), L = P.data.d1(), K = P.data.d2();
    const int N = V.cols();
    if (V.rows() != M) throw std::invalid_argument("solve: V rows must equal dictionary bins");
    spec.validate(L, N);

    AdmmState s;
    s.V = &V;
    s.P = &P;
    s.spec = spec;
    s.terms = spec.active_terms();
    s.rho = opts.rho0;
    s.rho_lo = opts.rho0 * 1e-4;
    s.rho_hi = opts.rho0 * 1e4;
    s.mu_factor = opts.mu_mode == MuMode::kSafe ? 1.0 : kRelaxedMuFactor;

    if (opts.warm_start) {
        if (opts.warm_start->d0() != K || opts.warm_start->d1() != L ||
            opts.warm_start->d2() != N)
            throw std::invalid_argument("solve: warm start shape mismatch");
        s.A = *opts.warm_start;
    } else {
        // Scale-matched uniform start: mean(V) / (K L mean(P)).
        double vm = 0.0, pm = 0.0;
        for (size_t i = 0; i < V.size(); ++i) vm += V.data()[i];
        vm /= double(V.size());
        for (size_t i = 0; i < P.data.size(); ++i) pm += P.data.data()[i];
        pm /= double(P.data.size());
        const double scale = pm > 0.0 ? vm / (double(K) * L * pm) : 0.0;
        s.A = Tensor3(K, L, N);
        Rng rng(opts.seed);
        for (size_t i = 0; i < s.A.size(); ++i) s.A.data()[i] = rng.uniform(0.0, scale);
    }

    // ||C||^2 of the stacked operator via power iteration on C^T C.
    const size_t in_dim = s.A.size();
    size_t out_dim = 0;
    for (size_t i = 0; i < s.terms.size(); ++i) out_dim += s.term_dim(int(i));
    LinOp op;
    op.in_dim = in_dim;
    op.out_dim = out_dim;
    op.apply = [&s, K, L, N](const double* xin, double* yout) {
        Tensor3 t(K, L, N);
        std::memcpy(t.data(), xin, t.size() * sizeof(double));
        size_t off = 0;
        for (size_t i = 0; i < s.terms.size(); ++i) {
            s.apply_term(int(i), t, yout + off);
            off += s.term_dim(int(i));
        }
    };
    op.adjoint = [&s, K, L, N](const double* yin, double* xout) {
        Tensor3 acc(K, L, N, 0.0);
        size_t off = 0;
        for (size_t i = 0; i < s.terms.size(); ++i) {
            s.adjoint_term_acc(int(i), yin + off, 1.0, acc);
            off += s.term_dim(int(i));
        }
        std::memcpy(xout, acc.data(), acc.size() * sizeof(double));
    };
    const double sigma = spectral_norm_estimate(op, kPowerIters, kPowerIterSeed);
    s.norm_c2 = std::max(sigma * sigma, 1.0);  // identity blocks floor the norm at 1
    s.mu = s.mu_factor * s.rho * s.norm_c2;

    // Algorithm start: x_i = C_i A, beta_i = 0.
    s.x.resize(s.terms.size());
    s.beta.resize(s.terms.size());
    for (size_t i = 0; i < s.terms.size(); ++i) {
        s.x[i].resize(s.term_dim(int(i)));
        s.apply_term(int(i), s.A, s.x[i].data());
        s.beta[i].assign(s.term_dim(int(i)), 0.0);
    }
    return s;
}

void x_update(AdmmState& s) {
    const int K = s.A.d0(), L = s.A.d1(), N = s.A.d2();
    std::vector<double> ca;
    for (size_t i = 0; i < s.terms.size(); ++i) {
        ca.resize(s.term_dim(int(i)));
        s.apply_term(int(i), s.A, ca.data());
        switch (s.terms[i]) {
            case Term::kKL: {
                Mat q = as_mat(ca, s.V->rows(), s.V->cols());
                Mat b = as_mat(s.beta[i], s.V->rows(), s.V->cols());
                Mat xk = prox_kl(*s.V, q, b, s.rho);
                store(s.x[i], xk.data(), xk.size());
                break;
            }
            case Term::kNonNeg: {
                for (size_t j = 0; j < ca.size(); ++j)
                    s.x[i][j] = std::max(ca[j] - s.beta[i][j] / s.rho, 0.0);
                break;
            }
            case Term::kL1:
            case Term::kTDV: {
                const double t = (s.terms[i] == Term::kL1 ? s.spec.lambda1
                                                          : s.spec.lambda2) / s.rho;
                for (size_t j = 0; j < ca.size(); ++j) {
                    const double v = ca[j] - s.beta[i][j] / s.rho;
                    const double mag = std::abs(v) - t;
                    s.x[i][j] = mag > 0.0 ? (v < 0.0 ? -mag : mag) : 0.0;
                }
                break;
            }
            case Term::kMarkov: {
                Tensor3 v(K, L, N);
                for (size_t j = 0; j < v.size(); ++j) v.data()[j] = ca[j] - s.beta[i][j] / s.rho;
                MarkovProjection proj = markov_project(v, s.spec.mc);
                store(s.x[i], proj.x.data(), proj.x.size());
                break;
            }
            case Term::kThreshold: {
                const double am = s.spec.a_m, half = am / 2.0;
                for (size_t j = 0; j < ca.size(); ++j) {
                    const double v = ca[j] - s.beta[i][j] / s.rho;
                    s.x[i][j] = v > am ? v : (v >= half ? am : 0.0);
                }
                break;
            }
        }
    }
}

Tensor3 collector_update(const AdmmState& s) {
    if (s.mu <= 0.0) throw std::invalid_argument("collector_update: mu must be positive");
    const double step = s.rho / s.mu;
    Tensor3 acc = s.A;
    for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] *= double(s.terms.size());

    std::vector<double> resid;
    for (size_t i = 0; i < s.terms.size(); ++i) {
        resid.resize(s.term_dim(int(i)));
        s.apply_term(int(i), s.A, resid.data());
        for (size_t j = 0; j < resid.size(); ++j)
            resid[j] -= s.x[i][j] + s.beta[i][j] / s.rho;
        s.adjoint_term_acc(int(i), resid.data(), -step, acc);
    }
    const double inv = 1.0 / double(s.terms.size());
    for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] *= inv;
    return acc;
}

double dual_update(AdmmState& s) {
    double primal2 = 0.0;
    std::vector<double> ca;
    for (size_t i = 0; i < s.terms.size(); ++i) {
        ca.resize(s.term_dim(int(i)));
        s.apply_term(int(i), s.A, ca.data());
        for (size_t j = 0; j < ca.size(); ++j) {
            const double r = s.x[i][j] - ca[j];
            s.beta[i][j] += s.rho * r;
            primal2 += r * r;
        }
    }
    return std::sqrt(primal2);
}

void adapt_rho(AdmmState& s, double primal_norm, double dual_norm) {
    double next = s.rho;
    if (primal_norm > 10.0 * dual_norm)
        next = std::min(s.rho * 2.0, s.rho_hi);
    else if (dual_norm > 10.0 * primal_norm)
        next = std::max(s.rho / 2.0, s.rho_lo);
    if (next == s.rho) return;
    const double rescale = s.rho / next;
    for (auto& b : s.beta)
        for (double& x : b) x *= rescale;
    s.rho = next;
    s.mu = s.mu_factor * s.rho * s.norm_c2;
}

TermObjectives evaluate_objective(const Mat& V, const PatternDictionary& P,
                                  const ObjectiveSpec& spec, const Tensor3& A) {
    TermObjectives o;
    Tensor3 pos = prox_nonneg(A);
    o.kl = kl_divergence(V, synthesize(P, pos));
    if (spec.use_l1) {
        double s = 0.0;
        for (size_t i = 0; i < pos.size(); ++i) s += std::abs(pos.data()[i]);
        o.l1 = spec.lambda1 * s;
    }
    if (spec.use_tdv) {
        Tensor3 d = tdv(pos);
        double s = 0.0;
        for (size_t i = 0; i < d.size(); ++i) s += std::abs(d.data()[i]);
        o.tdv = spec.lambda2 * s;
    }
    double nn = 0.0;
    for (size_t i = 0; i < A.size(); ++i) {
        const double v = std::min(A.data()[i], 0.0);
        nn += v * v;
    }
    o.nonneg_viol = std::sqrt(nn);
    if (spec.use_markov) {
        MarkovProjection proj = markov_project(pos, spec.mc);
        double s = 0.0;
        for (size_t i = 0; i < pos.size(); ++i) {
            const double d = pos.data()[i] - proj.x.data()[i];
            s += d * d;
        }
        o.markov_viol = std::sqrt(s);
    }
    if (spec.use_threshold) {
        Tensor3 th = prox_threshold(pos, spec.a_m);
        double s = 0.0;
        for (size_t i = 0; i < pos.size(); ++i) {
            const double d = pos.data()[i] - th.data()[i];
            s += d * d;
        }
        o.thresh_viol = std::sqrt(s);
    }
    return o;
}

SolveReport solve(const Mat& V, const PatternDictionary& P,
                  const ObjectiveSpec& spec, const SolveOpts& opts) {
    AdmmState s = AdmmState::init(V, P, spec, opts);
    const double v_norm = frobenius_norm(V);

    SolveReport report;
    report.residuals.reserve(opts.iters);

    std::vector<std::vector<double>> ca_old(s.terms.size());
    std::vector<double> ca_new, diff;
    double prev_max_residual = std::numeric_limits<double>::infinity();
    int growth_streak = 0;

    for (int it = 0; it < opts.iters; ++it) {
        s.iteration = it + 1;
        x_update(s);

        for (size_t i = 0; i < s.terms.size(); ++i) {
            ca_old[i].resize(s.term_dim(int(i)));
            s.apply_term(int(i), s.A, ca_old[i].data());
        }
        Tensor3 a_new = collector_update(s);
        if (!all_finite(a_new))
            throw NumericError("solve: non-finite collector iterate at iteration " +
                               std::to_string(it + 1));

        // Duals and residuals against the fresh collector.
        double primal2 = 0.0, dual2 = 0.0;
        s.A = std::move(a_new);
        for (size_t i = 0; i < s.terms.size(); ++i) {
            ca_new.resize(s.term_dim(int(i)));
            s.apply_term(int(i), s.A, ca_new.data());
            diff.resize(ca_new.size());
            for (size_t j = 0; j < ca_new.size(); ++j) {
                const double r = s.x[i][j] - ca_new[j];
                s.beta[i][j] += s.rho * r;
                primal2 += r * r;
                diff[j] = ca_new[j] - ca_old[i][j];
            }
            Tensor3 sacc(s.A.d0(), s.A.d1(), s.A.d2(), 0.0);
            s.adjoint_term_acc(int(i), diff.data(), s.rho, sacc);
            for (size_t j = 0; j < sacc.size(); ++j) dual2 += sacc.data()[j] * sacc.data()[j];
        }
        const double primal = std::sqrt(primal2);
        const double dual = std::sqrt(dual2);
        report.residuals.push_back({primal, dual, s.rho});

        if ((it + 1) % std::max(opts.log_every, 1) == 0 || it + 1 == opts.iters)
            report.objectives.push_back(evaluate_objective(V, P, spec, s.A));

        const double max_res = std::max(primal, dual);
        if (s.mu_factor < 1.0) {
            growth_streak = max_res > prev_max_residual ? growth_streak + 1 : 0;
            if (growth_streak >= kDivergenceWindow) {
                s.mu_factor = 1.0;  // fall back to the provable bound
                s.mu = s.rho * s.norm_c2;
                report.safe_fallback = true;
                growth_streak = 0;
            }
        }
        prev_max_residual = max_res;

        if (opts.adapt_rho) adapt_rho(s, primal, dual);

        report.iterations = it + 1;
        if (opts.early_stop_rel > 0.0 && max_res < opts.early_stop_rel * v_norm) break;
    }

    report.activity = s.A;
    report.final_rho = s.rho;
    return report;
}

SolveReport solve(const Spectrogram& V, const PatternDictionary& P,
                  const ObjectiveSpec& spec, const SolveOpts& opts) {
    return solve(V.data, P, spec, opts);
}

SolveReport two_stage_solve(const Mat& V, const PatternDictionary& P,
                            const ObjectiveSpec& spec, const SolveOpts& opts) {
    if (spec.is_convex()) return solve(V, P, spec, opts);

    SolveReport stage1 = solve(V, P, spec.convex_restriction(), opts);
    SolveOpts stage2_opts = opts;
    stage2_opts.warm_start = &stage1.activity;
    SolveReport stage2 = solve(V, P, spec, stage2_opts);

    SolveReport combined = stage2;
    combined.residuals.insert(combined.residuals.begin(), stage1.residuals.begin(),
                              stage1.residuals.end());
    combined.objectives.insert(combined.objectives.begin(), stage1.objectives.begin(),
                               stage1.objectives.end());
    combined.iterations = stage1.iterations + stage2.iterations;
    combined.safe_fallback = stage1.safe_fallback || stage2.safe_fallback;
    return combined;
}

SolveReport two_stage_solve(const Spectrogram& V, const PatternDictionary& P,
                            const ObjectiveSpec& spec, const SolveOpts& opts) {
    return two_stage_solve(V.data, P, spec, opts);
}

nlohmann::json SolveReport::to_json() const {
    nlohmann::json j;
    j["iterations"] = iterations;
    j["final_rho"] = final_rho;
    j["safe_fallback"] = safe_fallback;
    auto& res = j["residuals"] = nlohmann::json::array();
    for (const auto& r : residuals)
        res.push_back({{"primal", r.primal}, {"dual", r.dual}, {"rho", r.rho}});
    auto& obj = j["objectives"] = nlohmann::json::array();
    for (const auto& o : objectives)
        obj.push_back({{"kl", o.kl},
                       {"l1", o.l1},
                       {"tdv", o.tdv},
                       {"nonneg_violation", o.nonneg_viol},
                       {"markov_violation", o.markov_viol},
                       {"threshold_violation", o.thresh_viol}});
    return j;
}

}  // namespace stpt
