#ifndef STPT_ADMM_HPP_
#define STPT_ADMM_HPP_

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "stpt/prox.hpp"
#include "stpt/tensor.hpp"

namespace stpt {

enum class Term { kKL, kNonNeg, kL1, kTDV, kMarkov, kThreshold };

/// Which objective to minimize. KL and non-negativity are always on;
/// the progression h_b..h_f of the signal model maps to:
///   h_b: {} , h_c: +L1, h_d: +L1+TDV, h_e: +Markov, h_f: +Markov+Threshold.
struct ObjectiveSpec {
    bool use_l1 = true;
    bool use_tdv = true;
    bool use_markov = false;
    bool use_threshold = false;
    double lambda1 = 0.1;
    double lambda2 = 0.4;
    double a_m = 0.0;      // threshold; must be > 0 when use_threshold
    MarkovConfig mc;       // required when use_markov

    std::vector<Term> active_terms() const;
    ObjectiveSpec convex_restriction() const;
    bool is_convex() const { return !use_markov && !use_threshold; }
    void validate(int L, int N) const;
};

enum class MuMode { kSafe, kRelaxed };

struct SolveOpts {
    int iters = 300;
    double rho0 = 1.0;
    MuMode mu_mode = MuMode::kRelaxed;
    uint64_t seed = 1;
    const Tensor3* warm_start = nullptr;
    bool adapt_rho = true;
    int log_every = 10;            // objective logging stride
    double early_stop_rel = 0.0;   // >0: stop when max residual < rel * ||V||_F
};

struct IterStats {
    double primal = 0.0;
    double dual = 0.0;
    double rho = 0.0;
};

struct TermObjectives {
    double kl = 0.0;
    double l1 = 0.0;             // lambda1 * ||A||_1
    double tdv = 0.0;            // lambda2 * ||Delta_D A||_1
    double nonneg_viol = 0.0;    // ||min(A,0)||_F
    double markov_viol = 0.0;    // ||A - markov_project(A)||_F
    double thresh_viol = 0.0;    // ||A - prox_threshold(A)||_F
    double total() const { return kl + l1 + tdv; }
};

struct SolveReport {
    Tensor3 activity;
    std::vector<IterStats> residuals;       // one entry per iteration run
    std::vector<TermObjectives> objectives; // every log_every iterations + final
    int iterations = 0;
    double final_rho = 0.0;
    bool safe_fallback = false;             // divergence guard tripped
    nlohmann::json to_json() const;
};

/// Everything the per-iteration updates read and write. Public so the
/// collector/dual updates can be exercised directly in tests.
struct AdmmState {
    std::vector<Term> terms;
    std::vector<std::vector<double>> x;     // local variables, flat
    std::vector<std::vector<double>> beta;  // duals, matching x
    Tensor3 A;                              // central collector, K x L x N
    double rho = 1.0;
    double mu = 1.0;
    double mu_factor = 0.2;   // 1.0 in safe mode
    double norm_c2 = 1.0;     // ||C||^2 of the stacked operator
    double rho_lo = 0.0, rho_hi = 0.0;
    int iteration = 0;

    const Mat* V = nullptr;
    const PatternDictionary* P = nullptr;
    ObjectiveSpec spec;

    static AdmmState init(const Mat& V, const PatternDictionary& P,
                          const ObjectiveSpec& spec, const SolveOpts& opts);

    size_t term_dim(int i) const;
    /// out = C_i applied to T (size term_dim(i)).
    void apply_term(int i, const Tensor3& t, double* out) const;
    /// acc += scale * C_i^T y.
    void adjoint_term_acc(int i, const double* y, double scale, Tensor3& acc) const;
};

/// One x-update sweep: each x_i from its prox given the current collector.
void x_update(AdmmState& s);

/// Linearized collector update (inexact Uzawa form):
/// A+ = (1/I) sum_i [A - (rho/mu) C_i^T (C_i A - x_i - beta_i / rho)].
Tensor3 collector_update(const AdmmState& s);

/// beta_i += rho (x_i - C_i A); returns the stacked primal residual norm.
/// Call after the collector has been replaced by A^{k+1}.
double dual_update(AdmmState& s);

/// Residual balancing: rho *= 2 if primal > 10 dual, /= 2 if dual >
/// 10 primal, clamped to [rho0 1e-4, rho0 1e4]; duals rescale by
/// old/new so beta/rho is preserved.
void adapt_rho(AdmmState& s, double primal_norm, double dual_norm);

SolveReport solve(const Mat& V, const PatternDictionary& P,
                  const ObjectiveSpec& spec, const SolveOpts& opts);
SolveReport solve(const Spectrogram& V, const PatternDictionary& P,
                  const ObjectiveSpec& spec, const SolveOpts& opts);

/// Convex stage (restriction of `spec`) then the full spec warm-started
/// from the stage-1 activity. Histories are concatenated.
SolveReport two_stage_solve(const Mat& V, const PatternDictionary& P,
                            const ObjectiveSpec& spec, const SolveOpts& opts);
SolveReport two_stage_solve(const Spectrogram& V, const PatternDictionary& P,
                            const ObjectiveSpec& spec, const SolveOpts& opts);

/// Finite objective terms and constraint-violation distances at max(A,0).
TermObjectives evaluate_objective(const Mat& V, const PatternDictionary& P,
                                  const ObjectiveSpec& spec, const Tensor3& A);

}  // namespace stpt

#endif  // STPT_ADMM_HPP_
