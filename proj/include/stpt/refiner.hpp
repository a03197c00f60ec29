#ifndef STPT_REFINER_HPP_
#define STPT_REFINER_HPP_

#include <array>
#include <vector>

#include "stpt/prox.hpp"
#include "stpt/tensor.hpp"

namespace stpt {

/// B entries in {0,1}, per-key slices encoding valid state sequences.
using BinaryActivity = Tensor3;
/// Diagonals of G(k,:,:) hold one shared value in {0} u [a_m, inf).
using GainTensor = Tensor3;

bool is_binary_markov(const Tensor3& B, const MarkovConfig& mc);
bool is_strict_coupled(const Tensor3& G, double a_m);

/// B = 1{A > a_m}; G[k,l,n] = max over the diagonal of A(k,:,:) through (l,n).
std::pair<BinaryActivity, GainTensor> init_bg(const Tensor3& A, double a_m);

struct RefineOpts {
    int iters = 200;
    double rho = 1.0;
    /// Penalty continuation: rho grows by this factor per iteration over
    /// the second half of the run, freezing the binary flips. 1.0 = off.
    double rho_growth = 1.04;
    double cg_tol = 1e-8;
    int cg_max_iters = 200;
};

struct RefineReport {
    /// Per iteration: ||X1 - P X2||, ||X2 - X3.X4||, ||X3 - X5||, ||X4 - X6||.
    std::vector<std::array<double, 4>> residuals;
    int cg_failures = 0;  // frames where the inner solve hit the cap above tol
};

struct RefineResult {
    BinaryActivity B;
    GainTensor G;
    RefineReport report;
};

/// Direct augmented-Lagrangian minimization of the binary Markov-state
/// and strict-coupling objective, warm-started from (B0, G0).
RefineResult refine(const Mat& V, const PatternDictionary& P, const Tensor3& B0,
                    const Tensor3& G0, double a_m, const MarkovConfig& mc,
                    const RefineOpts& opts);

/// Binary projection onto the Markov set: per frame the active window is
/// kept with entries 1{v > 1/2}, everything else 0; the state sequence
/// minimizes sum outside v^2 + sum inside min(v^2, (v-1)^2).
Tensor3 markov_project_binary(const Tensor3& v, const MarkovConfig& mc,
                              std::vector<std::vector<int>>* sequences = nullptr);

/// Projection onto the strict-coupling set: each diagonal of u(k,:,:)
/// is replaced by its mean passed through the three-case threshold rule.
Tensor3 strict_coupling_project(const Tensor3& u, double a_m);

}  // namespace stpt

#endif  // STPT_REFINER_HPP_
