#ifndef STPT_PROX_HPP_
#define STPT_PROX_HPP_

#include <vector>

#include "stpt/tensor.hpp"

namespace stpt {

/// Markov-state model parameters. States are 0-based in code: state s
/// corresponds to template s+1. A sequence is valid when every step is
/// s -> s+1, or s -> 0 with s in S = {0} u {min_note_len-1, ..., L-1}.
struct MarkovConfig {
    int min_note_len = 1;   // L_M, in frames (1-based template count)
    int overlap = 0;        // c = ceil(window/hop); active window {s, ..., s+c}
    int templates = 1;      // L

    bool allows_return(int state0) const {
        return state0 == 0 || state0 >= min_note_len - 1;
    }
};

bool valid_state_sequence(const std::vector<int>& seq, const MarkovConfig& mc);

/// Closed-form KL x1 update: (rho q - beta - 1 + sqrt((.)^2 + 4 rho V)) / (2 rho).
/// q is the current model synthesize(P, A).
Mat prox_kl(const Mat& V, const Mat& q, const Mat& beta, double rho);

/// Half-wave rectifier max(v, 0).
Tensor3 prox_nonneg(const Tensor3& v);

/// Soft thresholding sign(v) max(|v| - t, 0).
Tensor3 prox_l1(const Tensor3& v, double t);

/// Same formula as prox_l1; operates on the TDV-transformed variable.
Tensor3 prox_tdv(const Tensor3& v, double t);

/// Per-entry projection onto {0} u [a_m, inf):
/// v if v > a_m; a_m if a_m/2 <= v <= a_m; else 0.
Tensor3 prox_threshold(const Tensor3& v, double a_m);

/// C[l,n] = sum over rows outside the active window {l..l+c} of v[.,n]^2.
/// O(LN) via one squared column total minus a windowed prefix sum.
Mat markov_cost_matrix(const Mat& v_slice, const MarkovConfig& mc);

/// DP over the cost matrix: smallest-index tie rule both in the min over
/// S and in the final-frame argmin. Returns the 0-based state sequence.
std::vector<int> markov_decode(const Mat& cost, const MarkovConfig& mc,
                               double* min_cost = nullptr);

struct MarkovProjection {
    Tensor3 x;                                // v kept on active windows, 0 elsewhere
    std::vector<std::vector<int>> sequences;  // per key, 0-based states
};

/// Projection onto the Markov-state set: per key, decode the best state
/// sequence and keep v on the active window of each frame.
MarkovProjection markov_project(const Tensor3& v, const MarkovConfig& mc);

}  // namespace stpt

#endif  // STPT_PROX_HPP_
