#include "stpt/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stpt/util.hpp"

namespace stpt {

bool valid_state_sequence(const std::vector<int>& seq, const MarkovConfig& mc) {
    const int L = mc.templates;
    for (int s : seq)
        if (s < 0 || s >= L) return false;
    for (size_t n = 0; n + 1 < seq.size(); ++n) {
        const int a = seq[n], b = seq[n + 1];
        if (b == a + 1) continue;
        if (b == 0 && mc.allows_return(a)) continue;
        return false;
    }
    return true;
}

Mat prox_kl(const Mat& V, const Mat& q, const Mat& beta, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("prox_kl: rho must be positive");
    if (!V.same_shape(q) || !V.same_shape(beta))
        throw std::invalid_argument("prox_kl: shape mismatch");
    Mat out(V.rows(), V.cols());
    for (size_t i = 0; i < V.size(); ++i) {
        const double v = V.data()[i];
        if (v < 0.0) throw std::invalid_argument("prox_kl: negative V entry");
        const double t = rho * q.data()[i] - beta.data()[i] - 1.0;
        out.data()[i] = (t + std::sqrt(t * t + 4.0 * rho * v)) / (2.0 * rho);
    }
    return out;
}

Tensor3 prox_nonneg(const Tensor3& v) {
    Tensor3 out = v;
    for (size_t i = 0; i < out.size(); ++i)
        if (out.data()[i] < 0.0) out.data()[i] = 0.0;
    return out;
}

Tensor3 prox_l1(const Tensor3& v, double t) {
    if (t < 0.0) throw std::invalid_argument("prox_l1: threshold must be non-negative");
    Tensor3 out(v.d0(), v.d1(), v.d2());
    for (size_t i = 0; i < v.size(); ++i) {
        const double x = v.data()[i];
        const double mag = std::abs(x) - t;
        out.data()[i] = mag > 0.0 ? (x < 0.0 ? -mag : mag) : 0.0;
    }
    return out;
}

Tensor3 prox_tdv(const Tensor3& v, double t) { return prox_l1(v, t); }

Tensor3 prox_threshold(const Tensor3& v, double a_m) {
    if (a_m <= 0.0) throw std::invalid_argument("prox_threshold: a_m must be positive");
    Tensor3 out(v.d0(), v.d1(), v.d2());
    const double half = a_m / 2.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const double x = v.data()[i];
        out.data()[i] = x > a_m ? x : (x >= half ? a_m : 0.0);
    }
    return out;
}

Mat markov_cost_matrix(const Mat& v_slice, const MarkovConfig& mc) {
    const int L = v_slice.rows(), N = v_slice.cols();
    const int c = mc.overlap;
    Mat cost(L, N);
    std::vector<double> prefix(L + 1);  // per column: prefix sums of v^2 over rows
    for (int n = 0; n < N; ++n) {
        prefix[0] = 0.0;
        for (int l = 0; l < L; ++l) {
            const double x = v_slice(l, n);
            prefix[l + 1] = prefix[l] + x * x;
        }
        const double total = prefix[L];
        for (int l = 0; l < L; ++l) {
            const int hi = std::min(L, l + c + 1);
            cost(l, n) = total - (prefix[hi] - prefix[l]);
        }
    }
    return cost;
}

std::vector<int> markov_decode(const Mat& cost, const MarkovConfig& mc, double* min_cost) {
    const int L = cost.rows(), N = cost.cols();
    if (N < 1) throw std::invalid_argument("markov_decode: empty cost matrix");
    Mat acc(L, N);         // accumulated cost D
    std::vector<int> step(size_t(L) * N, 0);  // step matrix E (predecessor for l == 0)

    for (int l = 0; l < L; ++l) acc(l, 0) = cost(l, 0);
    for (int n = 1; n < N; ++n) {
        // State 0 may be entered from any state in S; smallest index on ties.
        double best = acc(0, n - 1);
        int best_l = 0;
        for (int l = std::max(1, mc.min_note_len - 1); l < L; ++l) {
            if (acc(l, n - 1) < best) {
                best = acc(l, n - 1);
                best_l = l;
            }
        }
        acc(0, n) = cost(0, n) + best;
        step[size_t(0) * N + n] = best_l;
        for (int l = 1; l < L; ++l) {
            acc(l, n) = cost(l, n) + acc(l - 1, n - 1);
            step[size_t(l) * N + n] = l - 1;
        }
    }

    int last = 0;
    for (int l = 1; l < L; ++l)
        if (acc(l, N - 1) < acc(last, N - 1)) last = l;
    if (min_cost) *min_cost = acc(last, N - 1);

    std::vector<int> seq(N);
    seq[N - 1] = last;
    for (int n = N - 2; n >= 0; --n) seq[n] = step[size_t(seq[n + 1]) * N + n + 1];
    return seq;
}

MarkovProjection markov_project(const Tensor3& v, const MarkovConfig& mc) {
    const int K = v.d0(), L = v.d1(), N = v.d2();
    if (L != mc.templates)
        throw std::invalid_argument("markov_project: config templates must equal L");
    MarkovProjection out;
    out.x = Tensor3(K, L, N, 0.0);
    out.sequences.resize(K);
    parallel_for(0, K, [&](int k) {
        Mat slice(L, N);
        for (int l = 0; l < L; ++l)
            for (int n = 0; n < N; ++n) slice(l, n) = v(k, l, n);
        const Mat cost = markov_cost_matrix(slice, mc);
        out.sequences[k] = markov_decode(cost, mc);
        for (int n = 0; n < N; ++n) {
            const int lo = out.sequences[k][n];
            const int hi = std::min(L, lo + mc.overlap + 1);
            for (int l = lo; l < hi; ++l) out.x(k, l, n) = v(k, l, n);
        }
    });
    return out;
}

}  // namespace stpt
