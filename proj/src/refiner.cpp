#include "stpt/refiner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "stpt/util.hpp"

namespace stpt {

bool is_binary_markov(const Tensor3& B, const MarkovConfig& mc) {
    const int K = B.d0(), L = B.d1(), N = B.d2();
    for (size_t i = 0; i < B.size(); ++i)
        if (B.data()[i] != 0.0 && B.data()[i] != 1.0) return false;
    // A valid encoding needs, per frame, some state whose active window
    // covers every 1-entry, with the per-key sequence valid.
    for (int k = 0; k < K; ++k) {
        std::vector<std::vector<int>> candidates(N);
        for (int n = 0; n < N; ++n) {
            for (int s = 0; s < L; ++s) {
                bool ok = true;
                const int hi = std::min(L, s + mc.overlap + 1);
                for (int l = 0; l < L && ok; ++l) {
                    const bool inside = l >= s && l < hi;
                    if (!inside && B(k, l, n) != 0.0) ok = false;
                }
                if (ok) candidates[n].push_back(s);
            }
            if (candidates[n].empty()) return false;
        }
        // Reachability over candidate states frame to frame.
        std::vector<char> reach(L, 0);
        for (int s : candidates[0]) reach[s] = 1;
        for (int n = 1; n < N; ++n) {
            std::vector<char> next(L, 0);
            bool any = false;
            for (int s : candidates[n]) {
                bool ok = false;
                if (s == 0) {
                    for (int p = 0; p < L && !ok; ++p)
                        if (reach[p] && mc.allows_return(p)) ok = true;
                } else if (reach[s - 1]) {
                    ok = true;
                }
                if (ok) { next[s] = 1; any = true; }
            }
            if (!any) return false;
            reach.swap(next);
        }
    }
    return true;
}

bool is_strict_coupled(const Tensor3& G, double a_m) {
    const int K = G.d0(), L = G.d1(), N = G.d2();
    for (int k = 0; k < K; ++k)
        for (int d = -(L - 1); d < N; ++d) {
            double first = 0.0;
            bool have = false;
            for (int l = 0; l < L; ++l) {
                const int n = d + l;
                if (n < 0 || n >= N) continue;
                const double g = G(k, l, n);
                if (!have) { first = g; have = true; }
                else if (g != first) return false;
            }
            if (have && first != 0.0 && first < a_m) return false;
        }
    return true;
}

std::pair<BinaryActivity, GainTensor> init_bg(const Tensor3& A, double a_m) {
    const int K = A.d0(), L = A.d1(), N = A.d2();
    BinaryActivity B(K, L, N, 0.0);
    GainTensor G(K, L, N, 0.0);
    for (size_t i = 0; i < A.size(); ++i)
        B.data()[i] = A.data()[i] > a_m ? 1.0 : 0.0;
    for (int k = 0; k < K; ++k)
        for (int d = -(L - 1); d < N; ++d) {
            double mx = 0.0;
            for (int l = 0; l < L; ++l) {
                const int n = d + l;
                if (n >= 0 && n < N) mx = std::max(mx, A(k, l, n));
            }
            for (int l = 0; l < L; ++l) {
                const int n = d + l;
                if (n >= 0 && n < N) G(k, l, n) = mx;
            }
        }
    return {std::move(B), std::move(G)};
}

Tensor3 markov_project_binary(const Tensor3& v, const MarkovConfig& mc,
                              std::vector<std::vector<int>>* sequences) {
    const int K = v.d0(), L = v.d1(), N = v.d2();
    Tensor3 out(K, L, N, 0.0);
    if (sequences) sequences->resize(K);
    parallel_for(0, K, [&](int k) {
        // Window reward per entry: v^2 - min(v^2, (v-1)^2) = max(0, 2v - 1)
        // truncated at v^2; cost = column total - windowed reward.
        Mat reward(L, N), cost(L, N);
        std::vector<double> total(N, 0.0);
        for (int l = 0; l < L; ++l)
            for (int n = 0; n < N; ++n) {
                const double x = v(k, l, n);
                const double sq = x * x;
                const double one = (x - 1.0) * (x - 1.0);
                reward(l, n) = sq - std::min(sq, one);
                total[n] += sq;
            }
        std::vector<double> prefix(L + 1);
        for (int n = 0; n < N; ++n) {
            prefix[0] = 0.0;
            for (int l = 0; l < L; ++l) prefix[l + 1] = prefix[l] + reward(l, n);
            for (int l = 0; l < L; ++l) {
                const int hi = std::min(L, l + mc.overlap + 1);
                cost(l, n) = total[n] - (prefix[hi] - prefix[l]);
            }
        }
        const std::vector<int> seq = markov_decode(cost, mc);
        if (sequences) (*sequences)[k] = seq;
        for (int n = 0; n < N; ++n) {
            const int lo = seq[n];
            const int hi = std::min(L, lo + mc.overlap + 1);
            for (int l = lo; l < hi; ++l)
                out(k, l, n) = v(k, l, n) > 0.5 ? 1.0 : 0.0;
        }
    });
    return out;
}

Tensor3 strict_coupling_project(const Tensor3& u, double a_m) {
    const int K = u.d0(), L = u.d1(), N = u.d2();
    Tensor3 out(K, L, N, 0.0);
    const double half = a_m / 2.0;
    for (int k = 0; k < K; ++k)
        for (int d = -(L - 1); d < N; ++d) {
            double sum = 0.0;
            int count = 0;
            for (int l = 0; l < L; ++l) {
                const int n = d + l;
                if (n >= 0 && n < N) { sum += u(k, l, n); ++count; }
            }
            if (count == 0) continue;
            const double mean = sum / count;
            const double g = mean > a_m ? mean : (mean >= half ? a_m : 0.0);
            for (int l = 0; l < L; ++l) {
                const int n = d + l;
                if (n >= 0 && n < N) out(k, l, n) = g;
            }
        }
    return out;
}

namespace {

// Frame-wise CG for (P^T P + I) z = rhs over the K*L coefficient space.
// Returns the number of frames that hit the iteration cap above tol.
int solve_normal_frames(const PatternDictionary& P, const Tensor3& rhs, Tensor3& z,
                        double tol, int max_iters) {
    const int M = P.data.d0(), L = P.data.d1(), K = P.data.d2();
    const int N = rhs.d2();
    std::atomic<int> failures{0};
    parallel_for(0, N, [&](int n) {
        const int dim = K * L;
        std::vector<double> x(dim), r(dim), p(dim), ap(dim), tmp(M);
        auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (int k = 0; k < K; ++k)
                for (int l = 0; l < L; ++l) {
                    const double a = in[size_t(k) * L + l];
                    if (a == 0.0) continue;
                    for (int m = 0; m < M; ++m) tmp[m] += P.data(m, l, k) * a;
                }
            for (int k = 0; k < K; ++k)
                for (int l = 0; l < L; ++l) {
                    double acc = 0.0;
                    for (int m = 0; m < M; ++m) acc += P.data(m, l, k) * tmp[m];
                    out[size_t(k) * L + l] = acc + in[size_t(k) * L + l];
                }
        };
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < L; ++l) x[size_t(k) * L + l] = z(k, l, n);
        apply(x, ap);
        double rs = 0.0;
        for (int i = 0; i < dim; ++i) {
            r[i] = rhs(i / L, i % L, n) - ap[i];
            p[i] = r[i];
            rs += r[i] * r[i];
        }
        const double rs0 = rs;
        bool converged = rs <= tol * tol * std::max(rs0, 1e-300);
        for (int it = 0; it < max_iters && !converged; ++it) {
            apply(p, ap);
            double pap = 0.0;
            for (int i = 0; i < dim; ++i) pap += p[i] * ap[i];
            if (pap <= 0.0) break;
            const double alpha = rs / pap;
            double rs_next = 0.0;
            for (int i = 0; i < dim; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                rs_next += r[i] * r[i];
            }
            const double ratio = rs_next / rs;
            rs = rs_next;
            if (rs <= tol * tol * std::max(rs0, 1e-300)) { converged = true; break; }
            for (int i = 0; i < dim; ++i) p[i] = r[i] + ratio * p[i];
        }
        if (!converged) failures.fetch_add(1);
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < L; ++l) z(k, l, n) = x[size_t(k) * L + l];
    });
    return failures.load();
}

double diff_norm(const Tensor3& a, const Tensor3& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double diff_norm(const Mat& a, const Mat& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

RefineResult refine(const Mat& V, const PatternDictionary& P, const Tensor3& B0,
                    const Tensor3& G0, double a_m, const MarkovConfig& mc,
                    const RefineOpts& opts) {
    const int K = B0.d0(), L = B0.d1(), N = B0.d2();
    if (!B0.same_shape(G0)) throw std::invalid_argument("refine: B0/G0 shape mismatch");
    if (a_m <= 0.0) throw std::invalid_argument("refine: a_m must be positive");

    double rho = opts.rho;
    Tensor3 x3 = B0, x4 = G0, x5 = B0, x6 = G0;
    Tensor3 x2(K, L, N);
    for (size_t i = 0; i < x2.size(); ++i) x2.data()[i] = x3.data()[i] * x4.data()[i];
    Mat x1 = synthesize(P, x2);

    Mat b1(V.rows(), V.cols(), 0.0);
    Tensor3 b2(K, L, N, 0.0), b3(K, L, N, 0.0), b4(K, L, N, 0.0);

    RefineResult res;
    res.report.residuals.reserve(opts.iters);
    const int ramp_from = opts.iters / 2;

    for (int it = 0; it < opts.iters; ++it) {
        // X1: closed-form KL update against the current model P X2.
        x1 = prox_kl(V, synthesize(P, x2), b1, rho);

        // X2: (P^T P + I) X2 = P^T X1 + X3.X4 + (P^T b1 - b2)/rho, frame-wise CG.
        Tensor3 pt_x1 = adjoint_synthesize(P, x1);
        Tensor3 pt_b1 = adjoint_synthesize(P, b1);
        Tensor3 rhs(K, L, N);
        for (size_t i = 0; i < rhs.size(); ++i)
            rhs.data()[i] = pt_x1.data()[i] + x3.data()[i] * x4.data()[i] +
                            (pt_b1.data()[i] - b2.data()[i]) / rho;
        res.report.cg_failures +=
            solve_normal_frames(P, rhs, x2, opts.cg_tol, opts.cg_max_iters);

        // X3 and X4: coupled elementwise least squares; denominators >= 1.
        for (size_t i = 0; i < x3.size(); ++i) {
            const double g = x4.data()[i];
            x3.data()[i] = (b2.data()[i] / rho * g + g * x2.data()[i] -
                            b3.data()[i] / rho + x5.data()[i]) / (g * g + 1.0);
        }
        for (size_t i = 0; i < x4.size(); ++i) {
            const double b = x3.data()[i];
            x4.data()[i] = (b2.data()[i] / rho * b + b * x2.data()[i] -
                            b4.data()[i] / rho + x6.data()[i]) / (b * b + 1.0);
        }

        // X5: binary Markov projection of X3 + b3/rho.
        Tensor3 v5(K, L, N);
        for (size_t i = 0; i < v5.size(); ++i)
            v5.data()[i] = x3.data()[i] + b3.data()[i] / rho;
        x5 = markov_project_binary(v5, mc);

        // X6: strict coupling projection of X4 + b4/rho.
        Tensor3 u6(K, L, N);
        for (size_t i = 0; i < u6.size(); ++i)
            u6.data()[i] = x4.data()[i] + b4.data()[i] / rho;
        x6 = strict_coupling_project(u6, a_m);

        // Dual ascent on the four equality constraints.
        Mat px2 = synthesize(P, x2);
        Tensor3 had(K, L, N);
        for (size_t i = 0; i < had.size(); ++i) had.data()[i] = x3.data()[i] * x4.data()[i];
        std::array<double, 4> r{diff_norm(x1, px2), diff_norm(x2, had),
                                diff_norm(x3, x5), diff_norm(x4, x6)};
        for (size_t i = 0; i < b1.size(); ++i)
            b1.data()[i] += rho * (x1.data()[i] - px2.data()[i]);
        for (size_t i = 0; i < b2.size(); ++i) {
            b2.data()[i] += rho * (x2.data()[i] - had.data()[i]);
            b3.data()[i] += rho * (x3.data()[i] - x5.data()[i]);
            b4.data()[i] += rho * (x4.data()[i] - x6.data()[i]);
        }
        res.report.residuals.push_back(r);

        if (opts.rho_growth != 1.0 && it >= ramp_from) {
            const double next = rho * opts.rho_growth;
            const double rescale = rho / next;
            for (size_t i = 0; i < b1.size(); ++i) b1.data()[i] *= rescale;
            for (size_t i = 0; i < b2.size(); ++i) {
                b2.data()[i] *= rescale;
                b3.data()[i] *= rescale;
                b4.data()[i] *= rescale;
            }
            rho = next;
        }
    }

    res.B = std::move(x5);
    res.G = std::move(x6);
    return res;
}

}  // namespace stpt
