#include "stpt/tensor.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "stpt/util.hpp"

namespace stpt {

void Spectrogram::validate() const {
    if (hop < 1) throw std::invalid_argument("spectrogram: hop must be >= 1");
    if (window < hop) throw std::invalid_argument("spectrogram: window must be >= hop");
    if (int(freq_map.size()) != data.rows())
        throw std::invalid_argument("spectrogram: freq_map length must equal bin count");
    for (size_t i = 0; i + 1 < freq_map.size(); ++i)
        if (!(freq_map[i] < freq_map[i + 1]))
            throw std::invalid_argument("spectrogram: freq_map must be strictly increasing");
    for (size_t i = 0; i < data.size(); ++i)
        if (data.data()[i] < 0.0)
            throw std::invalid_argument("spectrogram: negative magnitude entry");
}

void PatternDictionary::validate() const {
    if (int(pitch_map.size()) != data.d2())
        throw std::invalid_argument("dictionary: pitch_map length must equal K");
    std::set<int> distinct(pitch_map.begin(), pitch_map.end());
    if (distinct.size() != pitch_map.size())
        throw std::invalid_argument("dictionary: duplicate pitch");
    for (size_t i = 0; i < data.size(); ++i)
        if (data.data()[i] < 0.0)
            throw std::invalid_argument("dictionary: negative entry");
}

Mat synthesize(const PatternDictionary& P, const Tensor3& A) {
    const int M = P.data.d0(), L = P.data.d1(), K = P.data.d2();
    const int N = A.d2();
    if (A.d0() != K || A.d1() != L)
        throw std::invalid_argument("synthesize: dimension mismatch between P and A");
    Mat out(M, N, 0.0);
    parallel_for(0, M, [&](int m) {
        double* row = out.data() + size_t(m) * N;
        for (int k = 0; k < K; ++k) {
            for (int l = 0; l < L; ++l) {
                const double p = P.data(m, l, k);
                if (p == 0.0) continue;
                const double* a = A.data() + (size_t(k) * L + l) * N;
                for (int n = 0; n < N; ++n) row[n] += p * a[n];
            }
        }
    });
    return out;
}

Tensor3 adjoint_synthesize(const PatternDictionary& P, const Mat& X) {
    const int M = P.data.d0(), L = P.data.d1(), K = P.data.d2();
    const int N = X.cols();
    if (X.rows() != M)
        throw std::invalid_argument("adjoint_synthesize: dimension mismatch between P and X");
    Tensor3 out(K, L, N, 0.0);
    parallel_for(0, K, [&](int k) {
        for (int l = 0; l < L; ++l) {
            double* o = out.data() + (size_t(k) * L + l) * N;
            for (int m = 0; m < M; ++m) {
                const double p = P.data(m, l, k);
                if (p == 0.0) continue;
                const double* x = X.data() + size_t(m) * N;
                for (int n = 0; n < N; ++n) o[n] += p * x[n];
            }
        }
    });
    return out;
}

Tensor3 tdv(const Tensor3& A) {
    const int K = A.d0(), L = A.d1(), N = A.d2();
    if (L < 2 || N < 2)
        throw std::invalid_argument("tdv: requires L >= 2 and N >= 2");
    Tensor3 out(K, L - 1, N - 1);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l + 1 < L; ++l)
            for (int n = 0; n + 1 < N; ++n)
                out(k, l, n) = A(k, l, n) - A(k, l + 1, n + 1);
    return out;
}

Tensor3 tdv_adjoint(const Tensor3& D) {
    const int K = D.d0(), L = D.d1() + 1, N = D.d2() + 1;
    Tensor3 out(K, L, N, 0.0);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l + 1 < L; ++l)
            for (int n = 0; n + 1 < N; ++n) {
                const double d = D(k, l, n);
                out(k, l, n) += d;
                out(k, l + 1, n + 1) -= d;
            }
    return out;
}

Mat flatten(const Tensor3& A) {
    const int K = A.d0(), L = A.d1(), N = A.d2();
    Mat out(K * L, N);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
            for (int n = 0; n < N; ++n) out(k * L + l, n) = A(k, l, n);
    return out;
}

Tensor3 unflatten(const Mat& m, int K, int L) {
    if (m.rows() != K * L)
        throw std::invalid_argument("unflatten: row count must equal K*L");
    const int N = m.cols();
    Tensor3 out(K, L, N);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
            for (int n = 0; n < N; ++n) out(k, l, n) = m(k * L + l, n);
    return out;
}

double spectral_norm_estimate(const LinOp& op, int iters, uint64_t seed) {
    if (iters < 1) throw std::invalid_argument("spectral_norm_estimate: iters must be >= 1");
    Rng rng(seed);
    std::vector<double> b(op.in_dim), y(op.out_dim), back(op.in_dim);
    for (auto& x : b) x = rng.gaussian();

    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        double bn2 = 0.0;
        for (double x : b) bn2 += x * x;
        if (bn2 == 0.0) return 0.0;
        op.apply(b.data(), y.data());
        double yn2 = 0.0;
        for (double x : y) yn2 += x * x;
        sigma = std::sqrt(yn2 / bn2);  // Rayleigh quotient of C^T C
        if (yn2 == 0.0) return 0.0;
        op.adjoint(y.data(), back.data());
        double cn2 = 0.0;
        for (double x : back) cn2 += x * x;
        if (cn2 == 0.0) return 0.0;
        const double inv = 1.0 / std::sqrt(cn2);
        for (size_t i = 0; i < b.size(); ++i) b[i] = back[i] * inv;
    }
    return sigma;
}

double kl_divergence(const Mat& V, const Mat& Q) {
    if (!V.same_shape(Q)) throw std::invalid_argument("kl_divergence: shape mismatch");
    double total = 0.0;
    for (size_t i = 0; i < V.size(); ++i) {
        const double a = V.data()[i], b = Q.data()[i];
        if (a > 0.0) {
            if (b <= 0.0) return std::numeric_limits<double>::infinity();
            total += a * std::log(a / b) - a + b;
        } else {
            total += b;
        }
    }
    return total;
}

double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

double frobenius_norm(const Tensor3& t) {
    double s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += t.data()[i] * t.data()[i];
    return std::sqrt(s);
}

}  // namespace stpt
