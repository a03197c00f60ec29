#ifndef STPT_TENSOR_HPP_
#define STPT_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace stpt {

/// Dense row-major matrix (column index contiguous).
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(size_t(rows) * cols, fill) {}

    double& operator()(int r, int c) { return v_[size_t(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[size_t(r) * cols_ + c]; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

/// Dense order-3 tensor, last index contiguous. Activity tensors are
/// stored (K, L, N) so the frame index n is innermost.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int d0, int d1, int d2, double fill = 0.0)
        : d0_(d0), d1_(d1), d2_(d2), v_(size_t(d0) * d1 * d2, fill) {}

    double& operator()(int i, int j, int k) {
        return v_[(size_t(i) * d1_ + j) * d2_ + k];
    }
    double operator()(int i, int j, int k) const {
        return v_[(size_t(i) * d1_ + j) * d2_ + k];
    }

    int d0() const { return d0_; }
    int d1() const { return d1_; }
    int d2() const { return d2_; }
    size_t size() const { return v_.size(); }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const Tensor3& o) const {
        return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_;
    }

private:
    int d0_ = 0, d1_ = 0, d2_ = 0;
    std::vector<double> v_;
};

/// K x L x N activity tensor (non-negative after any constrained solve).
using ActivityTensor = Tensor3;

/// Log-frequency magnitude spectrogram plus framing metadata.
struct Spectrogram {
    Mat data;                       // M x N, entries >= 0
    double sample_rate = 0.0;       // Hz
    int hop = 0;                    // samples per frame step
    int window = 0;                 // samples per analysis window
    std::vector<double> freq_map;   // M center frequencies, strictly increasing

    double hop_seconds() const { return hop / sample_rate; }
    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// M x L x K tensor of unnormalized spectro-temporal note patterns.
struct PatternDictionary {
    Tensor3 data;                   // M x L x K, entries >= 0
    std::vector<int> pitch_map;     // K distinct MIDI pitches, ascending
    double sample_rate = 0.0;
    int hop = 0;
    int window = 0;

    int num_bins() const { return data.d0(); }
    int num_templates() const { return data.d1(); }
    int num_keys() const { return data.d2(); }
    double hop_seconds() const { return hop / sample_rate; }
    void validate() const;
};

/// out[m,n] = sum_k sum_l P[m,l,k] * A[k,l,n].
Mat synthesize(const PatternDictionary& P, const Tensor3& A);

/// out[k,l,n] = sum_m P[m,l,k] * X[m,n]; adjoint of synthesize.
Tensor3 adjoint_synthesize(const PatternDictionary& P, const Mat& X);

/// Diagonal difference: out[k,l,n] = A[k,l,n] - A[k,l+1,n+1].
/// Requires L >= 2 and N >= 2.
Tensor3 tdv(const Tensor3& A);

/// Adjoint of tdv: <tdv(A), D> = <A, tdv_adjoint(D)>.
Tensor3 tdv_adjoint(const Tensor3& D);

/// KL x N matrix with row (k*L + l) = A[k,l,:].
Mat flatten(const Tensor3& A);
Tensor3 unflatten(const Mat& m, int K, int L);

/// A linear operator on flat vectors, with its adjoint.
struct LinOp {
    size_t in_dim = 0;
    size_t out_dim = 0;
    std::function<void(const double* x, double* y)> apply;    // y = C x
    std::function<void(const double* y, double* x)> adjoint;  // x = C^T y
};

/// Power-iteration estimate of the largest singular value of `op`.
/// Deterministic for a fixed seed; returns 0 for the zero operator.
double spectral_norm_estimate(const LinOp& op, int iters, uint64_t seed);

/// Generalized KL divergence sum_mn d(V, Q), d(a,b) = a log(a/b) - a + b
/// with 0 log 0 = 0. Intended for objective reporting; entries of Q at
/// 0 against positive V yield +inf.
double kl_divergence(const Mat& V, const Mat& Q);

double frobenius_norm(const Mat& m);
double frobenius_norm(const Tensor3& t);

}  // namespace stpt

#endif  // STPT_TENSOR_HPP_
