#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "stpt/tensor.hpp"
#include "stpt/util.hpp"
#include "test_helpers.hpp"

using namespace stpt;
using namespace stpt::test;

namespace {

PatternDictionary make_dict(int M, int L, int K, Rng& rng) {
    PatternDictionary P;
    P.data = Tensor3(M, L, K);
    for (size_t i = 0; i < P.data.size(); ++i) P.data.data()[i] = rng.uniform(0.0, 1.0);
    P.pitch_map.resize(K);
    for (int k = 0; k < K; ++k) P.pitch_map[k] = 60 + k;
    P.sample_rate = 22050.0;
    P.hop = 256;
    P.window = 1024;
    return P;
}

Mat synthesize_reference(const PatternDictionary& P, const Tensor3& A) {
    const int M = P.data.d0(), L = P.data.d1(), K = P.data.d2(), N = A.d2();
    Mat out(M, N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k)
                for (int l = 0; l < L; ++l)
                    out(m, n) += P.data(m, l, k) * A(k, l, n);
    return out;
}

}  // namespace

TEST_CASE("synthesize single-term sum") {
    Rng rng(1);
    PatternDictionary P = make_dict(2, 1, 1, rng);
    P.data(0, 0, 0) = 1.0;
    P.data(1, 0, 0) = 2.0;
    Tensor3 A(1, 1, 2, 0.0);
    A(0, 0, 0) = 3.0;
    Mat V = synthesize(P, A);
    CHECK(V(0, 0) == doctest::Approx(3.0));
    CHECK(V(1, 0) == doctest::Approx(6.0));
    CHECK(V(0, 1) == 0.0);
    CHECK(V(1, 1) == 0.0);
}

TEST_CASE("synthesize of zero activity is zero") {
    Rng rng(2);
    PatternDictionary P = make_dict(4, 3, 2, rng);
    Tensor3 A(2, 3, 5, 0.0);
    Mat V = synthesize(P, A);
    for (size_t i = 0; i < V.size(); ++i) CHECK(V.data()[i] == 0.0);
}

TEST_CASE("synthesize matches triple-loop reference") {
    Rng rng(3);
    PatternDictionary P = make_dict(3, 2, 2, rng);
    Tensor3 A = random_tensor(2, 2, 4, rng, 0.0, 1.0);
    Mat got = synthesize(P, A);
    Mat want = synthesize_reference(P, A);
    CHECK(max_abs_diff(got.data(), want.data(), got.size()) < 1e-12);
}

TEST_CASE("synthesize rejects dimension mismatch") {
    Rng rng(4);
    PatternDictionary P = make_dict(3, 2, 2, rng);
    Tensor3 A(2, 3, 4);  // wrong L
    CHECK_THROWS_AS(synthesize(P, A), std::invalid_argument);
}

TEST_CASE("synthesize is linear in the activity") {
    Rng rng(5);
    PatternDictionary P = make_dict(5, 3, 2, rng);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor3 a1 = random_tensor(2, 3, 6, rng);
        Tensor3 a2 = random_tensor(2, 3, 6, rng);
        const double ca = rng.uniform(-2.0, 2.0), cb = rng.uniform(-2.0, 2.0);
        Tensor3 mix(2, 3, 6);
        for (size_t i = 0; i < mix.size(); ++i)
            mix.data()[i] = ca * a1.data()[i] + cb * a2.data()[i];
        Mat lhs = synthesize(P, mix);
        Mat r1 = synthesize(P, a1), r2 = synthesize(P, a2);
        double scale = 0.0;
        for (size_t i = 0; i < lhs.size(); ++i) {
            const double want = ca * r1.data()[i] + cb * r2.data()[i];
            CHECK(std::abs(lhs.data()[i] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
            scale = std::max(scale, std::abs(want));
        }
        CHECK(scale >= 0.0);
    }
}

TEST_CASE("adjoint_synthesize zero input") {
    Rng rng(6);
    PatternDictionary P = make_dict(3, 2, 2, rng);
    Mat X(3, 4, 0.0);
    Tensor3 T = adjoint_synthesize(P, X);
    for (size_t i = 0; i < T.size(); ++i) CHECK(T.data()[i] == 0.0);
}

TEST_CASE("adjoint_synthesize scalar case") {
    Rng rng(7);
    PatternDictionary P = make_dict(1, 1, 1, rng);
    P.data(0, 0, 0) = 2.0;
    Mat X(1, 1);
    X(0, 0) = 5.0;
    Tensor3 T = adjoint_synthesize(P, X);
    CHECK(T(0, 0, 0) == doctest::Approx(10.0));
}

TEST_CASE("synthesize/adjoint inner-product identity") {
    Rng rng(8);
    for (int rep = 0; rep < 100; ++rep) {
        const int M = rng.uniform_int(1, 6), L = rng.uniform_int(1, 4);
        const int K = rng.uniform_int(1, 4), N = rng.uniform_int(1, 6);
        PatternDictionary P = make_dict(M, L, K, rng);
        Tensor3 A = random_tensor(K, L, N, rng);
        Mat X = random_mat(M, N, rng);
        Mat CA = synthesize(P, A);
        Tensor3 CtX = adjoint_synthesize(P, X);
        const double lhs = dot(CA.data(), X.data(), CA.size());
        const double rhs = dot(A.data(), CtX.data(), A.size());
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("tdv of diagonally constant tensor is zero") {
    Tensor3 A(2, 3, 4);
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 3; ++l)
            for (int n = 0; n < 4; ++n) A(k, l, n) = double(k) + double(n - l);
    Tensor3 D = tdv(A);
    for (size_t i = 0; i < D.size(); ++i) CHECK(D.data()[i] == doctest::Approx(0.0));
}

TEST_CASE("tdv of A[k,l,n]=l is -1 everywhere") {
    Tensor3 A(1, 4, 5);
    for (int l = 0; l < 4; ++l)
        for (int n = 0; n < 5; ++n) A(0, l, n) = double(l);
    Tensor3 D = tdv(A);
    CHECK(D.d1() == 3);
    CHECK(D.d2() == 4);
    for (size_t i = 0; i < D.size(); ++i) CHECK(D.data()[i] == doctest::Approx(-1.0));
}

TEST_CASE("tdv matches index-shifted subtraction") {
    Rng rng(9);
    Tensor3 A = random_tensor(2, 4, 6, rng);
    Tensor3 D = tdv(A);
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 3; ++l)
            for (int n = 0; n < 5; ++n)
                CHECK(D(k, l, n) == doctest::Approx(A(k, l, n) - A(k, l + 1, n + 1)));
}

TEST_CASE("tdv rejects too-small tensors") {
    Tensor3 A(1, 1, 5);
    CHECK_THROWS_AS(tdv(A), std::invalid_argument);
    Tensor3 B(1, 5, 1);
    CHECK_THROWS_AS(tdv(B), std::invalid_argument);
}

TEST_CASE("tdv_adjoint zero and single-entry transpose") {
    Tensor3 D0(1, 1, 1, 0.0);
    Tensor3 Z = tdv_adjoint(D0);
    CHECK(Z.d1() == 2);
    CHECK(Z.d2() == 2);
    for (size_t i = 0; i < Z.size(); ++i) CHECK(Z.data()[i] == 0.0);

    Tensor3 D(1, 1, 1);
    D(0, 0, 0) = 3.5;
    Tensor3 T = tdv_adjoint(D);
    CHECK(T(0, 0, 0) == doctest::Approx(3.5));
    CHECK(T(0, 1, 1) == doctest::Approx(-3.5));
    CHECK(T(0, 0, 1) == 0.0);
    CHECK(T(0, 1, 0) == 0.0);
}

TEST_CASE("tdv/tdv_adjoint inner-product identity") {
    Rng rng(10);
    for (int rep = 0; rep < 100; ++rep) {
        const int K = rng.uniform_int(1, 3), L = rng.uniform_int(2, 5), N = rng.uniform_int(2, 6);
        Tensor3 A = random_tensor(K, L, N, rng);
        Tensor3 D = random_tensor(K, L - 1, N - 1, rng);
        Tensor3 CA = tdv(A);
        Tensor3 CtD = tdv_adjoint(D);
        const double lhs = dot(CA.data(), D.data(), CA.size());
        const double rhs = dot(A.data(), CtD.data(), A.size());
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("flatten row order and round trip") {
    Tensor3 A(2, 2, 3);
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
            for (int n = 0; n < 3; ++n) A(k, l, n) = k * 100 + l * 10 + n;
    Mat F = flatten(A);
    CHECK(F.rows() == 4);
    // rows ordered (k=0,l=0), (0,1), (1,0), (1,1)
    CHECK(F(0, 2) == doctest::Approx(2.0));
    CHECK(F(1, 0) == doctest::Approx(10.0));
    CHECK(F(2, 1) == doctest::Approx(101.0));
    CHECK(F(3, 2) == doctest::Approx(112.0));

    Tensor3 back = unflatten(F, 2, 2);
    CHECK(max_abs_diff(back.data(), A.data(), A.size()) == 0.0);
}

TEST_CASE("flatten of empty frame axis") {
    Tensor3 A(2, 3, 0);
    Mat F = flatten(A);
    CHECK(F.rows() == 6);
    CHECK(F.cols() == 0);
}

TEST_CASE("flatten round trip on random tensors") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int K = rng.uniform_int(1, 4), L = rng.uniform_int(1, 4), N = rng.uniform_int(1, 5);
        Tensor3 A = random_tensor(K, L, N, rng);
        Tensor3 back = unflatten(flatten(A), K, L);
        CHECK(max_abs_diff(back.data(), A.data(), A.size()) == 0.0);
    }
}

namespace {

LinOp dense_op(const Eigen::MatrixXd& m) {
    LinOp op;
    op.in_dim = size_t(m.cols());
    op.out_dim = size_t(m.rows());
    op.apply = [m](const double* x, double* y) {
        Eigen::Map<const Eigen::VectorXd> xv(x, m.cols());
        Eigen::Map<Eigen::VectorXd> yv(y, m.rows());
        yv = m * xv;
    };
    op.adjoint = [m](const double* y, double* x) {
        Eigen::Map<const Eigen::VectorXd> yv(y, m.rows());
        Eigen::Map<Eigen::VectorXd> xv(x, m.cols());
        xv = m.transpose() * yv;
    };
    return op;
}

}  // namespace

TEST_CASE("spectral norm of identity and scaling") {
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(6, 6);
    CHECK(spectral_norm_estimate(dense_op(eye), 50, 1) == doctest::Approx(1.0).epsilon(1e-6));
    Eigen::MatrixXd scaled = 3.0 * eye;
    CHECK(spectral_norm_estimate(dense_op(scaled), 50, 1) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("spectral norm of zero operator") {
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 3);
    CHECK(spectral_norm_estimate(dense_op(zero), 10, 1) == 0.0);
}

TEST_CASE("spectral norm matches dense SVD") {
    Rng rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const int rows = rng.uniform_int(2, 8), cols = rng.uniform_int(2, 8);
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
        const double want = m.jacobiSvd().singularValues()(0);
        const double got = spectral_norm_estimate(dense_op(m), 200, 7);
        CHECK(got == doctest::Approx(want).epsilon(1e-4));
    }
}

TEST_CASE("spectral norm estimate is deterministic and monotone in iters") {
    Rng rng(13);
    Eigen::MatrixXd m(7, 7);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
    const double a = spectral_norm_estimate(dense_op(m), 25, 5);
    const double b = spectral_norm_estimate(dense_op(m), 25, 5);
    CHECK(a == b);
    double prev = 0.0;
    for (int iters : {1, 2, 5, 10, 40}) {
        const double est = spectral_norm_estimate(dense_op(m), iters, 5);
        CHECK(est >= prev - 1e-12);
        prev = est;
    }
}

TEST_CASE("parallel synthesize is bitwise deterministic") {
    Rng rng(14);
    PatternDictionary P = make_dict(12, 4, 5, rng);
    Tensor3 A = random_tensor(5, 4, 32, rng, 0.0, 1.0);
    Mat seq = synthesize(P, A);
    set_max_threads(4);
    Mat par = synthesize(P, A);
    Tensor3 seq_adj = adjoint_synthesize(P, seq);
    set_max_threads(1);
    Tensor3 seq_adj1 = adjoint_synthesize(P, seq);
    CHECK(max_abs_diff(seq.data(), par.data(), seq.size()) == 0.0);
    CHECK(max_abs_diff(seq_adj.data(), seq_adj1.data(), seq_adj.size()) == 0.0);
}
