#ifndef STPT_TEST_HELPERS_HPP_
#define STPT_TEST_HELPERS_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "stpt/tensor.hpp"
#include "stpt/util.hpp"

namespace stpt::test {

inline Tensor3 random_tensor(int d0, int d1, int d2, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
    Tensor3 t(d0, d1, d2);
    for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

inline Mat random_mat(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

inline double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double max_abs_diff(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

/// Golden-section minimizer over [lo, hi]; independent scalar oracle.
inline double golden_minimize(const std::function<double(double)>& f, double lo,
                              double hi, int iters = 200) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

}  // namespace stpt::test

#endif  // STPT_TEST_HELPERS_HPP_
