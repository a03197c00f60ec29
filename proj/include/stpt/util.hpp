#ifndef STPT_UTIL_HPP_
#define STPT_UTIL_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace stpt {

/// Thrown when a solver hits non-finite values or fails to make progress.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic RNG used everywhere a seed appears in an interface.
/// mt19937_64 is fully specified by the standard; the uniform/gaussian
/// transforms below are hand-rolled so streams are identical across
/// platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Inclusive integer range.
    int uniform_int(int lo, int hi) {
        return lo + int(gen_() % uint64_t(hi - lo + 1));
    }

    /// Standard normal via Box-Muller (pair cached).
    double gaussian();

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Worker cap for parallel_for. 1 = sequential (default).
void set_max_threads(int n);
int max_threads();

/// Static partition over [begin, end); each index handled exactly once.
/// Workers own disjoint index ranges, so results are bitwise identical
/// to a sequential run as long as `fn` writes only to index-owned state.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace stpt

#endif  // STPT_UTIL_HPP_
