#include "breathradar/common.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "breathradar/rng.hpp"

namespace breathradar {

std::size_t exact_sample_count(double seconds, double sample_rate, const char* what, double tol) {
    const double x = seconds * sample_rate;
    const double r = std::round(x);
    if (!(std::abs(x - r) <= tol * std::max(1.0, r))) {
        throw ConfigError(std::string(what) + " is not an integer number of samples (" + std::to_string(x) + ")");
    }
    return static_cast<std::size_t>(r);
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ConfigError("uniform_int: empty range");
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    if (span == 0) return std::int64_t(engine_());
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return lo + std::int64_t(v % span);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method
    double u, v, q;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
}

cplx Rng::complex_normal(double power) {
    const double s = std::sqrt(power / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

cplx Rng::qpsk() {
    const std::uint64_t b = engine_();
    constexpr double a = 0.70710678118654752440;
    return {(b & 1) ? a : -a, (b & 2) ? a : -a};
}

}  // namespace breathradar
