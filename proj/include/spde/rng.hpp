#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace spde::rng {

// Counter-based randomness: every consumer owns a stream keyed by
// (master seed, path index, purpose). Streams never share state, so results
// are independent of evaluation order and thread count.

enum class Purpose : std::uint64_t {
    wiener = 1,
    jump_count = 2,
    jump_times = 3,
    marks = 4,
    h_factor = 5,
    metadata = 6,
};

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Stream {
public:
    Stream(std::uint64_t master, std::uint64_t path_index, Purpose purpose) {
        std::uint64_t s = mix64(master);
        s = mix64(s ^ (0xA24BAED4963EE407ull * (path_index + 1)));
        s = mix64(s ^ (0x9FB21C651E98DF25ull * (static_cast<std::uint64_t>(purpose) + 1)));
        state_ = s;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on (0,1): (k + 1/2) * 2^-64 never hits the endpoints.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal();

private:
    std::uint64_t state_;
};

// Standard normal quantile: Acklam's rational approximation polished with
// one Halley step against erfc, giving ~1 ulp over (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile requires p in (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    constexpr double sqrt_two = 1.4142135623730951;
    constexpr double sqrt_two_pi = 2.5066282746310002;
    double e = 0.5 * std::erfc(-x / sqrt_two) - p;
    double u = e * sqrt_two_pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

inline double Stream::next_normal() { return normal_quantile(next_uniform()); }

// Poisson sample by CDF inversion; exact for the modest rates used here.
inline int poisson_inverse(double lambda, double u) {
    if (lambda < 0.0) throw std::domain_error("poisson rate must be nonnegative");
    if (lambda == 0.0) return 0;
    double term = std::exp(-lambda);
    double cdf = term;
    int k = 0;
    const int cap = static_cast<int>(lambda + 40.0 * std::sqrt(lambda) + 100.0);
    while (u > cdf && k < cap) {
        ++k;
        term *= lambda / k;
        cdf += term;
    }
    return k;
}

}  // namespace spde::rng
