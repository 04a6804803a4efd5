#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace spde {

struct SampleStats {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;   // unbiased
    double std_error = 0.0;  // of the mean
};

// Two-pass mean/variance; summation order is fixed by the input order.
inline SampleStats summarize(std::span<const double> values) {
    SampleStats s;
    s.count = values.size();
    if (s.count == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.count);
    if (s.count > 1) {
        double ss = 0.0;
        for (double v : values) {
            double d = v - s.mean;
            ss += d * d;
        }
        s.variance = ss / static_cast<double>(s.count - 1);
        s.std_error = std::sqrt(s.variance / static_cast<double>(s.count));
    }
    return s;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_std_error = 0.0;
    std::size_t points = 0;
};

// Ordinary least squares y ~ slope*x + intercept, slope standard error from
// the residual variance.
inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("fit_line needs matching x/y lengths");
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("fit_line needs at least two points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");

    LineFit fit;
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    if (n > 2) fit.slope_std_error = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
    return fit;
}

}  // namespace spde
