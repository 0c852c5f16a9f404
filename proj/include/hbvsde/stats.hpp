#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde::stats {

/// Neumaier-compensated summation.
inline double compensated_sum(std::span<const double> v)
{
    double sum = 0.0;
    double comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// Arithmetic mean, accumulated as offsets from the first element so a constant sample returns that constant exactly.
inline double mean(std::span<const double> v)
{
    if (v.empty())
        throw std::invalid_argument("mean of empty sample");
    const double ref = v[0];
    double s = 0.0;
    for (double x : v)
        s += x - ref;
    return ref + s / static_cast<double>(v.size());
}

/// Unbiased sample variance; zero for a single observation.
inline double variance(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Linear-interpolation quantile (Hyndman-Fan type 7). Sorts a copy.
inline double quantile(std::span<const double> v, double prob)
{
    if (v.empty())
        throw std::invalid_argument("quantile of empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double median(std::span<const double> v) { return quantile(v, 0.5); }

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. r^2 is 1 for a perfect (or flat) fit.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares: need two or more paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0)
        throw std::invalid_argument("least_squares: abscissae are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        sse += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
    return fit;
}

/// Trapezoid integral of samples v over abscissae t.
inline double trapezoid(std::span<const double> t, std::span<const double> v)
{
    if (t.size() != v.size())
        throw std::invalid_argument("trapezoid: size mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        s += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
    return s;
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> density;  ///< normalised so the integral over [lo, hi] is the in-range fraction
    std::size_t below = 0;
    std::size_t above = 0;

    double bin_width() const { return (hi - lo) / static_cast<double>(density.size()); }
    double bin_center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
};

inline Histogram histogram(std::span<const double> v, double lo, double hi, std::size_t bins)
{
    if (bins == 0 || !(hi > lo))
        throw std::invalid_argument("histogram: need bins >= 1 and hi > lo");
    Histogram h{lo, hi, std::vector<double>(bins, 0.0), 0, 0};
    const double w = h.bin_width();
    for (double x : v) {
        if (x < lo) {
            ++h.below;
        } else if (x >= hi) {
            ++h.above;
        } else {
            auto k = static_cast<std::size_t>((x - lo) / w);
            h.density[std::min(k, bins - 1)] += 1.0;
        }
    }
    const double norm = static_cast<double>(v.size()) * w;
    if (norm > 0.0)
        for (auto& d : h.density)
            d /= norm;
    return h;
}

}  // namespace hbvsde::stats
