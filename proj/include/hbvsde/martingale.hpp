#pragma once

#include "hbvsde/parallel.hpp"
#include "hbvsde/random.hpp"
#include "hbvsde/stats.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hbvsde {

/// Two-sided 99% standard normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

struct MartingaleCheck {
    double estimate = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double analytic = 0.0;
    std::size_t n_paths = 0;
    bool pass = false;
};

/**
 * @brief Monte Carlo estimate of E[exp(sigma (W(t) - W(s)))] against exp(sigma^2 (t - s) / 2).
 *
 * Path i draws one normal from derive_stream({master_seed, i}).
 */
inline MartingaleCheck exp_martingale_check(double sigma, double t, double s, std::size_t n_paths,
                                            std::uint64_t master_seed, std::size_t workers = default_worker_count())
{
    if (!(s <= t))
        throw std::invalid_argument("exp_martingale_check: require s <= t");
    if (n_paths == 0)
        throw std::invalid_argument("exp_martingale_check: n_paths must be >= 1");
    const double sd = std::sqrt(t - s);
    std::vector<double> v(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t i) {
        auto stream = derive_stream({master_seed, i});
        v[i] = std::exp(sigma * sd * stream.normal());
    });
    MartingaleCheck c;
    c.n_paths = n_paths;
    c.estimate = stats::mean(v);
    c.std_error = std::sqrt(stats::variance(v) / static_cast<double>(n_paths));
    c.ci_low = c.estimate - kZ99 * c.std_error;
    c.ci_high = c.estimate + kZ99 * c.std_error;
    c.analytic = std::exp(0.5 * sigma * sigma * (t - s));
    c.pass = c.ci_low <= c.analytic && c.analytic <= c.ci_high;
    return c;
}

}  // namespace hbvsde
