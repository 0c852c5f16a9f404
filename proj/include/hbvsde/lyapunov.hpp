#pragma once

#include "hbvsde/sde.hpp"
#include "hbvsde/stability.hpp"
#include "hbvsde/stats.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde {

class DegenerateTail : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minimum r^2 for an estimate to back a decay claim.
inline constexpr double kLyapunovMinRSquared = 0.8;

struct LyapunovEstimate {
    double slope = 0.0;  ///< fitted d/dt ln(y + z)
    double intercept = 0.0;
    double tail_fraction = 0.5;
    double r_squared = 0.0;
    std::size_t points_used = 0;
    bool claim_supported = false;  ///< r^2 >= kLyapunovMinRSquared
    std::optional<double> bound;   ///< -|lambda_max|/2 when a stability report is supplied
};

/**
 * @brief OLS slope of ln(s(t)) over the final `tail_fraction` of the time span.
 *
 * Points with s <= 0 are skipped; fewer than two usable points is a DegenerateTail.
 */
inline LyapunovEstimate estimate_decay_rate(std::span<const double> t, std::span<const double> s,
                                            double tail_fraction = 0.5)
{
    if (t.size() != s.size() || t.empty())
        throw std::invalid_argument("estimate_decay_rate: times and values must be non-empty and paired");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw std::invalid_argument("estimate_decay_rate: tail_fraction must lie in (0, 1]");
    const double start = t.back() - tail_fraction * (t.back() - t.front());
    std::vector<double> tx, ly;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < start || !(s[k] > 0.0) || !std::isfinite(s[k]))
            continue;
        tx.push_back(t[k]);
        ly.push_back(std::log(s[k]));
    }
    if (tx.size() < 2)
        throw DegenerateTail("estimate_decay_rate: fewer than two positive points in the fitted tail");
    const auto fit = stats::least_squares(tx, ly);
    LyapunovEstimate e;
    e.slope = fit.slope;
    e.intercept = fit.intercept;
    e.tail_fraction = tail_fraction;
    e.r_squared = fit.r_squared;
    e.points_used = tx.size();
    e.claim_supported = fit.r_squared >= kLyapunovMinRSquared;
    return e;
}

/// Decay rate of y + z along an HBV trajectory.
inline LyapunovEstimate estimate_lyapunov(const Trajectory& traj, double tail_fraction = 0.5,
                                          const StabilityReport* report = nullptr)
{
    if (traj.dim() != 3)
        throw std::invalid_argument("estimate_lyapunov: need a three-component trajectory");
    std::vector<double> s(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k)
        s[k] = traj.value(k, 1) + traj.value(k, 2);
    auto e = estimate_decay_rate(traj.times(), s, tail_fraction);
    if (report)
        e.bound = -0.5 * std::abs(report->lambda_max);
    return e;
}

}  // namespace hbvsde
