#pragma once

#include "hbvsde/core.hpp"
#include "hbvsde/hbv.hpp"
#include "hbvsde/parallel.hpp"
#include "hbvsde/random.hpp"
#include "hbvsde/sde.hpp"
#include "hbvsde/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde {

struct PathOptions {
    Scheme scheme = Scheme::EulerMaruyama;
    NegativityPolicy policy = NegativityPolicy::Raw;
    std::size_t stride = 1;
};

/// One path: increments from derive_stream({master_seed, path}), then integrate.
template <DiagonalSde S>
Trajectory simulate_path(const S& sys, std::span<const double> initial, const SimGrid& grid,
                         std::uint64_t master_seed, std::size_t path, const PathOptions& opt = {})
{
    auto stream = derive_stream({master_seed, path});
    const auto w = sample_wiener_increments(grid, stream, sys.dim());
    try {
        return integrate(sys, initial, grid, w, opt.scheme, opt.policy, opt.stride);
    } catch (const NonFiniteState& e) {
        throw e.with_path(path);
    }
}

struct ComponentStats {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> q05;
    std::vector<double> q50;
    std::vector<double> q95;
};

struct EnsembleStats {
    std::vector<double> sample_times;  ///< grid times actually sampled
    std::vector<ComponentStats> components;
    std::size_t n_paths = 0;
    std::vector<double> negativity_fraction;  ///< per component, share of paths with any negativity event
};

/// Evenly spaced sample times t0, t0 + (T-t0)/(count-1), ..., T.
inline std::vector<double> even_sample_times(const SimGrid& grid, std::size_t count)
{
    if (count < 2)
        return {grid.t_end()};
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k)
        t[k] = grid.time(grid.nearest_index(grid.t0() + (grid.t_end() - grid.t0()) * static_cast<double>(k) /
                                                             static_cast<double>(count - 1)));
    return t;
}

/**
 * @brief Monte Carlo statistics over paths 0..n_paths-1.
 *
 * Paths run on `workers` threads; statistics are folded in ascending path
 * order afterwards, so output does not depend on the worker count. Sample
 * times snap to the nearest grid point.
 */
template <DiagonalSde S>
EnsembleStats run_ensemble(const S& sys, std::span<const double> initial, const SimGrid& grid, std::size_t n_paths,
                           std::uint64_t master_seed, std::span<const double> sample_times, const PathOptions& opt = {},
                           std::size_t workers = default_worker_count())
{
    if (n_paths == 0)
        throw std::invalid_argument("run_ensemble: n_paths must be >= 1");
    if (sample_times.empty())
        throw std::invalid_argument("run_ensemble: no sample times");
    const std::size_t dim = sys.dim();
    std::vector<std::size_t> idx;
    EnsembleStats out;
    out.n_paths = n_paths;
    for (double t : sample_times) {
        const std::size_t i = grid.nearest_index(t);
        idx.push_back(i);
        out.sample_times.push_back(grid.time(i));
    }
    const std::size_t ns = idx.size();

    // values[(path * ns + sample) * dim + component]
    std::vector<double> values(n_paths * ns * dim);
    std::vector<unsigned char> negative(n_paths * dim, 0);
    PathOptions full = opt;
    full.stride = 1;

    parallel_for(n_paths, workers, [&](std::size_t p) {
        const auto traj = simulate_path(sys, initial, grid, master_seed, p, full);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t c = 0; c < dim; ++c)
                values[(p * ns + s) * dim + c] = traj.value(idx[s], c);
        for (const auto& e : traj.negativity_events())
            negative[p * dim + e.component] = 1;
    });

    out.components.resize(dim);
    std::vector<double> column(n_paths);
    for (std::size_t c = 0; c < dim; ++c) {
        auto& cs = out.components[c];
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t p = 0; p < n_paths; ++p)
                column[p] = values[(p * ns + s) * dim + c];
            cs.mean.push_back(stats::mean(column));
            cs.variance.push_back(stats::variance(column));
            cs.q05.push_back(stats::quantile(column, 0.05));
            cs.q50.push_back(stats::quantile(column, 0.50));
            cs.q95.push_back(stats::quantile(column, 0.95));
        }
        std::size_t neg = 0;
        for (std::size_t p = 0; p < n_paths; ++p)
            neg += negative[p * dim + c];
        out.negativity_fraction.push_back(static_cast<double>(neg) / static_cast<double>(n_paths));
    }
    return out;
}

inline EnsembleStats run_ensemble(const HbvConfig& cfg, const SimGrid& grid, Scheme scheme, std::size_t n_paths,
                                  std::uint64_t master_seed, std::span<const double> sample_times,
                                  NegativityPolicy policy = NegativityPolicy::Raw,
                                  std::size_t workers = default_worker_count())
{
    cfg.validate();
    const auto init = cfg.initial_vector();
    return run_ensemble(cfg.system(), init, grid, n_paths, master_seed, sample_times, PathOptions{scheme, policy, 1},
                        workers);
}

/// Trapezoid time average (1/(T - t0)) * integral of one component.
inline double time_average(const Trajectory& traj, std::size_t component)
{
    if (traj.size() == 0 || component >= traj.dim())
        throw std::invalid_argument("time_average: empty trajectory or bad component");
    if (traj.size() == 1)
        return traj.value(0, component);
    // Integrating the offset from the first value keeps constant paths exact.
    const auto t = traj.times();
    auto v = traj.component(component);
    const double base = v.front();
    for (auto& x : v)
        x -= base;
    return base + stats::trapezoid(t, v) / (t.back() - t.front());
}

/// Empirical density of one component after discarding the first `burn_in` fraction of the path.
inline stats::Histogram stationary_histogram(const Trajectory& traj, std::size_t component, double burn_in,
                                             std::size_t bins, double lo, double hi)
{
    if (!(burn_in >= 0.0 && burn_in < 1.0))
        throw std::invalid_argument("stationary_histogram: burn_in must lie in [0, 1)");
    const auto first = static_cast<std::size_t>(burn_in * static_cast<double>(traj.size()));
    std::vector<double> v;
    v.reserve(traj.size() - first);
    for (std::size_t k = first; k < traj.size(); ++k)
        v.push_back(traj.value(k, component));
    return stats::histogram(v, lo, hi, bins);
}

}  // namespace hbvsde
