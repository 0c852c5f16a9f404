#pragma once

#include "hbvsde/ensemble.hpp"
#include "hbvsde/hbv.hpp"
#include "hbvsde/parallel.hpp"
#include "hbvsde/random.hpp"
#include "hbvsde/sde.hpp"
#include "hbvsde/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hbvsde {

struct CoupledPair {
    Trajectory full;  ///< (x, y, z)
    Trajectory x1;    ///< comparison process, driven by column 0 of the same increments
};

/// Integrates the full model and x1 on one shared W1 path (W2, W3 only drive the full model).
inline CoupledPair integrate_coupled(const HbvConfig& cfg, const SimGrid& grid, const IncrementMatrix& w,
                                     Scheme scheme, NegativityPolicy policy = NegativityPolicy::Raw)
{
    const auto vp = cfg.validate();
    const auto init = cfg.initial_vector();
    const std::array<std::size_t, 1> first{0};
    const auto w1 = w.select_columns(first);
    const std::array<double, 1> x1_init{cfg.initial.x};
    return {integrate(cfg.system(), init, grid, w, scheme, policy),
            integrate(x1_system(vp), x1_init, grid, w1, scheme, policy)};
}

/// Largest x(t_i) - x1(t_i) over the grid (positive values break the ordering x <= x1).
inline double max_excess(const CoupledPair& p)
{
    double m = -INFINITY;
    for (std::size_t k = 0; k < p.full.size(); ++k)
        m = std::max(m, p.full.value(k, 0) - p.x1.value(k, 0));
    return m;
}

struct CouplingHorizon {
    double horizon = 0.0;
    std::vector<double> diff;          ///< x(h) - x1(h) per path
    std::vector<double> tail_sup_abs;  ///< max |x - x1| over the last tail_fraction of [t0, h]
    double median_abs = 0.0;
    double q95_abs = 0.0;
    double fraction_above_delta = 0.0;
};

struct CouplingOptions {
    Scheme scheme = Scheme::EulerMaruyama;
    NegativityPolicy policy = NegativityPolicy::Raw;
    std::vector<double> horizons;  ///< empty means {t_end}
    double delta = 1e-3;
    double tail_fraction = 0.5;
};

struct CouplingResult {
    std::size_t n_paths = 0;
    double delta = 0.0;
    std::vector<CouplingHorizon> horizons;
    std::vector<double> max_excess;  ///< per path
    double max_excess_overall = 0.0;
};

inline CouplingResult coupling_experiment(const HbvConfig& cfg, const SimGrid& grid, std::size_t n_paths,
                                          std::uint64_t master_seed, const CouplingOptions& opt = {},
                                          std::size_t workers = default_worker_count())
{
    if (n_paths == 0)
        throw std::invalid_argument("coupling_experiment: n_paths must be >= 1");
    if (!(opt.tail_fraction > 0.0 && opt.tail_fraction <= 1.0))
        throw std::invalid_argument("coupling_experiment: tail_fraction must lie in (0, 1]");
    cfg.validate();
    std::vector<double> hs = opt.horizons.empty() ? std::vector<double>{grid.t_end()} : opt.horizons;

    CouplingResult r;
    r.n_paths = n_paths;
    r.delta = opt.delta;
    r.max_excess.assign(n_paths, 0.0);
    std::vector<std::size_t> end_idx, start_idx;
    for (double h : hs) {
        if (h <= grid.t0() || h > grid.t_end())
            throw std::invalid_argument("coupling_experiment: horizon outside the grid");
        CouplingHorizon ch;
        const std::size_t e = grid.nearest_index(h);
        ch.horizon = grid.time(e);
        ch.diff.assign(n_paths, 0.0);
        ch.tail_sup_abs.assign(n_paths, 0.0);
        end_idx.push_back(e);
        start_idx.push_back(grid.nearest_index(ch.horizon - opt.tail_fraction * (ch.horizon - grid.t0())));
        r.horizons.push_back(std::move(ch));
    }

    parallel_for(n_paths, workers, [&](std::size_t p) {
        auto stream = derive_stream({master_seed, p});
        const auto w = sample_wiener_increments(grid, stream, 3);
        CoupledPair pair = [&] {
            try {
                return integrate_coupled(cfg, grid, w, opt.scheme, opt.policy);
            } catch (const NonFiniteState& e) {
                throw e.with_path(p);
            }
        }();
        r.max_excess[p] = max_excess(pair);
        for (std::size_t h = 0; h < r.horizons.size(); ++h) {
            auto& ch = r.horizons[h];
            ch.diff[p] = pair.full.value(end_idx[h], 0) - pair.x1.value(end_idx[h], 0);
            double sup = 0.0;
            for (std::size_t k = start_idx[h]; k <= end_idx[h]; ++k)
                sup = std::max(sup, std::abs(pair.full.value(k, 0) - pair.x1.value(k, 0)));
            ch.tail_sup_abs[p] = sup;
        }
    });

    for (auto& ch : r.horizons) {
        std::vector<double> a(n_paths);
        std::size_t above = 0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            a[p] = std::abs(ch.diff[p]);
            above += a[p] > opt.delta ? 1 : 0;
        }
        ch.median_abs = stats::median(a);
        ch.q95_abs = stats::quantile(a, 0.95);
        ch.fraction_above_delta = static_cast<double>(above) / static_cast<double>(n_paths);
    }
    r.max_excess_overall = *std::max_element(r.max_excess.begin(), r.max_excess.end());
    return r;
}

}  // namespace hbvsde
