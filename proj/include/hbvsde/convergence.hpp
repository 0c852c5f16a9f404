#pragma once

#include "hbvsde/parallel.hpp"
#include "hbvsde/random.hpp"
#include "hbvsde/sde.hpp"
#include "hbvsde/stats.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde {

enum class ReferenceKind { Analytic, FineGrid };

inline const char* to_string(ReferenceKind r) { return r == ReferenceKind::Analytic ? "analytic" : "fine-grid"; }

/**
 * @brief Where the "true" terminal value comes from.
 *
 * Analytic: exact(initial, T, W(T), out) gives the exact solution from the
 * terminal Brownian value. FineGrid: the same scheme on a grid `fine_factor`
 * times finer than the finest ladder level, on the same Brownian path.
 */
struct ConvergenceReference {
    ReferenceKind kind = ReferenceKind::FineGrid;
    std::function<void(std::span<const double>, double, std::span<const double>, std::span<double>)> exact;
    std::size_t fine_factor = 4;

    static ConvergenceReference analytic(decltype(exact) fn) { return {ReferenceKind::Analytic, std::move(fn), 1}; }
    static ConvergenceReference fine_grid(std::size_t factor = 4) { return {ReferenceKind::FineGrid, {}, factor}; }
};

/// Analytic reference for scalar GBM.
inline ConvergenceReference gbm_reference(const GbmSystem& g)
{
    return ConvergenceReference::analytic(
        [g](std::span<const double> x0, double t, std::span<const double> w, std::span<double> out) {
            out[0] = g.exact(x0[0], t, w[0]);
        });
}

struct ConvergenceReport {
    std::vector<std::size_t> steps;
    std::vector<double> dt_ladder;      ///< strictly decreasing
    std::vector<double> strong_errors;  ///< E|X_num(T) - X_ref(T)| (Euclidean norm for dim > 1)
    std::vector<double> error_std_errors;
    double fitted_order = 0.0;
    double fit_r_squared = 0.0;
    ReferenceKind reference = ReferenceKind::FineGrid;
    Scheme scheme = Scheme::EulerMaruyama;
    std::size_t n_paths = 0;
};

/**
 * @brief Strong error at T over the ladder base_steps * 2^l, l = 0..levels-1.
 *
 * Each path samples increments once at the finest resolution; every ladder
 * level integrates the coarsened increments, so all levels (and the
 * reference) see the same Brownian path. The order is the least-squares
 * slope of log(error) against log(dt).
 */
template <DiagonalSde S>
ConvergenceReport strong_convergence(const S& sys, std::span<const double> initial, double T, std::size_t base_steps,
                                     std::size_t levels, std::size_t n_paths, std::uint64_t master_seed,
                                     Scheme scheme, const ConvergenceReference& ref,
                                     std::size_t workers = default_worker_count())
{
    if (levels < 3)
        throw std::invalid_argument("strong_convergence: need at least 3 levels");
    if (base_steps == 0 || n_paths == 0 || !(T > 0.0))
        throw std::invalid_argument("strong_convergence: base_steps, n_paths and T must be positive");
    if (ref.kind == ReferenceKind::Analytic && !ref.exact)
        throw std::invalid_argument("strong_convergence: analytic reference without a solution");
    if (ref.kind == ReferenceKind::FineGrid && ref.fine_factor < 2)
        throw std::invalid_argument("strong_convergence: fine_factor must be >= 2");

    const std::size_t dim = sys.dim();
    const std::size_t finest = base_steps << (levels - 1);
    const std::size_t ref_steps = ref.kind == ReferenceKind::FineGrid ? finest * ref.fine_factor : finest;
    const SimGrid ref_grid(0.0, T, ref_steps);

    ConvergenceReport rep;
    rep.reference = ref.kind;
    rep.scheme = scheme;
    rep.n_paths = n_paths;
    for (std::size_t l = 0; l < levels; ++l) {
        rep.steps.push_back(base_steps << l);
        rep.dt_ladder.push_back(T / static_cast<double>(rep.steps.back()));
    }
    // The report lists the coarsest level first; dt must decrease along the ladder.
    std::vector<double> err(n_paths * levels);

    parallel_for(n_paths, workers, [&](std::size_t p) {
        auto stream = derive_stream({master_seed, p});
        const auto fine = sample_wiener_increments(ref_grid, stream, dim);
        std::vector<double> target(dim);
        if (ref.kind == ReferenceKind::Analytic) {
            std::vector<double> wT(dim);
            for (std::size_t d = 0; d < dim; ++d)
                wT[d] = stats::compensated_sum(fine.column(d));
            ref.exact(initial, T, wT, target);
        } else {
            const auto tr = integrate(sys, initial, ref_grid, fine, scheme);
            const auto last = tr.back();
            target.assign(last.begin(), last.end());
        }
        for (std::size_t l = 0; l < levels; ++l) {
            const std::size_t factor = ref_steps / rep.steps[l];
            const auto w = coarsen_increments(fine, factor);
            const SimGrid g(0.0, T, rep.steps[l]);
            const auto tr = integrate(sys, initial, g, w, scheme);
            const auto last = tr.back();
            double sq = 0.0;
            for (std::size_t d = 0; d < dim; ++d)
                sq += (last[d] - target[d]) * (last[d] - target[d]);
            err[p * levels + l] = std::sqrt(sq);
        }
    });

    std::vector<double> column(n_paths);
    std::vector<double> log_dt, log_err;
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t p = 0; p < n_paths; ++p)
            column[p] = err[p * levels + l];
        const double e = stats::mean(column);
        if (!(e > 0.0))
            throw std::runtime_error("strong_convergence: zero error at a ladder level; order undefined");
        rep.strong_errors.push_back(e);
        rep.error_std_errors.push_back(std::sqrt(stats::variance(column) / static_cast<double>(n_paths)));
        log_dt.push_back(std::log(rep.dt_ladder[l]));
        log_err.push_back(std::log(e));
    }
    const auto fit = stats::least_squares(log_dt, log_err);
    rep.fitted_order = fit.slope;
    rep.fit_r_squared = fit.r_squared;
    return rep;
}

}  // namespace hbvsde
