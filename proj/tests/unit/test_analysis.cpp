#include "hbvsde/coupling.hpp"
#include "hbvsde/ensemble.hpp"
#include "hbvsde/lyapunov.hpp"
#include "hbvsde/martingale.hpp"
#include "hbvsde/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>

using namespace hbvsde;

namespace {

void expect_same(const EnsembleStats& a, const EnsembleStats& b)
{
    ASSERT_EQ(a.sample_times, b.sample_times);
    ASSERT_EQ(a.components.size(), b.components.size());
    for (std::size_t c = 0; c < a.components.size(); ++c) {
        EXPECT_EQ(a.components[c].mean, b.components[c].mean);
        EXPECT_EQ(a.components[c].variance, b.components[c].variance);
        EXPECT_EQ(a.components[c].q05, b.components[c].q05);
        EXPECT_EQ(a.components[c].q50, b.components[c].q50);
        EXPECT_EQ(a.components[c].q95, b.components[c].q95);
    }
    EXPECT_EQ(a.negativity_fraction, b.negativity_fraction);
}

Trajectory from_values(const SimGrid& g, const std::vector<std::array<double, 3>>& rows)
{
    Trajectory tr(g, 3, Scheme::EulerMaruyama, 1);
    for (const auto& r : rows)
        tr.push(r);
    return tr;
}

}  // namespace

TEST(DecayRate, SyntheticExponential)
{
    std::vector<double> t(1001), s(1001);
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = 0.01 * k;
        s[k] = 2.0 * std::exp(-3.0 * t[k]);
    }
    const auto e = estimate_decay_rate(t, s);
    EXPECT_NEAR(e.slope, -3.0, 1e-6);
    EXPECT_NEAR(e.r_squared, 1.0, 1e-12);
    EXPECT_TRUE(e.claim_supported);
    EXPECT_EQ(e.points_used, 501u);
}

TEST(DecayRate, RecoversRateOfAnyScaledExponential)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> scale(1e-3, 1e3), rate(-10.0, 10.0);
    std::vector<double> t(200), s(200);
    for (int trial = 0; trial < 100; ++trial) {
        const double C = scale(rng), r = rate(rng);
        for (std::size_t k = 0; k < t.size(); ++k) {
            t[k] = 0.005 * k;
            s[k] = C * std::exp(r * t[k]);
        }
        EXPECT_NEAR(estimate_decay_rate(t, s, 0.8).slope, r, 1e-8);
    }
}

TEST(DecayRate, DegenerateTailAndArguments)
{
    const std::vector<double> t{0.0, 1.0, 2.0, 3.0}, zero(4, 0.0), s{1.0, 0.5, 0.25, 0.125};
    EXPECT_THROW(estimate_decay_rate(t, zero), DegenerateTail);
    EXPECT_THROW(estimate_decay_rate(t, s, 0.0), std::invalid_argument);
    EXPECT_THROW(estimate_decay_rate(t, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(DecayRate, LowFitQualityDoesNotSupportClaim)
{
    std::vector<double> t(100), s(100);
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = k;
        s[k] = k % 2 == 0 ? 1.0 : 100.0;
    }
    const auto e = estimate_decay_rate(t, s);
    EXPECT_LT(e.r_squared, kLyapunovMinRSquared);
    EXPECT_FALSE(e.claim_supported);
}

TEST(Lyapunov, HbvPathDecaysAndCarriesBound)
{
    const HbvConfig cfg;
    const auto grid = SimGrid::from_step(0.0, 10.0, 1e-3);
    const auto init = cfg.initial_vector();
    const auto tr = simulate_path(cfg.system(), init, grid, 42, 0);
    const auto rep = check_stability(cfg.validate());
    const auto e = estimate_lyapunov(tr, 0.5, &rep);
    EXPECT_LT(e.slope, 0.0);
    ASSERT_TRUE(e.bound.has_value());
    EXPECT_EQ(*e.bound, -0.5 * std::abs(rep.lambda_max));
}

TEST(Ensemble, WorkerCountDoesNotChangeResults)
{
    const HbvConfig cfg;
    const auto grid = SimGrid::from_step(0.0, 1.0, 1e-3);
    const auto times = even_sample_times(grid, 11);
    for (auto scheme : {Scheme::EulerMaruyama, Scheme::Milstein}) {
        const auto one = run_ensemble(cfg, grid, scheme, 64, 42, times, NegativityPolicy::Raw, 1);
        const auto two = run_ensemble(cfg, grid, scheme, 64, 42, times, NegativityPolicy::Raw, 2);
        const auto eight = run_ensemble(cfg, grid, scheme, 64, 42, times, NegativityPolicy::Raw, 8);
        expect_same(one, two);
        expect_same(one, eight);
    }
}

TEST(Ensemble, SinglePathStatisticsAreThePath)
{
    const HbvConfig cfg;
    const auto grid = SimGrid::from_step(0.0, 1.0, 1e-3);
    const auto times = even_sample_times(grid, 6);
    const auto st = run_ensemble(cfg, grid, Scheme::EulerMaruyama, 1, 42, times);
    const auto init = cfg.initial_vector();
    const auto tr = simulate_path(cfg.system(), init, grid, 42, 0);
    for (std::size_t s = 0; s < times.size(); ++s)
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = tr.value(grid.nearest_index(times[s]), c);
            EXPECT_EQ(st.components[c].mean[s], v);
            EXPECT_EQ(st.components[c].variance[s], 0.0);
            EXPECT_EQ(st.components[c].q05[s], v);
            EXPECT_EQ(st.components[c].q95[s], v);
        }
}

TEST(Ensemble, ZeroNoiseGivesDeterministicPath)
{
    HbvConfig cfg;
    cfg.noise = NoiseParams::none();
    const auto grid = SimGrid::from_step(0.0, 2.0, 1e-3);
    const auto times = even_sample_times(grid, 5);
    const auto st = run_ensemble(cfg, grid, Scheme::EulerMaruyama, 20, 42, times);
    const auto init = cfg.initial_vector();
    const auto ode = integrate_ode(cfg.system(), init, grid, Scheme::Euler);
    for (std::size_t s = 0; s < times.size(); ++s)
        for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_EQ(st.components[c].mean[s], ode.value(grid.nearest_index(times[s]), c));
            EXPECT_EQ(st.components[c].variance[s], 0.0);
        }
}

TEST(Ensemble, X1MeanMatchesExactMean)
{
    const X1System x1{100.0, 20.0, 0.5};
    const auto grid = SimGrid::from_step(0.0, 0.1, 1e-4);
    const std::vector<double> init{1.0}, times{0.1};
    const std::size_t n = 4000;
    const auto st = run_ensemble(x1, init, grid, n, 42, times);
    const double exact = x1_exact_mean(0.1, 1.0, ModelParams::reference());
    const double se = std::sqrt(st.components[0].variance[0] / n);
    EXPECT_LT(std::abs(st.components[0].mean[0] - exact), 3.0 * se) << st.components[0].mean[0] << " vs " << exact;
}

TEST(Ensemble, RejectsEmptyRequests)
{
    const HbvConfig cfg;
    const auto grid = SimGrid::from_step(0.0, 1.0, 1e-2);
    const std::vector<double> times{1.0}, none;
    EXPECT_THROW(run_ensemble(cfg, grid, Scheme::EulerMaruyama, 0, 1, times), std::invalid_argument);
    EXPECT_THROW(run_ensemble(cfg, grid, Scheme::EulerMaruyama, 1, 1, none), std::invalid_argument);
}

TEST(Ensemble, SampleTimesSnapToGrid)
{
    const SimGrid g(0.0, 1.0, 10);
    const auto t = even_sample_times(g, 3);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0], 0.0);
    EXPECT_EQ(t[1], 0.5);
    EXPECT_EQ(t[2], 1.0);
}

TEST(TimeAverage, ConstantAndRamp)
{
    const SimGrid g(0.0, 1.0, 100);
    std::vector<std::array<double, 3>> constant(101, {3.0, 2.0, 1.0}), ramp(101);
    for (std::size_t k = 0; k <= 100; ++k)
        ramp[k] = {g.time(k), 0.0, 0.0};
    const auto c = from_values(g, constant);
    EXPECT_EQ(time_average(c, 0), 3.0);
    EXPECT_EQ(time_average(c, 2), 1.0);
    EXPECT_NEAR(time_average(from_values(g, ramp), 0), 0.5, 1e-15);
    EXPECT_THROW(time_average(c, 3), std::invalid_argument);
}

TEST(TimeAverage, X1LongRunAverageNearLambdaOverMu1)
{
    const X1System x1{100.0, 20.0, 0.5};
    const auto grid = SimGrid::from_step(0.0, 50.0, 1e-3);
    const std::vector<double> init{1.0};
    const auto tr = simulate_path(x1, init, grid, 42, 0);
    EXPECT_NEAR(time_average(tr, 0), 5.0, 0.25);
}

TEST(TimeAverage, StableUnderGridRefinement)
{
    HbvConfig cfg;
    cfg.noise = NoiseParams::none();
    const auto init = cfg.initial_vector();
    const auto coarse = integrate_ode(cfg.system(), init, SimGrid::from_step(0.0, 2.0, 1e-3));
    const auto fine = integrate_ode(cfg.system(), init, SimGrid::from_step(0.0, 2.0, 5e-4));
    for (std::size_t c = 0; c < 3; ++c)
        EXPECT_NEAR(time_average(coarse, c), time_average(fine, c), 1e-6 * std::max(1.0, time_average(fine, c)));
}

TEST(StationaryHistogram, DensityIntegratesToInRangeFraction)
{
    const X1System x1{100.0, 20.0, 0.5};
    const auto grid = SimGrid::from_step(0.0, 20.0, 1e-3);
    const std::vector<double> init{5.0};
    const auto tr = simulate_path(x1, init, grid, 3, 0);
    const auto h = stationary_histogram(tr, 0, 0.25, 40, 0.0, 20.0);
    double integral = 0.0;
    for (double d : h.density)
        integral += d * h.bin_width();
    const double used = static_cast<double>(tr.size() - static_cast<std::size_t>(0.25 * tr.size()));
    EXPECT_NEAR(integral, 1.0 - static_cast<double>(h.below + h.above) / used, 1e-12);
    EXPECT_THROW(stationary_histogram(tr, 0, 1.0, 10, 0.0, 1.0), std::invalid_argument);
}

TEST(Martingale, ZeroSigmaIsExactlyOne)
{
    const auto c = exp_martingale_check(0.0, 1.0, 0.0, 100, 42, 1);
    EXPECT_EQ(c.estimate, 1.0);
    EXPECT_EQ(c.std_error, 0.0);
    EXPECT_EQ(c.analytic, 1.0);
    EXPECT_TRUE(c.pass);
}

TEST(Martingale, EqualTimesGiveOne)
{
    const auto c = exp_martingale_check(0.5, 2.0, 2.0, 100, 42, 1);
    EXPECT_EQ(c.estimate, 1.0);
    EXPECT_TRUE(c.pass);
    EXPECT_THROW(exp_martingale_check(0.5, 1.0, 2.0, 100, 42, 1), std::invalid_argument);
}

TEST(Martingale, MillionPathEstimateCoversAnalyticValue)
{
    const auto c = exp_martingale_check(0.5, 1.0, 0.0, 1'000'000, 42);
    EXPECT_NEAR(c.analytic, std::exp(0.125), 1e-15);
    EXPECT_TRUE(c.pass) << c.estimate << " +- " << c.std_error;
}

TEST(CouplingExperiment, NoInfectionMeansZeroDifference)
{
    HbvConfig cfg;
    cfg.initial = {5.0, 0.0, 0.0};
    const auto grid = SimGrid::from_step(0.0, 2.0, 1e-3);
    CouplingOptions opt;
    opt.horizons = {1.0, 2.0};
    const auto r = coupling_experiment(cfg, grid, 16, 42, opt);
    ASSERT_EQ(r.horizons.size(), 2u);
    for (const auto& h : r.horizons) {
        for (double d : h.diff)
            EXPECT_EQ(d, 0.0);
        EXPECT_EQ(h.fraction_above_delta, 0.0);
        EXPECT_EQ(h.q95_abs, 0.0);
    }
    EXPECT_EQ(r.max_excess_overall, 0.0);
}

TEST(CouplingExperiment, DifferenceShrinksWithHorizon)
{
    const HbvConfig cfg;
    const auto grid = SimGrid::from_step(0.0, 5.0, 1e-3);
    CouplingOptions opt;
    opt.horizons = {0.5, 5.0};
    const auto r = coupling_experiment(cfg, grid, 32, 42, opt);
    EXPECT_EQ(r.horizons[0].horizon, 0.5);
    EXPECT_LT(r.horizons[1].median_abs, r.horizons[0].median_abs);
    EXPECT_LT(r.horizons[1].q95_abs, 1e-3);
    opt.horizons = {6.0};
    EXPECT_THROW(coupling_experiment(cfg, grid, 4, 42, opt), std::invalid_argument);
}

TEST(ParallelFor, LowestFailingIndexWins)
{
    for (std::size_t workers : {1u, 2u, 4u, 8u}) {
        try {
            parallel_for(100, workers, [](std::size_t i) {
                if (i == 7 || i == 3 || i == 90)
                    throw std::runtime_error(std::to_string(i));
            });
            FAIL();
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "3") << workers;
        }
    }
}

TEST(ParallelFor, VisitsEveryIndexOnce)
{
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits)
        EXPECT_EQ(h, 1);
}

TEST(ParallelFor, WorkerCountFromEnvironment)
{
    ::setenv(kThreadsEnv, "3", 1);
    EXPECT_EQ(default_worker_count(), 3u);
    ::setenv(kThreadsEnv, "zero", 1);
    EXPECT_GE(default_worker_count(), 1u);
    ::unsetenv(kThreadsEnv);
}

TEST(Ensemble, PathFailureNamesPath)
{
    const GbmSystem g{std::numeric_limits<double>::max(), 0.0};
    const auto grid = SimGrid::from_step(0.0, 1.0, 0.1);
    const std::vector<double> init{1e300}, times{1.0};
    try {
        run_ensemble(g, init, grid, 4, 1, times, {}, 2);
        FAIL();
    } catch (const NonFiniteState& e) {
        EXPECT_TRUE(e.has_path());
        EXPECT_EQ(e.path(), 0u);
    }
}
