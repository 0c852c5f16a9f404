// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failing criteria (0 when all pass).

#include "hbvsde/hbvsde.hpp"
#include "hbvsde_cli/commands.hpp"

#include <json.hpp>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hbvsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1 -------------------------------------------------------------------------
Outcome convergence_orders()
{
    const auto t0 = std::chrono::steady_clock::now();
    const GbmSystem g{0.05, 0.4};
    const std::vector<double> x0{1.0};
    const auto em = strong_convergence(g, x0, 1.0, 16, 7, 2000, 42, Scheme::EulerMaruyama, gbm_reference(g));
    const auto mil = strong_convergence(g, x0, 1.0, 16, 7, 2000, 42, Scheme::Milstein, gbm_reference(g));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ladder = em.dt_ladder.front() == 0x1p-4 && em.dt_ladder.back() == 0x1p-10;
    const bool pass = ladder && em.fitted_order >= 0.35 && em.fitted_order <= 0.65 && mil.fitted_order >= 0.8 &&
                      mil.fitted_order <= 1.2 && secs < 60.0;
    return {pass, fmt("EM order %.4f in [0.35, 0.65], Milstein order %.4f in [0.8, 1.2], dt 2^-4..2^-10, 2000 paths, "
                      "%.2f s",
                      em.fitted_order, mil.fitted_order, secs)};
}

// 2 -------------------------------------------------------------------------
Outcome x1_mean()
{
    const auto vp = validate_params(ModelParams::reference(), NoiseParams::reference());
    const auto sys = x1_system(vp);
    const double x1_0 = 1.0;
    const double T = 2.0;
    const std::size_t n = 10'000;
    const auto grid = SimGrid::from_step(0.0, T, 1e-3);
    const std::vector<double> init{x1_0}, times{T};
    const auto st = run_ensemble(sys, init, grid, n, 42, times);
    const double mean = st.components[0].mean[0];
    const double se = std::sqrt(st.components[0].variance[0] / static_cast<double>(n));
    const double exact = x1_exact_mean(T, x1_0, vp.model());
    const double limit = vp.model().lambda / vp.model().mu1;
    const bool pass = std::abs(mean - exact) <= 3.0 * se && limit == 5.0;
    return {pass, fmt("mean %.6f vs closed form %.6f, |diff| %.3g <= 3 SE = %.3g; lambda/mu1 = %.17g", mean, exact,
                      std::abs(mean - exact), 3.0 * se, limit)};
}

// 3 -------------------------------------------------------------------------
Outcome exponential_martingale()
{
    const auto c = exp_martingale_check(0.5, 1.0, 0.0, 1'000'000, 42);
    return {c.pass, fmt("estimate %.6f, 99%% CI [%.6f, %.6f], exp(0.125) = %.6f", c.estimate, c.ci_low, c.ci_high,
                        c.analytic)};
}

// 4 -------------------------------------------------------------------------
Outcome x1_time_average()
{
    const auto vp = validate_params(ModelParams::reference(), NoiseParams::reference());
    const auto grid = SimGrid::from_step(0.0, 50.0, 1e-3);
    const std::vector<double> init{vp.model().lambda / vp.model().mu1};
    const auto tr = simulate_path(x1_system(vp), init, grid, 42, 0);
    const double avg = time_average(tr, 0);
    const double rel = std::abs(avg - 5.0) / 5.0;
    return {rel <= 0.05, fmt("time average %.5f, relative deviation from 5 is %.4f (limit 0.05)", avg, rel)};
}

// 5 -------------------------------------------------------------------------
Outcome desk_arithmetic()
{
    const auto vp = validate_params(ModelParams::reference(), NoiseParams::reference());
    const auto st = check_stability(vp);
    const auto er = check_ergodicity(vp);
    const auto eq = equilibria(vp);
    const auto& n = vp.noise();
    const StateVec& e = eq.endemic ? *eq.endemic : eq.infection_free;
    const double omega = n.sigma1 * n.sigma1 * e.x + n.sigma2 * n.sigma2 * e.y + n.sigma3 * n.sigma3 * e.z * e.z;
    const bool pass = std::abs(st.cond_a_value + 8.22) <= 1e-12 && std::abs(er.k1 - 14.75) <= 1e-12 &&
                      std::abs(er.k2 - 0.44) <= 1e-12 && std::abs(er.k3 - 5.56) <= 1e-12 && er.omega == omega &&
                      er.equilibrium == e;
    return {pass, fmt("cond_a %.15g, k = (%.15g, %.15g, %.15g), omega %.15g at the %s equilibrium", st.cond_a_value,
                      er.k1, er.k2, er.k3, er.omega, to_string(er.equilibrium_kind))};
}

// 6 -------------------------------------------------------------------------
Outcome zero_noise_reduction()
{
    const HbvSystem quiet{ModelParams::reference(), NoiseParams::none()};
    const auto grid = SimGrid::from_step(0.0, 5.0, 1e-3);
    const std::vector<double> x0{5.0, 1.0, 1.0};
    auto s = derive_stream({42, 0});
    const auto w = sample_wiener_increments(grid, s, 3);
    const auto em = integrate(quiet, x0, grid, w, Scheme::EulerMaruyama);
    const auto mil = integrate(quiet, x0, grid, w, Scheme::Milstein);
    const auto eu = integrate_ode(quiet, x0, grid, Scheme::Euler);
    std::size_t mismatches = 0;
    for (std::size_t k = 0; k < em.size(); ++k)
        for (std::size_t c = 0; c < 3; ++c)
            mismatches += (em.value(k, c) != eu.value(k, c) || mil.value(k, c) != eu.value(k, c)) ? 1 : 0;

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> pos(0.01, 20.0), sig(0.0, 2.0), inc(-0.5, 0.5), step(1e-5, 0.1);
    double worst = 0.0;
    for (int trial = 0; trial < 10'000; ++trial) {
        const NoiseParams np{sig(rng), sig(rng), sig(rng)};
        const HbvSystem sys{ModelParams::reference(), np};
        const std::vector<double> u{pos(rng), pos(rng), pos(rng)};
        const std::vector<double> dw{inc(rng), inc(rng), inc(rng)};
        const double dt = step(rng);
        const auto a = em_step(u, 0.0, dt, dw, sys);
        const auto b = milstein_step(u, 0.0, dt, dw, sys);
        const double sg[3] = {np.sigma1, np.sigma2, np.sigma3};
        for (int i = 0; i < 3; ++i) {
            const double corr = 0.5 * sg[i] * sg[i] * u[i] * (dw[i] * dw[i] - dt);
            worst = std::max(worst, std::abs((b[i] - a[i]) - corr) / std::max(std::abs(b[i]), 1.0));
        }
    }
    return {mismatches == 0 && worst <= 1e-12,
            fmt("%zu mismatching values over %zu grid points; worst relative Milstein-EM correction error %.3g over "
                "10000 random steps",
                mismatches, em.size(), worst)};
}

// 7 -------------------------------------------------------------------------
Outcome lyapunov_decay()
{
    const HbvConfig cfg;
    const auto vp = cfg.validate();
    const auto rep = check_stability(vp);
    const auto grid = SimGrid::from_step(0.0, 10.0, 1e-3);
    const auto init = cfg.initial_vector();
    const std::size_t n = 64;
    std::vector<double> slopes(n, NAN);
    parallel_for(n, default_worker_count(), [&](std::size_t p) {
        const auto tr = simulate_path(cfg.system(), init, grid, 42, p);
        slopes[p] = estimate_lyapunov(tr, 0.5, &rep).slope;
    });
    std::size_t negative = 0;
    for (double s : slopes)
        negative += s < 0.0 ? 1 : 0;
    const double frac = static_cast<double>(negative) / static_cast<double>(n);

    std::vector<double> t(1001), v(1001);
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = 0.01 * static_cast<double>(k);
        v[k] = 2.0 * std::exp(-3.0 * t[k]);
    }
    const double synth = estimate_decay_rate(t, v).slope;
    const bool died_out = !equilibria(vp).endemic.has_value();
    const bool pass = rep.cond_a_holds && died_out && frac >= 0.95 && std::abs(synth + 3.0) <= 1e-6;
    return {pass, fmt("condition (a) %s, %zu/%zu paths with negative slope (median %.4f), synthetic rate %.10f",
                      rep.cond_a_holds ? "holds" : "fails", negative, n, stats::median(slopes), synth)};
}

// 8 -------------------------------------------------------------------------
Outcome coupling()
{
    HbvConfig free_cfg;
    free_cfg.initial = {5.0, 0.0, 0.0};
    const auto short_grid = SimGrid::from_step(0.0, 5.0, 1e-3);
    std::size_t mismatches = 0;
    for (std::size_t p = 0; p < 16; ++p) {
        auto s = derive_stream({42, p});
        const auto w = sample_wiener_increments(short_grid, s, 3);
        for (auto scheme : {Scheme::EulerMaruyama, Scheme::Milstein}) {
            const auto pair = integrate_coupled(free_cfg, short_grid, w, scheme);
            for (std::size_t k = 0; k < pair.full.size(); ++k)
                mismatches += pair.full.value(k, 0) != pair.x1.value(k, 0) ? 1 : 0;
        }
    }

    // Below threshold but slowly decaying (dominant rate about -1.4), so x - x1 at T = 5 is still resolvable.
    HbvConfig slow;
    slow.params.beta = 15.0;
    const auto grid = SimGrid::from_step(0.0, 20.0, 1e-3);
    CouplingOptions opt;
    opt.horizons = {5.0, 20.0};
    const auto r = coupling_experiment(slow, grid, 256, 42, opt);
    const double m5 = r.horizons[0].median_abs;
    const double m20 = r.horizons[1].median_abs;

    const auto ref = coupling_experiment(HbvConfig{}, grid, 256, 42, opt);
    return {mismatches == 0 && m20 < m5,
            fmt("y0 = z0 = 0: %zu mismatches; beta = 15 (r0 %.3f): median |x - x1| %.3g at T=5, %.3g at T=20 "
                "(reference parameters, already decayed by T=5: %.3g and %.3g)",
                mismatches, basic_reproduction_number(slow.params), m5, m20, ref.horizons[0].median_abs,
                ref.horizons[1].median_abs)};
}

// 9 -------------------------------------------------------------------------
std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        std::string bytes = slurp(e.path());
        if (name == "manifest.json") {
            auto j = nlohmann::json::parse(bytes);
            j.erase("duration_seconds");
            bytes = j.dump();
        }
        out[name] = std::move(bytes);
    }
    return out;
}

Outcome determinism()
{
    const auto root = fs::temp_directory_path() / ("hbvsde_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::vector<std::vector<std::string>> commands{
        {"simulate", "--paths", "4"},
        {"compare", "--paths", "32", "--stride", "10"},
        {"stability", "--gamma", "trajectory"},
        {"ergodic", "--paths", "4"},
        {"convergence", "--paths", "200"},
        {"lyapunov", "--paths", "16", "--t-end", "10"},
        {"couple", "--paths", "16", "--horizons", "1,5"},
        {"ensemble", "--paths", "64", "--samples", "51"},
    };
    std::size_t compared = 0, files = 0;
    std::string failed;
    std::fflush(stdout);
    // The stability and ergodic subcommands print tables; keep them out of the criterion report.
    const int saved = ::dup(STDOUT_FILENO);
    std::FILE* sink = std::fopen("/dev/null", "w");
    ::dup2(::fileno(sink), STDOUT_FILENO);
    for (const auto& cmd : commands) {
        std::map<std::string, std::string> first;
        for (int threads : {1, 2, 8}) {
            ::setenv(kThreadsEnv, std::to_string(threads).c_str(), 1);
            const auto dir = root / cmd[0] / std::to_string(threads);
            std::vector<std::string> args{"hbvsde-cli"};
            args.insert(args.end(), cmd.begin(), cmd.end());
            args.insert(args.end(), {"--seed", "42", "--out", dir.string()});
            if (cli::run(args) != 0) {
                failed += cmd[0] + " exited nonzero; ";
                continue;
            }
            auto snap = snapshot(dir);
            if (threads == 1) {
                first = std::move(snap);
                files += first.size();
            } else {
                ++compared;
                if (snap != first)
                    failed += cmd[0] + " differs at " + std::to_string(threads) + " threads; ";
            }
        }
    }
    std::fflush(stdout);
    ::dup2(saved, STDOUT_FILENO);
    ::close(saved);
    std::fclose(sink);
    ::unsetenv(kThreadsEnv);
    fs::remove_all(root);
    return {failed.empty(),
            failed.empty() ? fmt("%zu commands, %zu output files, byte-identical across 1, 2 and 8 threads "
                                 "(manifest compared without its wall-clock field)",
                                 commands.size(), files)
                           : failed};
}

// 10 ------------------------------------------------------------------------
Outcome log_barrier()
{
    double min_gap = INFINITY, argmin = 0.0;
    bool holds = true;
    for (int i = 0; i <= 2000; ++i) {
        const double v = std::pow(10.0, -6.0 + 12.0 * i / 2000.0);
        const double gap = log_barrier_gap(v);
        holds = holds && gap >= -1e-12;
        if (gap < min_gap) {
            min_gap = gap;
            argmin = v;
        }
    }
    const double at_two = log_barrier_gap(2.0);
    return {holds && std::abs(at_two) <= 1e-12,
            fmt("inequality holds on 2001 log-spaced points in [1e-6, 1e6]; smallest grid gap %.3g at v = %.4g; "
                "gap at v = 2 is %.3g",
                min_gap, argmin, at_two)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"strong convergence orders", convergence_orders},
        {"x1 ensemble mean", x1_mean},
        {"exponential martingale identity", exponential_martingale},
        {"x1 time average", x1_time_average},
        {"condition arithmetic", desk_arithmetic},
        {"zero-noise reduction", zero_noise_reduction},
        {"Lyapunov decay", lyapunov_decay},
        {"coupling", coupling},
        {"determinism across threads", determinism},
        {"log-barrier inequality", log_barrier},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %2zu %-32s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
