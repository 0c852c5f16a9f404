#include "hbvsde_cli/commands.hpp"

#include "hbvsde_cli/config.hpp"
#include "hbvsde_cli/output.hpp"

#include "hbvsde/hbvsde.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef HBVSDE_VERSION
#define HBVSDE_VERSION "unknown"
#endif

namespace hbvsde::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::array<const char*, 3> kComp{"x", "y", "z"};

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scheme;
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<std::string> out;
    std::optional<std::string> policy;
    std::optional<std::string> gamma;
    std::optional<std::size_t> stride;
    std::optional<std::size_t> samples;
    std::optional<std::string> horizons;
    std::optional<std::string> preset;
    std::optional<std::string> input;
};

RunConfig resolve(const Overrides& o)
{
    RunConfig c = o.config.empty() ? RunConfig{} : load_config_file(o.config);
    // Flags are applied through the config grammar so they get identical validation.
    std::string extra;
    auto set = [&](const char* section, const char* key, const std::string& v) {
        extra += std::string("[") + section + "]\n" + key + " = " + v + "\n";
    };
    if (o.seed)
        set("run", "seed", std::to_string(*o.seed));
    if (o.scheme)
        set("run", "scheme", *o.scheme);
    if (o.paths)
        set("run", "paths", std::to_string(*o.paths));
    if (o.policy)
        set("run", "policy", *o.policy);
    if (o.stride)
        set("run", "stride", std::to_string(*o.stride));
    if (o.dt)
        set("grid", "dt", fmt17(*o.dt));
    if (o.t_end)
        set("grid", "t_end", fmt17(*o.t_end));
    if (o.gamma)
        set("analysis", "gamma", *o.gamma);
    if (o.samples)
        set("analysis", "samples", std::to_string(*o.samples));
    if (o.horizons)
        set("analysis", "horizons", *o.horizons);
    if (o.preset)
        set("analysis", "preset", *o.preset);
    // Each override is its own section block, so duplicate detection does not trip.
    std::istringstream blocks(extra);
    std::string header, kv;
    while (std::getline(blocks, header) && std::getline(blocks, kv))
        c = parse_ini(header + "\n" + kv + "\n", c);
    if (o.out)
        c.out = *o.out;
    if (o.input)
        c.input = *o.input;

    if (c.paths == 0)
        throw ConfigError("paths must be >= 1");
    if (c.stride == 0)
        throw ConfigError("stride must be >= 1");
    if (!(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0))
        throw ConfigError("tail_fraction must lie in (0, 1]");
    if (c.gamma && !(*c.gamma > 0.0))
        throw ConfigError("gamma must be positive");
    c.hbv().validate();
    const auto g = c.grid();
    if (g.n_steps() % c.stride != 0)
        throw ConfigError("stride " + std::to_string(c.stride) + " does not divide the " +
                          std::to_string(g.n_steps()) + " grid steps");
    return c;
}

Json config_json(const RunConfig& c)
{
    Json j;
    j["model"] = {{"lambda", c.model.lambda}, {"mu1", c.model.mu1},         {"mu2", c.model.mu2},
                  {"mu3", c.model.mu3},       {"beta", c.model.beta},       {"eta", c.model.eta},
                  {"epsilon", c.model.epsilon}, {"p", c.model.p},           {"q", c.model.q}};
    j["noise"] = {{"sigma1", c.noise.sigma1}, {"sigma2", c.noise.sigma2}, {"sigma3", c.noise.sigma3}};
    j["initial"] = {{"x", c.initial.x}, {"y", c.initial.y}, {"z", c.initial.z}};
    j["grid"] = {{"t0", c.t0}, {"t_end", c.t_end}, {"dt", c.dt}};
    j["run"] = {{"scheme", to_string(c.scheme)},
                {"paths", c.paths},
                {"seed", c.seed},
                {"policy", to_string(c.policy)},
                {"stride", c.stride}};
    Json a;
    if (c.gamma)
        a["gamma"] = *c.gamma;
    else
        a["gamma"] = c.gamma_from_trajectory ? "trajectory" : "default";
    a["samples"] = c.samples;
    a["horizons"] = c.horizons;
    a["delta"] = c.delta;
    a["tail_fraction"] = c.tail_fraction;
    a["preset"] = c.preset;
    a["gbm_a"] = c.gbm_a;
    a["gbm_b"] = c.gbm_b;
    a["gbm_x0"] = c.gbm_x0;
    a["conv_t"] = c.conv_t;
    a["base_steps"] = c.base_steps;
    a["levels"] = c.levels;
    j["analysis"] = a;
    return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json state_json(const StateVec& s) { return Json{{"x", s.x}, {"y", s.y}, {"z", s.z}}; }

std::optional<Gamma> gamma_for(const RunConfig& c)
{
    if (c.gamma)
        return Gamma{*c.gamma, GammaSource::UserSupplied};
    if (c.gamma_from_trajectory) {
        const auto hbv = c.hbv();
        const auto init = hbv.initial_vector();
        return gamma_from_trajectory(
            simulate_path(hbv.system(), init, c.grid(), c.seed, 0, PathOptions{c.scheme, c.policy, 1}));
    }
    return std::nullopt;
}

Json stability_json(const StabilityReport& r)
{
    Json j;
    j["verdict"] = to_string(r.verdict);
    j["cond_a"] = {{"value", r.cond_a_value}, {"holds", r.cond_a_holds}};
    j["cond_b"] = {{"lhs", r.cond_b_lhs}, {"rhs", r.cond_b_rhs}, {"holds", r.cond_b_holds}};
    j["gamma"] = {{"value", r.gamma.value}, {"source", to_string(r.gamma.source)}};
    j["matrix"] = {{r.matrix[0][0], r.matrix[0][1]}, {r.matrix[1][0], r.matrix[1][1]}};
    j["sym_eigenvalues"] = {r.sym_eigenvalues[0], r.sym_eigenvalues[1]};
    j["lambda_max"] = r.lambda_max;
    j["negative_definite"] = r.negative_definite;
    j["notes"] = r.notes;
    return j;
}

Json ergodicity_json(const ErgodicityReport& r)
{
    Json j;
    j["verdict"] = to_string(r.verdict);
    j["mu_star"] = r.mu_star;
    j["k"] = {r.k1, r.k2, r.k3};
    j["omega"] = r.omega;
    j["omega_squared"] = r.omega_squared;
    j["equilibrium"] = state_json(r.equilibrium);
    j["equilibrium_kind"] = to_string(r.equilibrium_kind);
    j["r0"] = r.r0;
    j["statement_discrepancy_note"] = r.statement_discrepancy_note;
    j["notes"] = r.notes;
    return j;
}

/// One run of one subcommand: configuration, output directory, and the verdicts destined for the manifest.
struct Run {
    std::string command;
    RunConfig cfg;
    OutputDir out;
    Json verdicts = Json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::size_t workers = default_worker_count();

    Run(std::string cmd, RunConfig c) : command(std::move(cmd)), cfg(std::move(c)), out(cfg.out)
    {
        const auto vp = cfg.hbv().validate();
        verdicts["stability"] = to_string(check_stability(vp, cfg.gamma ? std::optional<Gamma>(Gamma{
                                                                              *cfg.gamma, GammaSource::UserSupplied})
                                                                        : std::nullopt)
                                              .verdict);
        verdicts["ergodicity"] = to_string(check_ergodicity(vp).verdict);
    }

    void finish()
    {
        const std::string ini = to_ini(cfg);
        out.write("config.ini", ini);
        Json m;
        m["artifact"] = "hbvsde";
        m["version"] = HBVSDE_VERSION;
        m["command"] = command;
        m["config"] = config_json(cfg);
        m["config_ini"] = ini;
        m["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        Json files = Json::array();
        for (const auto& e : out.entries())
            files.push_back({{"name", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        m["files"] = files;
        m["verdicts"] = verdicts;
        out.write("manifest.json", dump(m));
    }
};

std::vector<double> thinned_times(const SimGrid& g, std::size_t stride)
{
    std::vector<double> t;
    for (std::size_t i = 0; i <= g.n_steps(); i += stride)
        t.push_back(g.time(i));
    return t;
}

CsvTable trajectory_table(const Trajectory& tr)
{
    CsvTable t;
    t.add("t", tr.times());
    for (std::size_t c = 0; c < tr.dim(); ++c)
        t.add(kComp[c], tr.component(c));
    return t;
}

// ---------------------------------------------------------------------------

void cmd_simulate(Run& run)
{
    const auto& c = run.cfg;
    const auto hbv = c.hbv();
    const auto sys = hbv.system();
    const auto init = hbv.initial_vector();
    const auto grid = c.grid();
    const PathOptions opt{c.scheme, c.policy, c.stride};

    std::vector<std::optional<Trajectory>> paths(c.paths);
    parallel_for(c.paths, run.workers,
                 [&](std::size_t p) { paths[p].emplace(simulate_path(sys, init, grid, c.seed, p, opt)); });

    Json summary;
    summary["n_steps"] = grid.n_steps();
    summary["dt"] = grid.dt();
    summary["scheme"] = to_string(c.scheme);
    summary["policy"] = to_string(c.policy);
    Json per_path = Json::array();
    for (std::size_t p = 0; p < c.paths; ++p) {
        const auto& tr = *paths[p];
        const std::string name = c.paths == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(p) + ".csv";
        run.out.write(name, trajectory_table(tr).str());
        Json first = Json::object();
        for (const auto& e : tr.negativity_events())
            if (!first.contains(kComp[e.component]))
                first[kComp[e.component]] = e.step;
        const auto last = tr.back();
        per_path.push_back({{"path", p},
                            {"file", name},
                            {"final", {{"x", last[0]}, {"y", last[1]}, {"z", last[2]}}},
                            {"negativity_events", tr.negativity_events().size()},
                            {"first_negative_step", first}});
    }
    summary["paths"] = per_path;
    run.out.write("simulate.json", dump(summary));

    const auto& tr = *paths[0];
    std::vector<Panel> panels;
    for (std::size_t comp = 0; comp < 3; ++comp)
        panels.push_back({std::string(kComp[comp]) + "(t), path 0", "t", {{kComp[comp], tr.times(), tr.component(comp)}}});
    run.out.write("trajectory.svg", svg_chart("HBV trajectory", panels));
}

void cmd_compare(Run& run)
{
    const auto& c = run.cfg;
    const auto hbv = c.hbv();
    const auto init = hbv.initial_vector();
    const auto grid = c.grid();
    const auto times = thinned_times(grid, c.stride);

    const auto st = run_ensemble(hbv, grid, c.scheme, c.paths, c.seed, times, c.policy, run.workers);
    // The zero-noise limit of both stochastic schemes is explicit Euler; RK4 is the accurate baseline.
    const auto det = integrate_ode(hbv.system(), init, grid, Scheme::Euler, c.stride);
    const auto rk4 = integrate_ode(hbv.system(), init, grid, Scheme::RK4, c.stride);

    CsvTable t;
    t.add("t", st.sample_times);
    for (std::size_t k = 0; k < 3; ++k)
        t.add(std::string("det_") + kComp[k], det.component(k));
    for (std::size_t k = 0; k < 3; ++k)
        t.add(std::string("rk4_") + kComp[k], rk4.component(k));
    for (std::size_t k = 0; k < 3; ++k)
        t.add(std::string("mean_") + kComp[k], st.components[k].mean);
    for (std::size_t k = 0; k < 3; ++k)
        t.add(std::string("q05_") + kComp[k], st.components[k].q05);
    for (std::size_t k = 0; k < 3; ++k)
        t.add(std::string("q95_") + kComp[k], st.components[k].q95);
    run.out.write("compare.csv", t.str());

    std::vector<Panel> panels;
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string n = kComp[k];
        panels.push_back({n + "(t): stochastic vs deterministic",
                          "t",
                          {{"deterministic", st.sample_times, rk4.component(k)},
                           {"mean", st.sample_times, st.components[k].mean},
                           {"q05", st.sample_times, st.components[k].q05, true},
                           {"q95", st.sample_times, st.components[k].q95, true}}});
    }
    run.out.write("compare.svg", svg_chart("Stochastic mean against the deterministic model", panels));

    Json j;
    j["n_paths"] = st.n_paths;
    j["lambda_over_mu1"] = c.model.lambda / c.model.mu1;
    const auto d_last = det.back();
    const auto r_last = rk4.back();
    j["terminal"] = {{"t", st.sample_times.back()},
                     {"det", {d_last[0], d_last[1], d_last[2]}},
                     {"rk4", {r_last[0], r_last[1], r_last[2]}},
                     {"mean",
                      {st.components[0].mean.back(), st.components[1].mean.back(), st.components[2].mean.back()}}};
    j["negativity_fraction"] = st.negativity_fraction;
    run.out.write("compare.json", dump(j));
}

void print_stability_table(const StabilityReport& r)
{
    std::printf("stability check (gamma = %.6g, %s)\n", r.gamma.value, to_string(r.gamma.source));
    std::printf("  condition (a)  value %-14.8g %s\n", r.cond_a_value, r.cond_a_holds ? "holds" : "fails");
    std::printf("  condition (b)  lhs %-12.8g rhs %-12.8g %s\n", r.cond_b_lhs, r.cond_b_rhs,
                r.cond_b_holds ? "holds" : "fails");
    std::printf("  symmetric part eigenvalues  %.8g  %.8g\n", r.sym_eigenvalues[0], r.sym_eigenvalues[1]);
    std::printf("  verdict  %s\n", to_string(r.verdict));
    for (const auto& n : r.notes)
        std::printf("  note: %s\n", n.c_str());
}

void cmd_stability(Run& run)
{
    const auto& c = run.cfg;
    const auto rep = check_stability(c.hbv().validate(), gamma_for(c));
    run.verdicts["stability"] = to_string(rep.verdict);
    run.out.write("stability.json", dump(stability_json(rep)));
    print_stability_table(rep);
}

void cmd_ergodic(Run& run)
{
    const auto& c = run.cfg;
    const auto hbv = c.hbv();
    const auto rep = check_ergodicity(hbv.validate());
    Json j = ergodicity_json(rep);

    if (rep.verdict == ErgodicityVerdict::ErgodicConditionsHold) {
        const auto init = hbv.initial_vector();
        const auto grid = c.grid();
        std::vector<std::optional<Trajectory>> paths(c.paths);
        parallel_for(c.paths, run.workers, [&](std::size_t p) {
            paths[p].emplace(
                simulate_path(hbv.system(), init, grid, c.seed, p, PathOptions{c.scheme, c.policy, c.stride}));
        });
        std::vector<Trajectory> trs;
        for (auto& p : paths)
            trs.push_back(std::move(*p));
        const auto chk = ellipsoid_time_average(trs, rep);
        j["ellipsoid"] = {{"n_paths", trs.size()},
                          {"mean", chk.mean},
                          {"per_path", chk.per_path},
                          {"slack", chk.slack},
                          {"bound_omega", chk.slack * chk.omega},
                          {"pass", chk.pass},
                          {"bound_omega_squared", chk.slack * chk.omega_squared},
                          {"pass_squared", chk.pass_squared}};
        run.verdicts["ellipsoid_pass"] = chk.pass;
        run.verdicts["ellipsoid_pass_squared"] = chk.pass_squared;
    }
    run.verdicts["ergodicity"] = to_string(rep.verdict);
    run.out.write("ergodic.json", dump(j));

    std::printf("ergodicity check (equilibrium %s: %.8g, %.8g, %.8g)\n", to_string(rep.equilibrium_kind),
                rep.equilibrium.x, rep.equilibrium.y, rep.equilibrium.z);
    std::printf("  mu*  %.8g\n  k1   %.8g\n  k2   %.8g\n  k3   %.8g\n", rep.mu_star, rep.k1, rep.k2, rep.k3);
    std::printf("  omega          %.8g\n  omega_squared  %.8g\n", rep.omega, rep.omega_squared);
    std::printf("  verdict  %s\n", to_string(rep.verdict));
    for (const auto& n : rep.notes)
        std::printf("  note: %s\n", n.c_str());
}

void cmd_convergence(Run& run)
{
    const auto& c = run.cfg;
    const std::array<Scheme, 2> schemes{Scheme::EulerMaruyama, Scheme::Milstein};
    const std::array<std::pair<double, double>, 2> expected{{{0.35, 0.65}, {0.8, 1.2}}};
    std::vector<ConvergenceReport> reps;
    for (auto s : schemes) {
        if (c.preset == "gbm") {
            const GbmSystem g{c.gbm_a, c.gbm_b};
            const std::vector<double> x0{c.gbm_x0};
            reps.push_back(strong_convergence(g, x0, c.conv_t, c.base_steps, c.levels, c.paths, c.seed, s,
                                              gbm_reference(g), run.workers));
        } else {
            const auto hbv = c.hbv();
            const auto init = hbv.initial_vector();
            reps.push_back(strong_convergence(hbv.system(), init, c.conv_t, c.base_steps, c.levels, c.paths, c.seed,
                                              s, ConvergenceReference::fine_grid(), run.workers));
        }
    }

    Json j;
    j["preset"] = c.preset;
    j["reference"] = to_string(reps[0].reference);
    j["T"] = c.conv_t;
    j["n_paths"] = c.paths;
    j["steps"] = reps[0].steps;
    j["dt"] = reps[0].dt_ladder;
    Json arr = Json::array();
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        const bool in_range = r.fitted_order >= expected[i].first && r.fitted_order <= expected[i].second;
        arr.push_back({{"scheme", to_string(r.scheme)},
                       {"fitted_order", r.fitted_order},
                       {"fit_r_squared", r.fit_r_squared},
                       {"strong_errors", r.strong_errors},
                       {"error_std_errors", r.error_std_errors},
                       {"expected_range", {expected[i].first, expected[i].second}},
                       {"in_expected_range", in_range}});
        run.verdicts[std::string("order_in_range_") + to_string(r.scheme)] = in_range;
    }
    j["schemes"] = arr;
    run.out.write("convergence.json", dump(j));

    CsvTable t;
    t.add("dt", reps[0].dt_ladder);
    for (const auto& r : reps) {
        t.add(std::string("err_") + to_string(r.scheme), r.strong_errors);
        t.add(std::string("se_") + to_string(r.scheme), r.error_std_errors);
    }
    run.out.write("convergence.csv", t.str());

    Panel p{"log10 strong error against log10 dt", "log10 dt", {}};
    for (const auto& r : reps) {
        Series s{to_string(r.scheme), {}, {}};
        for (std::size_t l = 0; l < r.dt_ladder.size(); ++l) {
            s.x.push_back(std::log10(r.dt_ladder[l]));
            s.y.push_back(std::log10(r.strong_errors[l]));
        }
        p.series.push_back(std::move(s));
    }
    run.out.write("convergence.svg", svg_chart("Strong convergence", {p}));

    for (const auto& r : reps)
        std::printf("%-9s fitted order %.4f (r^2 %.4f)\n", to_string(r.scheme), r.fitted_order, r.fit_r_squared);
}

Json estimate_json(const LyapunovEstimate& e)
{
    Json j{{"slope", e.slope},
           {"intercept", e.intercept},
           {"tail_fraction", e.tail_fraction},
           {"r_squared", e.r_squared},
           {"points_used", e.points_used},
           {"claim_supported", e.claim_supported}};
    if (e.bound)
        j["bound"] = *e.bound;
    return j;
}

void cmd_lyapunov(Run& run)
{
    const auto& c = run.cfg;
    if (!c.input.empty()) {
        const auto d = read_csv(c.input);
        std::vector<double> s;
        if (d.columns.size() == 2) {
            s = d.columns[1];
        } else if (d.columns.size() == 4) {
            s.resize(d.columns[0].size());
            for (std::size_t k = 0; k < s.size(); ++k)
                s[k] = d.columns[2][k] + d.columns[3][k];
        } else {
            throw ConfigError("lyapunov input must have columns t,value or t,x,y,z");
        }
        const auto e = estimate_decay_rate(d.columns[0], s, c.tail_fraction);
        Json j{{"source", "input"}, {"series", d.columns.size() == 2 ? d.header[1] : "y+z"}, {"estimate", estimate_json(e)}};
        run.verdicts["decay_claim_supported"] = e.claim_supported;
        run.out.write("lyapunov.json", dump(j));

        std::vector<double> logs(s.size());
        for (std::size_t k = 0; k < s.size(); ++k)
            logs[k] = s[k] > 0.0 ? std::log(s[k]) : NAN;
        std::vector<double> fit(s.size());
        for (std::size_t k = 0; k < s.size(); ++k)
            fit[k] = e.intercept + e.slope * d.columns[0][k];
        run.out.write("lyapunov.svg", svg_chart("Decay rate fit", {{"ln(value)", "t",
                                                                    {{"ln(value)", d.columns[0], logs},
                                                                     {"fit", d.columns[0], fit, true}}}}));
        std::printf("slope %.10g (r^2 %.6f)\n", e.slope, e.r_squared);
        return;
    }

    const auto hbv = c.hbv();
    const auto init = hbv.initial_vector();
    const auto grid = c.grid();
    const auto rep = check_stability(hbv.validate(), gamma_for(c));
    std::vector<std::optional<LyapunovEstimate>> est(c.paths);
    std::vector<std::optional<Trajectory>> first(1);
    parallel_for(c.paths, run.workers, [&](std::size_t p) {
        auto tr = simulate_path(hbv.system(), init, grid, c.seed, p, PathOptions{c.scheme, c.policy, c.stride});
        try {
            est[p] = estimate_lyapunov(tr, c.tail_fraction, &rep);
        } catch (const DegenerateTail&) {
            est[p].reset();
        }
        if (p == 0)
            first[0].emplace(std::move(tr));
    });

    CsvTable t;
    std::vector<double> idx, slope, intercept, r2, used, supported;
    std::size_t negative = 0, degenerate = 0;
    for (std::size_t p = 0; p < c.paths; ++p) {
        idx.push_back(static_cast<double>(p));
        if (est[p]) {
            slope.push_back(est[p]->slope);
            intercept.push_back(est[p]->intercept);
            r2.push_back(est[p]->r_squared);
            used.push_back(static_cast<double>(est[p]->points_used));
            supported.push_back(est[p]->claim_supported ? 1.0 : 0.0);
            negative += est[p]->slope < 0.0 ? 1 : 0;
        } else {
            ++degenerate;
            slope.push_back(NAN);
            intercept.push_back(NAN);
            r2.push_back(NAN);
            used.push_back(0.0);
            supported.push_back(0.0);
        }
    }
    t.add("path", idx);
    t.add("slope", slope);
    t.add("intercept", intercept);
    t.add("r_squared", r2);
    t.add("points_used", used);
    t.add("claim_supported", supported);
    run.out.write("lyapunov.csv", t.str());

    const double frac = static_cast<double>(negative) / static_cast<double>(c.paths);
    Json j;
    j["source"] = "simulation";
    j["n_paths"] = c.paths;
    j["fraction_negative"] = frac;
    j["degenerate_paths"] = degenerate;
    j["stability"] = stability_json(rep);
    j["bound"] = -0.5 * std::abs(rep.lambda_max);
    std::vector<double> finite;
    for (double s : slope)
        if (std::isfinite(s))
            finite.push_back(s);
    j["median_slope"] = finite.empty() ? Json(nullptr) : Json(stats::median(finite));
    j["path0"] = est[0] ? estimate_json(*est[0]) : Json(nullptr);
    run.verdicts["fraction_negative_slope"] = frac;
    run.out.write("lyapunov.json", dump(j));

    const auto& tr = *first[0];
    const auto times = tr.times();
    std::vector<double> logs(tr.size()), fit(tr.size());
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double s = tr.value(k, 1) + tr.value(k, 2);
        logs[k] = s > 0.0 ? std::log(s) : NAN;
        fit[k] = est[0] ? est[0]->intercept + est[0]->slope * times[k] : NAN;
    }
    run.out.write("lyapunov.svg",
                  svg_chart("ln(y + z), path 0", {{"ln(y + z)", "t", {{"ln(y+z)", times, logs}, {"fit", times, fit, true}}}}));
    std::printf("fraction of paths with negative slope: %.4f (%zu of %zu)\n", frac, negative, c.paths);
}

void cmd_couple(Run& run)
{
    const auto& c = run.cfg;
    const auto hbv = c.hbv();
    const auto grid = c.grid();
    CouplingOptions opt;
    opt.scheme = c.scheme;
    opt.policy = c.policy;
    opt.horizons = c.horizons;
    opt.delta = c.delta;
    opt.tail_fraction = c.tail_fraction;
    const auto res = coupling_experiment(hbv, grid, c.paths, c.seed, opt, run.workers);

    auto stream = derive_stream({c.seed, 0});
    const auto w = sample_wiener_increments(grid, stream, 3);
    const auto pair = integrate_coupled(hbv, grid, w, c.scheme, c.policy);
    std::vector<double> t, x, x1, diff;
    for (std::size_t k = 0; k < pair.full.size(); k += c.stride) {
        t.push_back(pair.full.time(k));
        x.push_back(pair.full.value(k, 0));
        x1.push_back(pair.x1.value(k, 0));
        diff.push_back(x.back() - x1.back());
    }
    CsvTable path0;
    path0.add("t", t);
    path0.add("x", x);
    path0.add("x1", x1);
    path0.add("diff", diff);
    run.out.write("coupling.csv", path0.str());

    CsvTable per;
    std::vector<double> idx(c.paths);
    for (std::size_t p = 0; p < c.paths; ++p)
        idx[p] = static_cast<double>(p);
    per.add("path", idx);
    per.add("max_excess", res.max_excess);
    for (std::size_t h = 0; h < res.horizons.size(); ++h) {
        per.add("diff_h" + std::to_string(h), res.horizons[h].diff);
        per.add("tail_sup_abs_h" + std::to_string(h), res.horizons[h].tail_sup_abs);
    }
    run.out.write("coupling_paths.csv", per.str());

    Json j;
    j["n_paths"] = res.n_paths;
    j["delta"] = res.delta;
    j["tail_fraction"] = c.tail_fraction;
    Json hs = Json::array();
    for (std::size_t h = 0; h < res.horizons.size(); ++h) {
        const auto& ch = res.horizons[h];
        hs.push_back({{"index", h},
                      {"horizon", ch.horizon},
                      {"median_abs", ch.median_abs},
                      {"q95_abs", ch.q95_abs},
                      {"fraction_above_delta", ch.fraction_above_delta}});
    }
    j["horizons"] = hs;
    j["max_excess_overall"] = res.max_excess_overall;
    j["ordering_x_le_x1_held"] = res.max_excess_overall <= 0.0;
    run.verdicts["ordering_x_le_x1_held"] = res.max_excess_overall <= 0.0;
    run.out.write("coupling.json", dump(j));

    run.out.write("coupling.svg",
                  svg_chart("Coupled paths, path 0",
                            {{"x and x1", "t", {{"x", t, x}, {"x1", t, x1, true}}}, {"x - x1", "t", {{"x - x1", t, diff}}}}));
    for (const auto& ch : res.horizons)
        std::printf("horizon %.6g: median |x - x1| %.6g, q95 %.6g\n", ch.horizon, ch.median_abs, ch.q95_abs);
}

void cmd_ensemble(Run& run)
{
    const auto& c = run.cfg;
    const auto hbv = c.hbv();
    const auto grid = c.grid();
    const auto times = even_sample_times(grid, c.samples);
    const auto st = run_ensemble(hbv, grid, c.scheme, c.paths, c.seed, times, c.policy, run.workers);

    CsvTable t;
    t.add("t", st.sample_times);
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string n = kComp[k];
        t.add("mean_" + n, st.components[k].mean);
        t.add("var_" + n, st.components[k].variance);
        t.add("q05_" + n, st.components[k].q05);
        t.add("q50_" + n, st.components[k].q50);
        t.add("q95_" + n, st.components[k].q95);
    }
    run.out.write("ensemble.csv", t.str());

    std::vector<Panel> panels;
    for (std::size_t k = 0; k < 3; ++k)
        panels.push_back({std::string(kComp[k]) + "(t) ensemble",
                          "t",
                          {{"mean", st.sample_times, st.components[k].mean},
                           {"median", st.sample_times, st.components[k].q50},
                           {"q05", st.sample_times, st.components[k].q05, true},
                           {"q95", st.sample_times, st.components[k].q95, true}}});
    run.out.write("ensemble.svg", svg_chart("Ensemble statistics", panels));

    Json j;
    j["n_paths"] = st.n_paths;
    j["sample_times"] = st.sample_times.size();
    j["negativity_fraction"] = st.negativity_fraction;
    Json term;
    for (std::size_t k = 0; k < 3; ++k)
        term[kComp[k]] = {{"mean", st.components[k].mean.back()},
                          {"variance", st.components[k].variance.back()},
                          {"q05", st.components[k].q05.back()},
                          {"q50", st.components[k].q50.back()},
                          {"q95", st.components[k].q95.back()}};
    j["terminal"] = term;
    run.out.write("ensemble.json", dump(j));
}

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("-c,--config", o.config, "INI config file, or a manifest.json from an earlier run");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--scheme", o.scheme, "em or milstein");
    sub->add_option("--paths", o.paths, "number of paths");
    sub->add_option("--dt", o.dt, "time step");
    sub->add_option("--t-end", o.t_end, "final time");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--policy", o.policy, "raw or project");
    sub->add_option("--gamma", o.gamma, "x bound for the stability check: a number, 'trajectory', or 'default'");
    sub->add_option("--stride", o.stride, "keep every n-th grid point in emitted series");
}

}  // namespace

int run(int argc, char** argv)
{
    CLI::App app{"Simulation and analysis of the stochastic within-host HBV model", "hbvsde-cli"};
    app.set_version_flag("--version", HBVSDE_VERSION);
    app.require_subcommand(1);

    Overrides o;
    using Handler = void (*)(Run&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands{
        {"simulate", "write trajectories (t,x,y,z) for each path", cmd_simulate},
        {"compare", "ensemble mean and bands against the deterministic model", cmd_compare},
        {"stability", "check the decay conditions for (y, z)", cmd_stability},
        {"ergodic", "check the stationary-distribution conditions", cmd_ergodic},
        {"convergence", "strong convergence orders of EM and Milstein", cmd_convergence},
        {"lyapunov", "fit the decay rate of ln(y + z)", cmd_lyapunov},
        {"couple", "compare x with the comparison process x1 on shared noise", cmd_couple},
        {"ensemble", "Monte Carlo statistics at evenly spaced times", cmd_ensemble},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub, o);
        subs.push_back(sub);
    }
    subs[5]->add_option("--input", o.input, "CSV with columns t,value or t,x,y,z; skips simulation");
    subs[6]->add_option("--horizons", o.horizons, "comma-separated horizons");
    subs[7]->add_option("--samples", o.samples, "number of evenly spaced sample times");
    subs[4]->add_option("--preset", o.preset, "gbm or hbv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed())
                continue;
            Run r(std::get<0>(commands[i]), resolve(o));
            std::get<2>(commands[i])(r);
            r.finish();
        }
    } catch (const NonFiniteState& e) {
        std::fprintf(stderr, "numerical failure at step %zu%s: %s\n", e.step(),
                     e.has_path() ? (" of path " + std::to_string(e.path())).c_str() : "", e.what());
        return kExitNumerical;
    } catch (const DegenerateTail& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParamError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args)
{
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    for (auto& a : copy)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace hbvsde::cli
