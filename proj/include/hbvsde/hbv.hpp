#pragma once

// Within-host HBV model:
//
//   dx = (lambda - mu1 x - (1-eta) beta x z + q y) dt + sigma1 x dW1
//   dy = ((1-eta) beta x z - mu2 y - q y) dt        + sigma2 y dW2
//   dz = ((1-epsilon) p y - mu3 z) dt               + sigma3 z dW3
//
// plus the scalar comparison process
//
//   dx1 = (lambda - mu1 x1) dt + sigma1 x1 dW1.

#include "hbvsde/core.hpp"
#include "hbvsde/sde.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde {

inline StateVec hbv_drift(const StateVec& s, const ModelParams& m)
{
    const double infection = (1.0 - m.eta) * m.beta * s.x * s.z;
    return {
        m.lambda - m.mu1 * s.x - infection + m.q * s.y,
        infection - m.mu2 * s.y - m.q * s.y,
        (1.0 - m.epsilon) * m.p * s.y - m.mu3 * s.z,
    };
}

inline StateVec hbv_diffusion_diag(const StateVec& s, const NoiseParams& n)
{
    return {n.sigma1 * s.x, n.sigma2 * s.y, n.sigma3 * s.z};
}

/// The three-compartment stochastic model as a DiagonalSde. With zero noise the drift is the ODE right-hand side.
struct HbvSystem {
    ModelParams params;
    NoiseParams noise;

    std::size_t dim() const noexcept { return 3; }

    void drift(std::span<const double> u, double, std::span<double> out) const
    {
        const auto f = hbv_drift({u[0], u[1], u[2]}, params);
        out[0] = f.x;
        out[1] = f.y;
        out[2] = f.z;
    }

    void diffusion(std::span<const double> u, double, std::span<double> out) const
    {
        out[0] = noise.sigma1 * u[0];
        out[1] = noise.sigma2 * u[1];
        out[2] = noise.sigma3 * u[2];
    }

    void diffusion_deriv(std::span<const double>, double, std::span<double> out) const
    {
        out[0] = noise.sigma1;
        out[1] = noise.sigma2;
        out[2] = noise.sigma3;
    }
};

/// Scalar comparison process x1: drift lambda - mu1 x1, diffusion sigma1 x1.
struct X1System {
    double lambda = 100.0;
    double mu1 = 20.0;
    double sigma1 = 0.5;

    std::size_t dim() const noexcept { return 1; }
    void drift(std::span<const double> u, double, std::span<double> out) const { out[0] = lambda - mu1 * u[0]; }
    void diffusion(std::span<const double> u, double, std::span<double> out) const { out[0] = sigma1 * u[0]; }
    void diffusion_deriv(std::span<const double>, double, std::span<double> out) const { out[0] = sigma1; }
};

inline X1System x1_system(const ValidatedParams& vp)
{
    return {vp.model().lambda, vp.model().mu1, vp.noise().sigma1};
}

/// E[x1(t)] = x1(0) e^{-mu1 t} + (lambda/mu1)(1 - e^{-mu1 t}).
inline double x1_exact_mean(double t, double x1_0, const ModelParams& m)
{
    if (t < 0.0)
        throw std::invalid_argument("x1_exact_mean: t must be >= 0");
    const double decay = std::exp(-m.mu1 * t);
    return x1_0 * decay + (m.lambda / m.mu1) * (1.0 - decay);
}

/**
 * @brief Threshold quantity for the deterministic model.
 *
 * Not part of the source model; obtained by solving the right-hand side for a
 * steady state with y > 0:
 *   R0 = (1-eta)(1-epsilon) beta p lambda / (mu1 mu3 (mu2 + q)).
 * An endemic steady state with y, z > 0 exists iff R0 > 1.
 */
inline double basic_reproduction_number(const ModelParams& m)
{
    return (1.0 - m.eta) * (1.0 - m.epsilon) * m.beta * m.p * m.lambda / (m.mu1 * m.mu3 * (m.mu2 + m.q));
}

struct Equilibria {
    StateVec infection_free;
    std::optional<StateVec> endemic;
    double r0 = 0.0;
};

/// Largest absolute component of the deterministic right-hand side, relative to the size of its terms.
inline double relative_residual(const StateVec& s, const ModelParams& m)
{
    const auto f = hbv_drift(s, m);
    const double infection = std::abs((1.0 - m.eta) * m.beta * s.x * s.z);
    const double sx = m.lambda + std::abs(m.mu1 * s.x) + infection + std::abs(m.q * s.y);
    const double sy = infection + std::abs((m.mu2 + m.q) * s.y);
    const double sz = std::abs((1.0 - m.epsilon) * m.p * s.y) + std::abs(m.mu3 * s.z);
    auto rel = [](double v, double scale) { return scale > 0.0 ? std::abs(v) / scale : std::abs(v); };
    return std::max({rel(f.x, sx), rel(f.y, sy), rel(f.z, sz)});
}

namespace detail {

// Steady state along the branch y != 0: x* = (lambda/mu1)/R0,
// y* = (lambda - mu1 x*)/mu2, z* = (1-epsilon) p y*/mu3.
inline std::optional<StateVec> endemic_closed_form(const ModelParams& m)
{
    const double gain = (1.0 - m.eta) * (1.0 - m.epsilon) * m.beta * m.p;
    if (!(gain > 0.0))
        return std::nullopt;
    const double x = m.mu3 * (m.mu2 + m.q) / gain;
    const double y = (m.lambda - m.mu1 * x) / m.mu2;
    const double z = (1.0 - m.epsilon) * m.p * y / m.mu3;
    return StateVec{x, y, z};
}

// Bisection on h(y) = (1-eta) beta x(y) z(y) - (mu2+q) y, with z(y) and x(y)
// eliminated through the z and x equations. Used when the closed form loses
// accuracy. Returns nullopt when no sign change exists in (0, lambda/mu2).
inline std::optional<StateVec> endemic_bracketed(const ModelParams& m)
{
    const double k = (1.0 - m.epsilon) * m.p / m.mu3;
    auto state_at = [&](double y) {
        const double z = k * y;
        const double x = (m.lambda + m.q * y) / (m.mu1 + (1.0 - m.eta) * m.beta * z);
        return StateVec{x, y, z};
    };
    auto h = [&](double y) {
        const auto s = state_at(y);
        return (1.0 - m.eta) * m.beta * s.x * s.z - (m.mu2 + m.q) * s.y;
    };
    const double y_max = m.lambda / m.mu2;
    // h(y)/y > 0 near zero iff R0 > 1; h(y_max) < 0 always.
    double lo = y_max * 1e-12;
    double hi = y_max;
    if (!(h(lo) > 0.0) || !(h(hi) < 0.0))
        return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    return state_at(0.5 * (lo + hi));
}

}  // namespace detail

/// Nontrivial steady-state branch regardless of sign (equals the infection-free point at R0 = 1).
inline std::optional<StateVec> endemic_branch(const ModelParams& m) { return detail::endemic_closed_form(m); }

inline Equilibria equilibria(const ValidatedParams& vp)
{
    const auto& m = vp.model();
    Equilibria eq;
    eq.infection_free = {m.lambda / m.mu1, 0.0, 0.0};
    eq.r0 = basic_reproduction_number(m);
    if (eq.r0 > 1.0) {
        auto e = detail::endemic_closed_form(m);
        if (!e || !(e->y > 0.0) || relative_residual(*e, m) > 1e-10)
            e = detail::endemic_bracketed(m);
        if (e && e->y > 0.0 && e->z > 0.0)
            eq.endemic = e;
    }
    return eq;
}

/// Model, noise, and a starting point. x must be positive; y and z nonnegative.
struct HbvConfig {
    ModelParams params;
    NoiseParams noise;
    StateVec initial{5.0, 1.0, 1.0};

    ValidatedParams validate() const
    {
        auto vp = validate_params(params, noise);
        std::vector<Violation> bad;
        if (!std::isfinite(initial.x) || !(initial.x > 0.0))
            bad.push_back({ViolationKind::NonPositiveRate, "x0"});
        if (!std::isfinite(initial.y) || initial.y < 0.0)
            bad.push_back({ViolationKind::NonPositiveRate, "y0"});
        if (!std::isfinite(initial.z) || initial.z < 0.0)
            bad.push_back({ViolationKind::NonPositiveRate, "z0"});
        if (!bad.empty())
            throw ParamError(std::move(bad));
        return vp;
    }

    HbvSystem system() const { return {params, noise}; }
    std::vector<double> initial_vector() const { return {initial.x, initial.y, initial.z}; }
};

}  // namespace hbvsde
