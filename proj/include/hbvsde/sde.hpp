#pragma once

#include "hbvsde/core.hpp"
#include "hbvsde/random.hpp"

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbvsde {

/**
 * @brief An Ito SDE du = f(u, t) dt + diag(b(u, t)) dW with diagonal noise.
 *
 * Each component i is driven by its own Wiener process with amplitude
 * b_i(u, t); diffusion_deriv returns d b_i / d u_i, which is all the Milstein
 * correction needs for this noise structure. All three evaluations write into
 * `out` (length dim()) and must be pure.
 */
template <class S>
concept DiagonalSde = requires(const S& s, std::span<const double> u, double t, std::span<double> out) {
    { s.dim() } -> std::convertible_to<std::size_t>;
    s.drift(u, t, out);
    s.diffusion(u, t, out);
    s.diffusion_deriv(u, t, out);
};

/// Type-erased diagonal-noise system, for ad-hoc models and tests.
class SdeSystem {
public:
    using Field = std::function<void(std::span<const double>, double, std::span<double>)>;

    SdeSystem(std::size_t dim, Field drift, Field diffusion, Field diffusion_deriv)
        : dim_(dim), drift_(std::move(drift)), diffusion_(std::move(diffusion)),
          diffusion_deriv_(std::move(diffusion_deriv))
    {
        if (dim_ == 0)
            throw std::invalid_argument("SdeSystem: dim must be >= 1");
    }

    std::size_t dim() const noexcept { return dim_; }
    void drift(std::span<const double> u, double t, std::span<double> out) const { drift_(u, t, out); }
    void diffusion(std::span<const double> u, double t, std::span<double> out) const { diffusion_(u, t, out); }
    void diffusion_deriv(std::span<const double> u, double t, std::span<double> out) const
    {
        diffusion_deriv_(u, t, out);
    }

private:
    std::size_t dim_;
    Field drift_;
    Field diffusion_;
    Field diffusion_deriv_;
};

/// Scalar geometric Brownian motion dx = a x dt + b x dW.
struct GbmSystem {
    double a = 0.0;
    double b = 0.0;

    std::size_t dim() const noexcept { return 1; }
    void drift(std::span<const double> u, double, std::span<double> out) const { out[0] = a * u[0]; }
    void diffusion(std::span<const double> u, double, std::span<double> out) const { out[0] = b * u[0]; }
    void diffusion_deriv(std::span<const double>, double, std::span<double> out) const { out[0] = b; }

    /// Exact solution x0 exp((a - b^2/2) t + b W(t)).
    double exact(double x0, double t, double w) const { return x0 * std::exp((a - 0.5 * b * b) * t + b * w); }
};

enum class Scheme { EulerMaruyama, Milstein, RK4, Euler };

inline const char* to_string(Scheme s)
{
    switch (s) {
        case Scheme::EulerMaruyama: return "em";
        case Scheme::Milstein: return "milstein";
        case Scheme::RK4: return "rk4";
        case Scheme::Euler: return "euler";
    }
    return "unknown";
}

enum class NegativityPolicy { Raw, ProjectToZero };

inline const char* to_string(NegativityPolicy p) { return p == NegativityPolicy::Raw ? "raw" : "project"; }

struct NegativityEvent {
    std::size_t step;
    std::size_t component;

    friend bool operator==(const NegativityEvent&, const NegativityEvent&) = default;
};

/// Upper bound on stored points before a stride is required.
inline constexpr std::size_t kMaxStoredPoints = 10'000'000;

/**
 * @brief States of one integration on a SimGrid.
 *
 * Point k holds the state at grid index k * stride. With stride 1 every grid
 * point is kept, including the initial condition at k = 0.
 */
class Trajectory {
public:
    Trajectory(SimGrid grid, std::size_t dim, Scheme scheme, std::size_t stride = 1)
        : grid_(grid), dim_(dim), scheme_(scheme), stride_(stride)
    {
        if (dim == 0)
            throw std::invalid_argument("Trajectory: dim must be >= 1");
        if (stride == 0 || grid.n_steps() % stride != 0)
            throw std::invalid_argument("Trajectory: stride must divide n_steps");
        if (grid.n_steps() / stride + 1 > kMaxStoredPoints)
            throw std::invalid_argument("Trajectory: more than 1e7 stored points; use a larger stride");
        states_.reserve((grid.n_steps() / stride + 1) * dim);
    }

    const SimGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    Scheme scheme() const noexcept { return scheme_; }
    std::size_t stride() const noexcept { return stride_; }
    std::size_t size() const noexcept { return states_.size() / dim_; }

    double time(std::size_t k) const noexcept { return grid_.time(k * stride_); }
    std::span<const double> state(std::size_t k) const { return {states_.data() + k * dim_, dim_}; }
    double value(std::size_t k, std::size_t component) const { return states_[k * dim_ + component]; }
    std::span<const double> back() const { return state(size() - 1); }

    StateVec state_vec(std::size_t k) const
    {
        if (dim_ != 3)
            throw std::logic_error("Trajectory::state_vec requires a three-component trajectory");
        return {value(k, 0), value(k, 1), value(k, 2)};
    }

    std::vector<double> times() const
    {
        std::vector<double> t(size());
        for (std::size_t k = 0; k < t.size(); ++k)
            t[k] = time(k);
        return t;
    }

    std::vector<double> component(std::size_t c) const
    {
        std::vector<double> v(size());
        for (std::size_t k = 0; k < v.size(); ++k)
            v[k] = value(k, c);
        return v;
    }

    const std::vector<NegativityEvent>& negativity_events() const noexcept { return events_; }

    bool had_negativity(std::size_t component) const
    {
        for (const auto& e : events_)
            if (e.component == component)
                return true;
        return false;
    }

    void push(std::span<const double> s) { states_.insert(states_.end(), s.begin(), s.end()); }
    void record(NegativityEvent e) { events_.push_back(e); }

private:
    SimGrid grid_;
    std::size_t dim_;
    Scheme scheme_;
    std::size_t stride_;
    std::vector<double> states_;
    std::vector<NegativityEvent> events_;
};

namespace detail {

struct StepBuffers {
    explicit StepBuffers(std::size_t dim) : f(dim), b(dim), db(dim), k2(dim), k3(dim), k4(dim), tmp(dim) {}
    std::vector<double> f, b, db, k2, k3, k4, tmp;
};

inline bool all_finite(std::span<const double> v)
{
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

template <DiagonalSde S>
void em_step_into(const S& sys, std::span<const double> u, double t, double dt, std::span<const double> dW,
                  std::span<double> out, StepBuffers& buf)
{
    const std::size_t n = sys.dim();
    sys.drift(u, t, buf.f);
    sys.diffusion(u, t, buf.b);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = u[i] + buf.f[i] * dt + buf.b[i] * dW[i];
}

template <DiagonalSde S>
void milstein_step_into(const S& sys, std::span<const double> u, double t, double dt, std::span<const double> dW,
                        std::span<double> out, StepBuffers& buf)
{
    const std::size_t n = sys.dim();
    sys.drift(u, t, buf.f);
    sys.diffusion(u, t, buf.b);
    sys.diffusion_deriv(u, t, buf.db);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (u[i] + buf.f[i] * dt + buf.b[i] * dW[i]) + 0.5 * buf.b[i] * buf.db[i] * (dW[i] * dW[i] - dt);
}

template <class Rhs>
void euler_step_into(const Rhs& rhs, std::span<const double> u, double t, double dt, std::span<double> out,
                     StepBuffers& buf)
{
    rhs(u, t, std::span<double>(buf.f));
    for (std::size_t i = 0; i < u.size(); ++i)
        out[i] = u[i] + buf.f[i] * dt;
}

template <class Rhs>
void rk4_step_into(const Rhs& rhs, std::span<const double> u, double t, double dt, std::span<double> out,
                   StepBuffers& buf)
{
    const std::size_t n = u.size();
    rhs(u, t, std::span<double>(buf.f));
    for (std::size_t i = 0; i < n; ++i)
        buf.tmp[i] = u[i] + 0.5 * dt * buf.f[i];
    rhs(std::span<const double>(buf.tmp), t + 0.5 * dt, std::span<double>(buf.k2));
    for (std::size_t i = 0; i < n; ++i)
        buf.tmp[i] = u[i] + 0.5 * dt * buf.k2[i];
    rhs(std::span<const double>(buf.tmp), t + 0.5 * dt, std::span<double>(buf.k3));
    for (std::size_t i = 0; i < n; ++i)
        buf.tmp[i] = u[i] + dt * buf.k3[i];
    rhs(std::span<const double>(buf.tmp), t + dt, std::span<double>(buf.k4));
    for (std::size_t i = 0; i < n; ++i)
        out[i] = u[i] + dt / 6.0 * (buf.f[i] + 2.0 * buf.k2[i] + 2.0 * buf.k3[i] + buf.k4[i]);
}

inline void check_step_args(std::size_t dim, std::size_t state_size, double dt, std::size_t dw_size)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("step: dt must be positive");
    if (state_size != dim || dw_size != dim)
        throw std::invalid_argument("step: state and dW must have length dim");
}

// Appends the new state, applying the negativity policy. A component counts as
// having become negative when it is negative now and the previous stored value was not.
inline void commit_state(Trajectory& traj, std::span<double> next, std::span<const double> prev, std::size_t step,
                         NegativityPolicy policy, bool store)
{
    for (std::size_t c = 0; c < next.size(); ++c) {
        if (next[c] < 0.0) {
            if (!(prev[c] < 0.0))
                traj.record({step, c});
            if (policy == NegativityPolicy::ProjectToZero)
                next[c] = 0.0;
        }
    }
    if (store)
        traj.push(next);
}

}  // namespace detail

/// One Euler-Maruyama step: u + f dt + b .* dW.
template <DiagonalSde S>
std::vector<double> em_step(std::span<const double> state, double t, double dt, std::span<const double> dW,
                            const S& sys)
{
    detail::check_step_args(sys.dim(), state.size(), dt, dW.size());
    detail::StepBuffers buf(sys.dim());
    std::vector<double> out(sys.dim());
    detail::em_step_into(sys, state, t, dt, dW, out, buf);
    if (!detail::all_finite(out))
        throw NonFiniteState(0, "em_step produced a non-finite state");
    return out;
}

/// One Milstein step: the Euler-Maruyama update plus 1/2 b b' (dW^2 - dt) per component.
template <DiagonalSde S>
std::vector<double> milstein_step(std::span<const double> state, double t, double dt, std::span<const double> dW,
                                  const S& sys)
{
    detail::check_step_args(sys.dim(), state.size(), dt, dW.size());
    detail::StepBuffers buf(sys.dim());
    std::vector<double> out(sys.dim());
    detail::milstein_step_into(sys, state, t, dt, dW, out, buf);
    if (!detail::all_finite(out))
        throw NonFiniteState(0, "milstein_step produced a non-finite state");
    return out;
}

/**
 * @brief Integrates a diagonal-noise SDE over `grid` with prescribed increments.
 *
 * Raw policy never modifies values; ProjectToZero clamps negative components
 * to zero after each step. Both record negativity events.
 */
template <DiagonalSde S>
Trajectory integrate(const S& sys, std::span<const double> initial, const SimGrid& grid,
                     const IncrementMatrix& increments, Scheme scheme,
                     NegativityPolicy policy = NegativityPolicy::Raw, std::size_t stride = 1)
{
    const std::size_t n = sys.dim();
    if (scheme != Scheme::EulerMaruyama && scheme != Scheme::Milstein)
        throw std::invalid_argument("integrate: scheme must be Euler-Maruyama or Milstein");
    if (initial.size() != n)
        throw std::invalid_argument("integrate: initial state has wrong dimension");
    if (increments.n_steps() != grid.n_steps() || increments.dims() != n)
        throw std::invalid_argument("integrate: increment matrix does not match grid and dimension");
    if (!detail::all_finite(initial))
        throw std::invalid_argument("integrate: initial state is not finite");

    Trajectory traj(grid, n, scheme, stride);
    detail::StepBuffers buf(n);
    std::vector<double> cur(initial.begin(), initial.end());
    std::vector<double> next(n);
    std::vector<double> dW(n);
    traj.push(cur);

    const double dt = grid.dt();
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        increments.row(i, dW);
        const double t = grid.time(i);
        if (scheme == Scheme::EulerMaruyama)
            detail::em_step_into(sys, cur, t, dt, dW, next, buf);
        else
            detail::milstein_step_into(sys, cur, t, dt, dW, next, buf);
        if (!detail::all_finite(next))
            throw NonFiniteState(i + 1, "non-finite state at step " + std::to_string(i + 1));
        detail::commit_state(traj, next, cur, i + 1, policy, (i + 1) % stride == 0);
        cur.swap(next);
    }
    return traj;
}

/**
 * @brief Fixed-step integration of du/dt = rhs(u, t).
 *
 * `rhs` is any callable (span<const double> u, double t, span<double> out).
 * Classical RK4 by default; Scheme::Euler gives the explicit Euler baseline.
 */
template <class Rhs>
    requires std::invocable<const Rhs&, std::span<const double>, double, std::span<double>>
Trajectory integrate_ode(const Rhs& rhs, std::span<const double> initial, const SimGrid& grid,
                         Scheme scheme = Scheme::RK4, std::size_t stride = 1)
{
    if (scheme != Scheme::RK4 && scheme != Scheme::Euler)
        throw std::invalid_argument("integrate_ode: scheme must be RK4 or Euler");
    if (initial.empty() || !detail::all_finite(initial))
        throw std::invalid_argument("integrate_ode: initial state must be non-empty and finite");
    const std::size_t n = initial.size();
    Trajectory traj(grid, n, scheme, stride);
    detail::StepBuffers buf(n);
    std::vector<double> cur(initial.begin(), initial.end());
    std::vector<double> next(n);
    traj.push(cur);

    const double dt = grid.dt();
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const double t = grid.time(i);
        if (scheme == Scheme::RK4)
            detail::rk4_step_into(rhs, cur, t, dt, next, buf);
        else
            detail::euler_step_into(rhs, cur, t, dt, next, buf);
        if (!detail::all_finite(next))
            throw NonFiniteState(i + 1, "non-finite state at step " + std::to_string(i + 1));
        detail::commit_state(traj, next, cur, i + 1, NegativityPolicy::Raw, (i + 1) % stride == 0);
        cur.swap(next);
    }
    return traj;
}

/// Deterministic integration of the drift of an SDE system (noise ignored).
template <DiagonalSde S>
Trajectory integrate_ode(const S& sys, std::span<const double> initial, const SimGrid& grid,
                         Scheme scheme = Scheme::RK4, std::size_t stride = 1)
{
    if (initial.size() != sys.dim())
        throw std::invalid_argument("integrate_ode: initial state has wrong dimension");
    auto rhs = [&sys](std::span<const double> u, double t, std::span<double> out) { sys.drift(u, t, out); };
    return integrate_ode(rhs, initial, grid, scheme, stride);
}

}  // namespace hbvsde
