#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbvsde {

/**
 * @brief Deterministic rates of the within-host HBV model.
 *
 * `lambda` is the production rate of uninfected cells. The same quantity is
 * written both as a capital and a lower-case lambda in the model literature;
 * there is only one field here.
 */
struct ModelParams {
    double lambda = 100.0;  ///< production of uninfected cells (cells/time)
    double mu1 = 20.0;      ///< death rate of uninfected cells
    double mu2 = 5.0;       ///< death rate of infected cells
    double mu3 = 7.0;       ///< clearance rate of free virions
    double beta = 0.6;      ///< infection rate
    double eta = 0.6;       ///< drug efficacy on infection, in [0, 1]
    double epsilon = 0.2;   ///< drug efficacy on virion production, in [0, 1]
    double p = 2.0;         ///< virion production per infected cell
    double q = 5.0;         ///< non-cytolytic cure rate

    /// Reference parameter set used as the default everywhere.
    static constexpr ModelParams reference() { return {}; }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Multiplicative noise amplitudes, one per compartment.
struct NoiseParams {
    double sigma1 = 0.5;
    double sigma2 = 0.6;
    double sigma3 = 0.8;

    static constexpr NoiseParams reference() { return {}; }
    static constexpr NoiseParams none() { return {0.0, 0.0, 0.0}; }

    bool is_zero() const { return sigma1 == 0.0 && sigma2 == 0.0 && sigma3 == 0.0; }

    friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

/// (x, y, z) = (uninfected cells, infected cells, free virions).
struct StateVec {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const StateVec&, const StateVec&) = default;
};

enum class ViolationKind { NonPositiveRate, FractionOutOfRange, NegativeNoise, NonFiniteValue };

inline const char* to_string(ViolationKind k)
{
    switch (k) {
        case ViolationKind::NonPositiveRate: return "NonPositiveRate";
        case ViolationKind::FractionOutOfRange: return "FractionOutOfRange";
        case ViolationKind::NegativeNoise: return "NegativeNoise";
        case ViolationKind::NonFiniteValue: return "NonFiniteValue";
    }
    return "Unknown";
}

struct Violation {
    ViolationKind kind;
    std::string field;

    friend bool operator==(const Violation&, const Violation&) = default;
};

/// Raised by validation; carries every violated constraint, not only the first.
class ParamError : public std::invalid_argument {
public:
    explicit ParamError(std::vector<Violation> violations)
        : std::invalid_argument(format(violations)), violations_(std::move(violations))
    {
    }

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string format(const std::vector<Violation>& vs)
    {
        std::string msg = "invalid parameters:";
        for (const auto& v : vs) {
            msg += ' ';
            msg += to_string(v.kind);
            msg += "(\"" + v.field + "\")";
        }
        return msg;
    }

    std::vector<Violation> violations_;
};

/// Parameter bundle that has passed validate_params. Only constructible through it.
class ValidatedParams {
public:
    const ModelParams& model() const noexcept { return model_; }
    const NoiseParams& noise() const noexcept { return noise_; }

private:
    ValidatedParams(const ModelParams& m, const NoiseParams& n) : model_(m), noise_(n) {}
    friend ValidatedParams validate_params(const ModelParams&, const NoiseParams&);

    ModelParams model_;
    NoiseParams noise_;
};

inline ValidatedParams validate_params(const ModelParams& mp, const NoiseParams& np)
{
    std::vector<Violation> out;
    auto positive = [&](double v, const char* name) {
        if (!std::isfinite(v))
            out.push_back({ViolationKind::NonFiniteValue, name});
        else if (!(v > 0.0))
            out.push_back({ViolationKind::NonPositiveRate, name});
    };
    auto fraction = [&](double v, const char* name) {
        if (!std::isfinite(v))
            out.push_back({ViolationKind::NonFiniteValue, name});
        else if (v < 0.0 || v > 1.0)
            out.push_back({ViolationKind::FractionOutOfRange, name});
    };
    auto amplitude = [&](double v, const char* name) {
        if (!std::isfinite(v))
            out.push_back({ViolationKind::NonFiniteValue, name});
        else if (v < 0.0)
            out.push_back({ViolationKind::NegativeNoise, name});
    };

    positive(mp.lambda, "lambda");
    positive(mp.mu1, "mu1");
    positive(mp.mu2, "mu2");
    positive(mp.mu3, "mu3");
    positive(mp.beta, "beta");
    fraction(mp.eta, "eta");
    fraction(mp.epsilon, "epsilon");
    positive(mp.p, "p");
    positive(mp.q, "q");
    amplitude(np.sigma1, "sigma1");
    amplitude(np.sigma2, "sigma2");
    amplitude(np.sigma3, "sigma3");

    if (!out.empty())
        throw ParamError(std::move(out));
    return ValidatedParams(mp, np);
}

/**
 * @brief Uniform time grid t_i = t0 + i * dt, i = 0..n_steps.
 *
 * Grid times are always recomputed from the index, never accumulated, so
 * they are reproducible exactly.
 */
class SimGrid {
public:
    SimGrid(double t0, double t_end, std::size_t n_steps) : t0_(t0), t_end_(t_end), n_steps_(n_steps)
    {
        if (!std::isfinite(t0) || !std::isfinite(t_end) || !(t_end > t0))
            throw std::invalid_argument("SimGrid: require finite t_end > t0");
        if (n_steps == 0)
            throw std::invalid_argument("SimGrid: n_steps must be >= 1");
    }

    /// Grid with step as close as possible to `dt`; the step is then adjusted to land on t_end.
    static SimGrid from_step(double t0, double t_end, double dt)
    {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("SimGrid: dt must be positive");
        const double n = std::round((t_end - t0) / dt);
        if (n < 1.0)
            throw std::invalid_argument("SimGrid: dt larger than the time span");
        return SimGrid(t0, t_end, static_cast<std::size_t>(n));
    }

    double t0() const noexcept { return t0_; }
    double t_end() const noexcept { return t_end_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return (t_end_ - t0_) / static_cast<double>(n_steps_); }

    double time(std::size_t i) const noexcept
    {
        if (i == n_steps_)
            return t_end_;
        return t0_ + static_cast<double>(i) * dt();
    }

    /// Index of the grid point nearest to t (clamped to the grid).
    std::size_t nearest_index(double t) const noexcept
    {
        const double k = std::round((t - t0_) / dt());
        if (k <= 0.0)
            return 0;
        if (k >= static_cast<double>(n_steps_))
            return n_steps_;
        return static_cast<std::size_t>(k);
    }

    /// Grid with `factor` times fewer steps over the same span.
    SimGrid coarsened(std::size_t factor) const
    {
        if (factor == 0 || n_steps_ % factor != 0)
            throw std::invalid_argument("SimGrid: factor must divide n_steps");
        return SimGrid(t0_, t_end_, n_steps_ / factor);
    }

    friend bool operator==(const SimGrid&, const SimGrid&) = default;

private:
    double t0_;
    double t_end_;
    std::size_t n_steps_;
};

/// Identifies one random stream: the run's master seed plus the path number.
struct RunSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
};

/**
 * @brief Gap in v <= 2(v + 1 - ln v) - (4 - 2 ln 2) for v > 0.
 *
 * Equals v + 2 - 2 ln v - (4 - 2 ln 2), which is nonnegative with its only
 * zero at v = 2. This bounds the barrier v + 1 - ln v used for positivity.
 */
inline double log_barrier_gap(double v)
{
    return 2.0 * (v + 1.0 - std::log(v)) - (4.0 - 2.0 * std::log(2.0)) - v;
}

/// A numerical scheme produced NaN or infinity.
class NonFiniteState : public std::runtime_error {
public:
    NonFiniteState(std::size_t step, std::string what_)
        : std::runtime_error(std::move(what_)), step_(step)
    {
    }

    std::size_t step() const noexcept { return step_; }
    std::size_t path() const noexcept { return path_; }
    bool has_path() const noexcept { return has_path_; }

    NonFiniteState with_path(std::size_t path) const
    {
        NonFiniteState e(step_, std::string(what()) + " (path " + std::to_string(path) + ")");
        e.path_ = path;
        e.has_path_ = true;
        return e;
    }

private:
    std::size_t step_;
    std::size_t path_ = 0;
    bool has_path_ = false;
};

}  // namespace hbvsde
