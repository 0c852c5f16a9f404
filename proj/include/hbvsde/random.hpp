#pragma once

// Reproducible random streams and Wiener increments.
//
// Stream derivation (bit-exact contract):
//
//   mix64(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//              return z ^ (z >> 31)                        (all arithmetic mod 2^64)
//
//   key(master, path) = mix64(master ^ mix64(path + 0x9E3779B97F4A7C15))
//
// The key seeds std::mt19937_64, whose output sequence is fixed by the C++
// standard. Since mix64 is a bijection, distinct path indices under one master
// seed always give distinct keys, and any path can be generated without
// touching the others.
//
// Normal variates use the basic Box-Muller transform on two 53-bit uniforms
//   u1 = ((a >> 11) + 1) * 2^-53  in (0, 1]
//   u2 =  (b >> 11)      * 2^-53  in [0, 1)
//   r  = sqrt(-2 ln u1);  n0 = r cos(2 pi u2);  n1 = r sin(2 pi u2)
// emitting n0 then n1. No rejection step, so the number of engine draws per
// normal is fixed.

#include "hbvsde/core.hpp"
#include "hbvsde/stats.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbvsde {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(const RunSeed& seed) noexcept
{
    return mix64(seed.master_seed ^ mix64(seed.path_index + 0x9E3779B97F4A7C15ULL));
}

/// Per-path random stream. A value type: copy it to fork, never share it across threads.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : engine_(key) {}

    std::uint64_t next_bits() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline RandomStream derive_stream(const RunSeed& seed) { return RandomStream(stream_key(seed)); }

class IndivisibleGrid : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * @brief Brownian increments for n_steps steps of `dims` independent Wiener processes.
 *
 * Stored column-major: all steps of dimension 0, then dimension 1, and so on.
 */
class IncrementMatrix {
public:
    IncrementMatrix(std::size_t n_steps, std::size_t dims, double dt)
        : n_steps_(n_steps), dims_(dims), dt_(dt), data_(n_steps * dims, 0.0)
    {
        if (dims == 0)
            throw std::invalid_argument("IncrementMatrix: dims must be >= 1");
    }

    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t dims() const noexcept { return dims_; }
    double dt() const noexcept { return dt_; }

    double operator()(std::size_t step, std::size_t dim) const noexcept { return data_[dim * n_steps_ + step]; }
    double& operator()(std::size_t step, std::size_t dim) noexcept { return data_[dim * n_steps_ + step]; }

    std::span<const double> column(std::size_t dim) const { return {data_.data() + dim * n_steps_, n_steps_}; }
    std::span<double> column(std::size_t dim) { return {data_.data() + dim * n_steps_, n_steps_}; }

    /// Copies the increments of one step (all dimensions) into `out`.
    void row(std::size_t step, std::span<double> out) const noexcept
    {
        for (std::size_t d = 0; d < dims_; ++d)
            out[d] = data_[d * n_steps_ + step];
    }

    /// Matrix made of a subset of the noise dimensions (same steps and dt).
    IncrementMatrix select_columns(std::span<const std::size_t> dims) const
    {
        IncrementMatrix out(n_steps_, dims.size(), dt_);
        for (std::size_t k = 0; k < dims.size(); ++k) {
            auto src = column(dims[k]);
            std::copy(src.begin(), src.end(), out.column(k).begin());
        }
        return out;
    }

    std::span<const double> raw() const noexcept { return data_; }

    friend bool operator==(const IncrementMatrix&, const IncrementMatrix&) = default;

private:
    std::size_t n_steps_;
    std::size_t dims_;
    double dt_;
    std::vector<double> data_;
};

/// Fills dimension 0 for every step first, then dimension 1, and so on.
inline IncrementMatrix sample_wiener_increments(const SimGrid& grid, RandomStream& stream, std::size_t dims)
{
    IncrementMatrix w(grid.n_steps(), dims, grid.dt());
    const double scale = std::sqrt(grid.dt());
    for (std::size_t d = 0; d < dims; ++d)
        for (auto& v : w.column(d))
            v = scale * stream.normal();
    return w;
}

/// Sums blocks of `factor` consecutive increments: the same Brownian path on a coarser grid.
inline IncrementMatrix coarsen_increments(const IncrementMatrix& fine, std::size_t factor)
{
    if (factor == 0 || fine.n_steps() % factor != 0)
        throw IndivisibleGrid("coarsen_increments: factor " + std::to_string(factor) + " does not divide " +
                              std::to_string(fine.n_steps()) + " steps");
    const std::size_t n = fine.n_steps() / factor;
    IncrementMatrix coarse(n, fine.dims(), fine.dt() * static_cast<double>(factor));
    for (std::size_t d = 0; d < fine.dims(); ++d) {
        auto src = fine.column(d);
        auto dst = coarse.column(d);
        for (std::size_t i = 0; i < n; ++i)
            dst[i] = stats::compensated_sum(src.subspan(i * factor, factor));
    }
    return coarse;
}

}  // namespace hbvsde
