#pragma once

// Sufficient conditions for almost-sure exponential decay of (y, z).
//
// With A = (1-eps)p - q - mu2 and C = (1-eta) beta gamma - mu3, the Ito
// differential of ln(y+z) is bounded by a quadratic form in (y, z) with
//
//       M = | A + sigma2^2/2      C               |
//           | A                   C + sigma3^2/2  |
//
// and the conditions are
//   (a)  A + sigma2^2/2 < 0
//   (b)  C * A <= (A + sigma2^2/2)(C + sigma3^2/2)
// plus negative definiteness of M, checked on its symmetric part since a
// quadratic form only sees (M + M^T)/2.

#include "hbvsde/core.hpp"
#include "hbvsde/hbv.hpp"
#include "hbvsde/sde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbvsde {

enum class GammaSource { UserSupplied, DefaultLambdaOverMu1, TrajectoryMax };

inline const char* to_string(GammaSource g)
{
    switch (g) {
        case GammaSource::UserSupplied: return "user-supplied";
        case GammaSource::DefaultLambdaOverMu1: return "default lambda/mu1";
        case GammaSource::TrajectoryMax: return "trajectory max";
    }
    return "unknown";
}

/// Upper bound used for x in the infection term.
struct Gamma {
    double value;
    GammaSource source;
};

/// Running maximum of x over a trajectory.
inline Gamma gamma_from_trajectory(const Trajectory& traj)
{
    double mx = traj.value(0, 0);
    for (std::size_t k = 1; k < traj.size(); ++k)
        mx = std::max(mx, traj.value(k, 0));
    return {mx, GammaSource::TrajectoryMax};
}

enum class StabilityVerdict { Stable, NotConcluded };

inline const char* to_string(StabilityVerdict v) { return v == StabilityVerdict::Stable ? "Stable" : "NotConcluded"; }

using Matrix2 = std::array<std::array<double, 2>, 2>;

struct StabilityReport {
    double cond_a_value = 0.0;
    bool cond_a_holds = false;
    double cond_b_lhs = 0.0;
    double cond_b_rhs = 0.0;
    bool cond_b_holds = false;
    Gamma gamma{0.0, GammaSource::DefaultLambdaOverMu1};
    Matrix2 matrix{};
    std::array<double, 2> sym_eigenvalues{};  ///< ascending
    double lambda_max = 0.0;
    bool negative_definite = false;
    StabilityVerdict verdict = StabilityVerdict::NotConcluded;
    std::vector<std::string> notes;
};

/// Eigenvalues (ascending) of the symmetric part of a 2x2 matrix.
inline std::array<double, 2> symmetric_part_eigenvalues(const Matrix2& m)
{
    const double a = m[0][0];
    const double d = m[1][1];
    const double off = 0.5 * (m[0][1] + m[1][0]);
    const double center = 0.5 * (a + d);
    const double radius = std::hypot(0.5 * (a - d), off);
    return {center - radius, center + radius};
}

inline double quadratic_form(const Matrix2& m, double u, double v)
{
    return u * (m[0][0] * u + m[0][1] * v) + v * (m[1][0] * u + m[1][1] * v);
}

inline StabilityReport check_stability(const ValidatedParams& vp, std::optional<Gamma> gamma = std::nullopt)
{
    const auto& m = vp.model();
    const auto& n = vp.noise();
    StabilityReport r;
    r.gamma = gamma.value_or(Gamma{m.lambda / m.mu1, GammaSource::DefaultLambdaOverMu1});
    if (!(r.gamma.value > 0.0) || !std::isfinite(r.gamma.value))
        throw std::invalid_argument("check_stability: gamma must be positive");

    const double untreated_y = (1.0 - m.epsilon) * m.p - m.q - m.mu2;
    const double untreated_z = (1.0 - m.eta) * m.beta * r.gamma.value - m.mu3;
    const double half_s2 = 0.5 * n.sigma2 * n.sigma2;
    const double half_s3 = 0.5 * n.sigma3 * n.sigma3;

    r.cond_a_value = untreated_y + half_s2;
    r.cond_a_holds = r.cond_a_value < 0.0;
    r.cond_b_lhs = untreated_z * untreated_y;
    r.cond_b_rhs = r.cond_a_value * (untreated_z + half_s3);
    r.cond_b_holds = r.cond_b_lhs <= r.cond_b_rhs;

    r.matrix = {{{r.cond_a_value, untreated_z}, {untreated_y, untreated_z + half_s3}}};
    r.sym_eigenvalues = symmetric_part_eigenvalues(r.matrix);
    r.lambda_max = r.sym_eigenvalues[1];
    r.negative_definite = r.sym_eigenvalues[0] < 0.0 && r.sym_eigenvalues[1] < 0.0;

    r.verdict = (r.cond_a_holds && r.cond_b_holds && r.negative_definite) ? StabilityVerdict::Stable
                                                                           : StabilityVerdict::NotConcluded;

    if (n.sigma2 == 0.0 && n.sigma3 == 0.0)
        r.notes.emplace_back("deterministic-degenerate: sigma2 = sigma3 = 0, so condition (b) is an equality and "
                             "the symmetric part has nonpositive determinant; the noise terms cannot close the "
                             "inequality");
    if (r.cond_a_holds && !r.cond_b_holds)
        r.notes.emplace_back("condition (b) fails as stated for this gamma; both sides are reported");
    if (r.cond_a_holds && !r.negative_definite)
        r.notes.emplace_back("symmetric part of the matrix is not negative definite; lambda_max >= 0");
    r.notes.emplace_back(std::string("gamma = ") + std::to_string(r.gamma.value) + " (" + to_string(r.gamma.source) +
                         ")");
    return r;
}

}  // namespace hbvsde
