#pragma once

#include "hbvsde/core.hpp"
#include "hbvsde/hbv.hpp"
#include "hbvsde/sde.hpp"
#include "hbvsde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbvsde {

enum class ErgodicityVerdict { ErgodicConditionsHold, NotConcluded };

inline const char* to_string(ErgodicityVerdict v)
{
    return v == ErgodicityVerdict::ErgodicConditionsHold ? "ErgodicConditionsHold" : "NotConcluded";
}

enum class EquilibriumKind { Endemic, InfectionFree, UserSupplied };

inline const char* to_string(EquilibriumKind k)
{
    switch (k) {
        case EquilibriumKind::Endemic: return "endemic";
        case EquilibriumKind::InfectionFree: return "infection-free";
        case EquilibriumKind::UserSupplied: return "user-supplied";
    }
    return "unknown";
}

inline constexpr const char* kErgodicStatementNote =
    "The stated hypotheses (sigma1^2 >= mu1 - mu*, sigma2^2 >= mu2 - mu* + (1-eps)p/2, "
    "mu3 >= mu3 - (1-eps)p/2) contradict the Lyapunov argument, which needs k1, k2, k3 > 0. "
    "This verdict uses k1, k2, k3 > 0.";

/**
 * @brief Lyapunov-bound quantities for the stationary-distribution argument.
 *
 * LV <= -k1 (x-xb)^2 - k2 (y-yb)^2 - k3 (z-zb)^2 + omega with
 *   mu* = min(mu1, mu2)
 *   k1 = mu1 - mu* - sigma1^2
 *   k2 = mu2 - mu* + (1-eps)p/2 - sigma2^2
 *   k3 = mu3 - (1-eps)p/2 - sigma3^2
 *   omega = sigma1^2 xb + sigma2^2 yb + sigma3^2 zb^2
 *
 * omega_squared = sigma1^2 xb^2 + sigma2^2 yb^2 + sigma3^2 zb^2 is what the
 * bound x^2 <= 2(x-a)^2 + 2a^2 actually yields term by term; both are reported.
 */
struct ErgodicityReport {
    double mu_star = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double omega = 0.0;
    double omega_squared = 0.0;
    StateVec equilibrium;
    EquilibriumKind equilibrium_kind = EquilibriumKind::UserSupplied;
    double r0 = 0.0;
    ErgodicityVerdict verdict = ErgodicityVerdict::NotConcluded;
    std::string statement_discrepancy_note = kErgodicStatementNote;
    std::vector<std::string> notes;
};

inline ErgodicityReport check_ergodicity(const ValidatedParams& vp, const StateVec& equilibrium,
                                         EquilibriumKind kind = EquilibriumKind::UserSupplied)
{
    const auto& m = vp.model();
    const auto& n = vp.noise();
    const double s1 = n.sigma1 * n.sigma1;
    const double s2 = n.sigma2 * n.sigma2;
    const double s3 = n.sigma3 * n.sigma3;
    const double half_prod = 0.5 * (1.0 - m.epsilon) * m.p;

    ErgodicityReport r;
    r.mu_star = std::min(m.mu1, m.mu2);
    r.k1 = m.mu1 - r.mu_star - s1;
    r.k2 = m.mu2 - r.mu_star + half_prod - s2;
    r.k3 = m.mu3 - half_prod - s3;
    r.equilibrium = equilibrium;
    r.equilibrium_kind = kind;
    r.r0 = basic_reproduction_number(m);
    r.omega = s1 * equilibrium.x + s2 * equilibrium.y + s3 * equilibrium.z * equilibrium.z;
    r.omega_squared = s1 * equilibrium.x * equilibrium.x + s2 * equilibrium.y * equilibrium.y +
                      s3 * equilibrium.z * equilibrium.z;
    r.verdict = (r.k1 > 0.0 && r.k2 > 0.0 && r.k3 > 0.0) ? ErgodicityVerdict::ErgodicConditionsHold
                                                         : ErgodicityVerdict::NotConcluded;

    if (n.is_zero())
        r.notes.emplace_back("deterministic-degenerate: all sigma are zero, omega = 0 and the bound pins the path to "
                             "the equilibrium");
    if (r.r0 <= 1.0)
        r.notes.emplace_back("r0 <= 1 (r0 is a derived threshold, not a model input): no endemic equilibrium exists; "
                             "the argument assumes r0 > 1");
    return r;
}

/// Uses the endemic equilibrium when it exists, otherwise the infection-free one.
inline ErgodicityReport check_ergodicity(const ValidatedParams& vp)
{
    const auto eq = equilibria(vp);
    if (eq.endemic)
        return check_ergodicity(vp, *eq.endemic, EquilibriumKind::Endemic);
    return check_ergodicity(vp, eq.infection_free, EquilibriumKind::InfectionFree);
}

/// Trapezoid time average of k1 (x-xb)^2 + k2 (y-yb)^2 + k3 (z-zb)^2 along one path.
inline double ellipsoid_time_average(const Trajectory& traj, const StateVec& eq, double k1, double k2, double k3)
{
    if (traj.dim() != 3)
        throw std::invalid_argument("ellipsoid_time_average: need a three-component trajectory");
    std::vector<double> g(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double dx = traj.value(k, 0) - eq.x;
        const double dy = traj.value(k, 1) - eq.y;
        const double dz = traj.value(k, 2) - eq.z;
        g[k] = k1 * dx * dx + k2 * dy * dy + k3 * dz * dz;
    }
    const auto t = traj.times();
    return stats::trapezoid(t, g) / (t.back() - t.front());
}

struct EllipsoidCheck {
    std::vector<double> per_path;
    double mean = 0.0;
    double omega = 0.0;
    double omega_squared = 0.0;
    double slack = 1.5;
    bool pass = false;          ///< mean <= slack * omega
    bool pass_squared = false;  ///< mean <= slack * omega_squared
};

/// Ensemble version; requires the k-positivity verdict. The limsup bound is only asymptotic, hence `slack`.
inline EllipsoidCheck ellipsoid_time_average(std::span<const Trajectory> paths, const ErgodicityReport& report,
                                             double slack = 1.5)
{
    if (report.verdict != ErgodicityVerdict::ErgodicConditionsHold)
        throw std::invalid_argument("ellipsoid_time_average: ergodicity conditions do not hold");
    if (paths.empty())
        throw std::invalid_argument("ellipsoid_time_average: no trajectories");
    EllipsoidCheck c;
    c.slack = slack;
    c.omega = report.omega;
    c.omega_squared = report.omega_squared;
    for (const auto& p : paths)
        c.per_path.push_back(ellipsoid_time_average(p, report.equilibrium, report.k1, report.k2, report.k3));
    c.mean = stats::mean(c.per_path);
    c.pass = c.mean <= slack * c.omega;
    c.pass_squared = c.mean <= slack * c.omega_squared;
    return c;
}

}  // namespace hbvsde
