#include "hbvsde/ergodicity.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hbvsde;

TEST(Ergodicity, ReferenceArithmetic)
{
    const auto r = check_ergodicity(validate_params(ModelParams::reference(), NoiseParams::reference()));
    EXPECT_EQ(r.mu_star, 5.0);
    EXPECT_NEAR(r.k1, 14.75, 1e-12);
    EXPECT_NEAR(r.k2, 0.44, 1e-12);
    EXPECT_NEAR(r.k3, 5.56, 1e-12);
    EXPECT_EQ(r.equilibrium_kind, EquilibriumKind::InfectionFree);
    EXPECT_EQ(r.equilibrium, (StateVec{5.0, 0.0, 0.0}));
    EXPECT_NEAR(r.omega, 1.25, 1e-12);
    EXPECT_NEAR(r.omega_squared, 6.25, 1e-12);
    EXPECT_EQ(r.verdict, ErgodicityVerdict::ErgodicConditionsHold);
    EXPECT_FALSE(r.statement_discrepancy_note.empty());
}

TEST(Ergodicity, SubthresholdIsNoted)
{
    const auto r = check_ergodicity(validate_params(ModelParams::reference(), NoiseParams::reference()));
    bool found = false;
    for (const auto& n : r.notes)
        found = found || n.find("r0 <= 1") != std::string::npos;
    EXPECT_TRUE(found);
}

TEST(Ergodicity, EndemicEquilibriumChosenAboveThreshold)
{
    auto m = ModelParams::reference();
    m.beta = 60.0;
    const auto vp = validate_params(m, NoiseParams::reference());
    const auto r = check_ergodicity(vp);
    EXPECT_EQ(r.equilibrium_kind, EquilibriumKind::Endemic);
    const auto e = *equilibria(vp).endemic;
    EXPECT_EQ(r.equilibrium, e);
    EXPECT_NEAR(r.omega, 0.25 * e.x + 0.36 * e.y + 0.64 * e.z * e.z, 1e-9 * r.omega);
}

TEST(Ergodicity, ZeroCoefficientIsNotConcluded)
{
    auto m = ModelParams::reference();
    m.mu1 = 5.25;  // mu* = 5, k1 = 0.25 - 0.5^2 = 0
    const auto r = check_ergodicity(validate_params(m, NoiseParams::reference()));
    EXPECT_EQ(r.k1, 0.0);
    EXPECT_EQ(r.verdict, ErgodicityVerdict::NotConcluded);
}

TEST(Ergodicity, LargeNoiseBreaksConditions)
{
    const auto r = check_ergodicity(validate_params(ModelParams::reference(), {0.5, 0.6, 3.0}));
    EXPECT_LT(r.k3, 0.0);
    EXPECT_EQ(r.verdict, ErgodicityVerdict::NotConcluded);
}

TEST(Ergodicity, DeterministicCaseHasZeroOmega)
{
    const auto r = check_ergodicity(validate_params(ModelParams::reference(), NoiseParams::none()));
    EXPECT_EQ(r.omega, 0.0);
    EXPECT_EQ(r.notes.front().rfind("deterministic-degenerate", 0), 0u);
}

TEST(Ergodicity, EllipsoidAverageOfConstantPath)
{
    const SimGrid g(0.0, 1.0, 4);
    Trajectory tr(g, 3, Scheme::EulerMaruyama, 1);
    for (int k = 0; k < 5; ++k) {
        const std::array<double, 3> s{6.0, 1.0, 2.0};
        tr.push(s);
    }
    // 1*(1)^2 + 2*(1)^2 + 3*(2)^2 = 15
    EXPECT_NEAR(ellipsoid_time_average(tr, {5.0, 0.0, 0.0}, 1.0, 2.0, 3.0), 15.0, 1e-12);
}

TEST(Ergodicity, EnsembleEllipsoidRequiresVerdict)
{
    auto m = ModelParams::reference();
    m.mu1 = 5.25;
    const auto bad = check_ergodicity(validate_params(m, NoiseParams::reference()));
    std::vector<Trajectory> none;
    EXPECT_THROW(ellipsoid_time_average(none, bad), std::invalid_argument);
    const auto good = check_ergodicity(validate_params(ModelParams::reference(), NoiseParams::reference()));
    EXPECT_THROW(ellipsoid_time_average(none, good), std::invalid_argument);
}
