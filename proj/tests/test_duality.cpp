#include "turnpike/duality.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace turnpike;

namespace {

BSMarket benchmark_market() { return {0.01, 0.4, 1.0}; }
MixtureUtility benchmark_mixture() { return {{1.0, 1.0}, {2.0, 8.0}}; }

// Brute-force reference: plain bisection for I, composite Simpson for expectations.
struct BruteForce
{
    BSMarket market;
    double T;

    static double inverse(double z)
    {
        double lo = -50.0, hi = 50.0;  // log x
        for (int k = 0; k < 120; ++k)
        {
            double const mid = 0.5 * (lo + hi);
            double const u = std::exp(-2.0 * mid) + std::exp(-8.0 * mid);
            (u > z ? lo : hi) = mid;
        }
        return std::exp(0.5 * (lo + hi));
    }

    template <class F>
    static double simpson(F const& f, double a, double b, int n)
    {
        double const h = (b - a) / n;
        double s = f(a) + f(b);
        for (int k = 1; k < n; ++k)
            s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
        return s * h / 3.0;
    }

    double deflator(double xi) const { return std::exp(market.log_deflator(T, xi)); }
    static double phi(double xi) { return std::exp(-0.5 * xi * xi) / std::sqrt(2.0 * M_PI); }

    double budget(double y) const
    {
        return simpson([&](double xi) { return phi(xi) * deflator(xi) * inverse(y * deflator(xi)); }, -20.0, 20.0,
                       4000);
    }

    double multiplier() const
    {
        double lo = -10.0, hi = 10.0;
        for (int k = 0; k < 60; ++k)
        {
            double const mid = 0.5 * (lo + hi);
            (budget(std::exp(mid)) > 1.0 ? lo : hi) = mid;
        }
        return std::exp(0.5 * (lo + hi));
    }

    /// E^{P^T}|r - 1| with the reference investor at p = -1.
    double moment(double y1) const
    {
        double const y0 = std::exp(-0.05 * T);
        auto x0 = [&](double xi) { return std::pow(y0 * deflator(xi), -0.5); };
        auto f = [&](double xi) {
            return phi(xi) * (1.0 / x0(xi)) / y0 * std::fabs(inverse(y1 * deflator(xi)) / x0(xi) - 1.0);
        };
        return simpson(f, -20.0, 20.0, 100000);
    }
};

}  // namespace

TEST(InverseMarginal, PowerAndLogClosedForms)
{
    EXPECT_NEAR(inverse_marginal(PowerUtility{-1.0}, 4.0), 0.5, 1e-15);
    EXPECT_NEAR(inverse_marginal(LogUtility{}, 0.25), 4.0, 1e-15);
    EXPECT_NEAR(inverse_marginal(PowerUtility{0.5}, 2.0), 0.25, 1e-15);
}

TEST(InverseMarginal, MixtureSolvesScalarEquation)
{
    MixtureUtility const mx = benchmark_mixture();
    // x^-2 + x^-8 = 2 has the root x = 1.
    EXPECT_NEAR(inverse_marginal(mx, 2.0), 1.0, 1e-14);
    for (double z : {1e-6, 0.01, 0.7, 2.0, 3.5, 50.0, 1e8})
    {
        double const x = inverse_marginal(mx, z);
        EXPECT_LT(std::fabs(marginal(mx, x) - z) / z, 1e-12) << "z=" << z;
        EXPECT_NEAR(x / BruteForce::inverse(z), 1.0, 1e-12) << "z=" << z;
    }
}

TEST(InverseMarginal, UnequalWeightsAndThreeTerms)
{
    MixtureUtility const mx{{0.3, 2.0, 5.0}, {0.5, 3.0, 12.0}};
    for (double z : {1e-3, 0.4, 1.0, 9.0, 1e5})
    {
        double const x = inverse_marginal(mx, z);
        EXPECT_LT(std::fabs(marginal(mx, x) - z) / z, 1e-12) << "z=" << z;
    }
}

TEST(InverseMarginal, RejectsNonpositiveArgument)
{
    EXPECT_THROW(inverse_marginal(LogUtility{}, 0.0), InvalidInput);
    EXPECT_THROW(inverse_marginal(benchmark_mixture(), -1.0), InvalidInput);
}

TEST(GaussHermite, ReproducesNormalMoments)
{
    for (std::size_t n : {64, 128, 256})
    {
        HermiteRule const& rule = hermite_rule(n);
        double m0 = 0.0, m2 = 0.0, m4 = 0.0, m6 = 0.0, e = 0.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            double const x = rule.nodes[k], w = rule.weights[k];
            m0 += w;
            m2 += w * x * x;
            m4 += w * std::pow(x, 4);
            m6 += w * std::pow(x, 6);
            e += w * std::exp(3.0 * x);
        }
        EXPECT_NEAR(m0, 1.0, 1e-14);
        EXPECT_NEAR(m2, 1.0, 1e-13);
        EXPECT_NEAR(m4, 3.0, 1e-12);
        EXPECT_NEAR(m6, 15.0, 1e-11);
        EXPECT_NEAR(e / std::exp(4.5), 1.0, 1e-13);
    }
}

TEST(LagrangeMultiplier, PowerMatchesMertonClosedForm)
{
    BSMarket const m = benchmark_market();
    EXPECT_NEAR(lagrange_multiplier(PowerUtility{-1.0}, m, 10.0), 0.60653, 5e-6);
    for (double p : {-3.0, -1.0, 0.3})
        for (double T : {0.5, 5.0, 40.0})
            for (double x0 : {1.0, 2.5})
            {
                double const l = m.lambda();
                double const expect = std::pow(x0, p - 1.0) * std::exp(p * (m.r + l * l / (2.0 * (1.0 - p))) * T);
                EXPECT_NEAR(lagrange_multiplier(PowerUtility{p}, m, T, x0) / expect, 1.0, 1e-10)
                    << "p=" << p << " T=" << T << " x0=" << x0;
            }
}

TEST(LagrangeMultiplier, LogIsReciprocalCapital)
{
    EXPECT_DOUBLE_EQ(lagrange_multiplier(LogUtility{}, benchmark_market(), 3.0, 2.0), 0.5);
    EXPECT_DOUBLE_EQ(lagrange_multiplier(LogUtility{}, BSMarket{0.2, -1.0, 0.5}, 17.0, 1.0), 1.0);
}

TEST(LagrangeMultiplier, MixtureBracketedBySinglePowers)
{
    // x^-2 + x^-8 lies between 2x^-2 and 2x^-8, so I and the multiplier lie between theirs.
    BSMarket const m = benchmark_market();
    double const y = lagrange_multiplier(benchmark_mixture(), m, 1.0);
    double const y2 = lagrange_multiplier(MixtureUtility{{2.0}, {2.0}}, m, 1.0);
    double const y8 = lagrange_multiplier(MixtureUtility{{2.0}, {8.0}}, m, 1.0);
    EXPECT_GT(y, std::min(y2, y8));
    EXPECT_LT(y, std::max(y2, y8));
}

TEST(LagrangeMultiplier, MatchesBruteForce)
{
    BruteForce const bf{benchmark_market(), 5.0};
    EXPECT_NEAR(lagrange_multiplier(benchmark_mixture(), benchmark_market(), 5.0) / bf.multiplier(), 1.0, 1e-9);
}

TEST(LagrangeMultiplier, RejectsBadInputs)
{
    EXPECT_THROW(lagrange_multiplier(LogUtility{}, benchmark_market(), 0.0), InvalidInput);
    EXPECT_THROW(lagrange_multiplier(LogUtility{}, benchmark_market(), 1.0, 0.0), InvalidInput);
    EXPECT_THROW(lagrange_multiplier(LogUtility{}, BSMarket{0.01, 0.4, 0.0}, 1.0), InvalidInput);
}

TEST(LagrangeMultiplier, OverflowingBudgetIsIllPosed)
{
    // p close to 1: I(z) = z^{-100} overflows the budget integrand in the lognormal tail.
    EXPECT_THROW(lagrange_multiplier(PowerUtility{0.99}, BSMarket{0.01, 2.0, 1.0}, 50.0), IllPosed);
}

TEST(AbstractTurnpike, PowerControlHasZeroMoments)
{
    auto const rows = abstract_turnpike_moments(PowerUtility{-1.0}, benchmark_market(), {5, 10, 20, 40, 80});
    for (auto const& s : rows)
    {
        EXPECT_EQ(s.moment, 0.0) << "T=" << s.T;
        EXPECT_DOUBLE_EQ(s.multiplier_ratio, 1.0);
    }
}

TEST(AbstractTurnpike, MatchesBruteForceAtShortHorizon)
{
    auto const rows = abstract_turnpike_moments(benchmark_mixture(), benchmark_market(), {5.0});
    BruteForce const bf{benchmark_market(), 5.0};
    EXPECT_NEAR(rows[0].moment, bf.moment(rows[0].multiplier_generic), 1e-8);
}

TEST(AbstractTurnpike, BudgetAndMyopicMass)
{
    auto const rows = abstract_turnpike_moments(benchmark_mixture(), benchmark_market(), {1, 5, 20, 80});
    for (auto const& s : rows)
    {
        EXPECT_NEAR(s.budget, 1.0, 1e-9) << "T=" << s.T;
        EXPECT_NEAR(s.mass, 1.0, 1e-8) << "T=" << s.T;
        EXPECT_GT(s.multiplier_generic, 0.0);
        EXPECT_GT(s.multiplier_power, 0.0);
        EXPECT_GE(s.moment, 0.0);
    }
}

TEST(AbstractTurnpike, WeightScalingInvariance)
{
    MixtureUtility scaled = benchmark_mixture();
    for (double& w : scaled.weights)
        w *= 3.0;
    auto const a = abstract_turnpike_moments(benchmark_mixture(), benchmark_market(), {5, 40});
    auto const b = abstract_turnpike_moments(scaled, benchmark_market(), {5, 40});
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        EXPECT_NEAR(b[k].multiplier_generic / a[k].multiplier_generic, 3.0, 3e-9);
        EXPECT_NEAR(b[k].moment, a[k].moment, 1e-9);
        EXPECT_NEAR(b[k].multiplier_ratio, a[k].multiplier_ratio, 1e-9);
    }
}

TEST(AbstractTurnpike, DeterministicMarketGivesUnitRatio)
{
    auto const rows = abstract_turnpike_moments(benchmark_mixture(), BSMarket{0.05, 0.0, 1.0}, {1, 10, 50});
    for (auto const& s : rows)
    {
        EXPECT_LT(s.moment, 1e-12) << "T=" << s.T;
        EXPECT_NEAR(s.multiplier_ratio, s.multiplier_power / s.multiplier_generic, 0.0);
    }
}

TEST(AbstractTurnpike, RatioUsesLeadingWeightNormalization)
{
    // Master utility of a planner: the gamma=2 term carries weight 1/2.
    MixtureUtility const planner{{0.5, 1.0}, {2.0, 8.0}};
    auto const rows = abstract_turnpike_moments(planner, benchmark_market(), {1280});
    EXPECT_NEAR(rows[0].multiplier_ratio, 1.0, 1e-4);
    EXPECT_LT(rows[0].moment, 1e-4);
}

TEST(AbstractTurnpike, MultiplierRatioBoundAtLongHorizons)
{
    auto const rows = abstract_turnpike_moments(benchmark_mixture(), benchmark_market(), {40, 80});
    for (auto const& s : rows)
        EXPECT_GE(s.multiplier_ratio, 0.99) << "T=" << s.T;
}

TEST(AbstractTurnpike, ConvergesAtVeryLongHorizons)
{
    auto const rows = abstract_turnpike_moments(benchmark_mixture(), benchmark_market(), {160, 320, 640, 1280});
    for (std::size_t k = 1; k < rows.size(); ++k)
    {
        EXPECT_LT(rows[k].moment, rows[k - 1].moment);
        EXPECT_GT(rows[k].multiplier_ratio, rows[k - 1].multiplier_ratio);
    }
    EXPECT_LT(rows.back().moment, 1e-5);
    EXPECT_NEAR(rows.back().multiplier_ratio, 1.0, 1e-6);
}
