#include "turnpike/pde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <string>

using namespace turnpike;

namespace {

DiffusionModel linear(double rho) { return DiffusionModel::ou(0.05, 1.0, 1.0, 1.0, 1.0, rho); }

/// v^T = exp(phi(tau) + psi(tau) y^2/2) for the linear model with p = -1, where
/// psi' = psi^2 - 2 kappa psi - q/delta and phi' = psi/2 + p r/delta, integrated by RK4.
class RiccatiOracle
{
  public:
    explicit RiccatiOracle(double rho)
    {
        double const p = -1.0;
        double const q = p / (p - 1.0);
        delta_ = 1.0 / (1.0 - q * rho * rho);
        kappa_ = 1.0 + q * rho;
        qd_ = q / delta_;
        prd_ = p * 0.05 / delta_;
        rho_ = rho;
    }

    /// (phi, psi) at tau.
    std::pair<double, double> at(double tau) const
    {
        int const steps = std::max(1, static_cast<int>(std::ceil(tau / 1e-3)));
        double const h = tau / steps;
        double phi = 0.0;
        double psi = 0.0;
        auto f = [&](double s) { return std::pair{s / 2.0 + prd_, s * s - 2.0 * kappa_ * s - qd_}; };
        for (int k = 0; k < steps; ++k)
        {
            auto const [a1, b1] = f(psi);
            auto const [a2, b2] = f(psi + 0.5 * h * b1);
            auto const [a3, b3] = f(psi + 0.5 * h * b2);
            auto const [a4, b4] = f(psi + h * b3);
            phi += h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0;
            psi += h * (b1 + 2 * b2 + 2 * b3 + b4) / 6.0;
        }
        return {phi, psi};
    }

    double v(double tau, double y) const
    {
        auto const [phi, psi] = at(tau);
        return std::exp(phi + 0.5 * psi * y * y);
    }

    double policy(double tau, double y) const { return y * (1.0 + delta_ * rho_ * at(tau).second) / 2.0; }

  private:
    double delta_, kappa_, qd_, prd_, rho_;
};

struct Setup
{
    DerivedCoefficients coeffs;
    EigenResult eigen;
};

Setup setup(double rho, std::size_t n = 2000)
{
    auto c = derive_coefficients(linear(rho), -1.0, 0.0);
    auto e = solve_principal(c, Grid1D::uniform(-8.0, 8.0, n));
    return {std::move(c), std::move(e)};
}

}  // namespace

TEST(RiccatiOracle, CoefficientsForNegativeCorrelation)
{
    // psi' = psi^2 - 1.5 psi - 0.4375 has the stable root -0.25 = -a*.
    RiccatiOracle const o(-0.5);
    EXPECT_NEAR(o.at(40.0).second, -0.25, 1e-12);
    EXPECT_NEAR(o.policy(40.0, 1.0), 4.0 / 7.0, 1e-12);
}

TEST(Horizon, MatchesRiccatiOracle)
{
    auto const s = setup(-0.5);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 5.0);
    RiccatiOracle const o(-0.5);
    double worst = 0.0;
    for (std::size_t j = 0; j <= sol.steps(); j += 5)
    {
        double const tau = 5.0 - sol.time(j);
        auto const [phi, psi] = o.at(tau);
        auto const row = sol.v_row(j);
        for (std::size_t i = 0; i < sol.grid().size(); ++i)
        {
            double const y = sol.grid()[i];
            if (std::fabs(y) <= 3.0)
                worst = std::max(worst, std::fabs(row[i] / std::exp(phi + 0.5 * psi * y * y) - 1.0));
        }
    }
    EXPECT_LE(worst, 1e-4);
    RecordProperty("max_relative_error", std::to_string(worst));
    std::printf("max relative error %.3e\n", worst);
}

TEST(Horizon, TerminalConditionIsExact)
{
    auto const s = setup(-0.5, 400);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 2.0);
    for (double v : sol.v_row(sol.steps()))
        EXPECT_EQ(v, 1.0);
}

TEST(Horizon, TwoRoutesAgree)
{
    auto const s = setup(-0.5, 1000);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 5.0);
    double worst = 0.0;
    for (std::size_t j = 0; j <= sol.steps(); ++j)
    {
        double const growth = std::exp(s.eigen.lambda * (5.0 - sol.time(j)));
        auto const v = sol.v_row(j);
        auto const h = sol.h_row(j);
        for (std::size_t i = 0; i < v.size(); ++i)
            worst = std::max(worst, std::fabs(growth * s.eigen.v_hat[i] * h[i] / v[i] - 1.0));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Horizon, PositiveEverywhere)
{
    auto const s = setup(-0.5, 500);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 3.0);
    for (std::size_t j = 0; j <= sol.steps(); ++j)
    {
        for (double v : sol.v_row(j))
            ASSERT_GT(v, 0.0);
        for (double h : sol.h_row(j))
            ASSERT_GT(h, 0.0);
    }
}

TEST(Horizon, ConstantCoefficients)
{
    auto const c = derive_coefficients(DiffusionModel::black_scholes(0.01, 0.08, 0.2, 0.3), -1.0, 0.0);
    EigenOptions opt;
    opt.check_window = false;
    auto const e = solve_principal(c, Grid1D::uniform(-8.0, 8.0, 800), opt);
    auto const sol = solve_horizon(c, e, 1.0);
    double const c0 = c.c(0.0);
    for (std::size_t j = 0; j <= sol.steps(); j += 10)
    {
        double const expected = std::exp(c0 * (1.0 - sol.time(j)));
        for (double y : {-2.0, -0.5, 0.0, 1.0, 2.0})
        {
            EXPECT_NEAR(sol.v_at(sol.time(j), y) / expected, 1.0, 1e-6);
            EXPECT_NEAR(finite_policy(sol, c, sol.time(j), y)(0), 0.08 / (0.04 * 2.0), 1e-5);
        }
    }
}

TEST(Horizon, RejectsNonpositiveHorizon)
{
    auto const s = setup(-0.5, 200);
    EXPECT_THROW(solve_horizon(s.coeffs, s.eigen, 0.0), InvalidInput);
}

TEST(FinitePolicy, MertonAtTerminalTime)
{
    auto const s = setup(-0.5, 1000);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 2.0);
    for (double y : {-3.0, -1.0, 0.5, 2.5})
        EXPECT_NEAR(finite_policy(sol, s.coeffs, 2.0, y)(0), y / 2.0, 1e-12);
}

TEST(FinitePolicy, MatchesRiccatiOracle)
{
    auto const s = setup(-0.5);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 5.0);
    RiccatiOracle const o(-0.5);
    for (double t : {0.0, 2.5, 4.0, 4.9})
        for (double y : {-2.0, 1.0, 3.0})
            EXPECT_NEAR(finite_policy(sol, s.coeffs, t, y)(0), o.policy(5.0 - t, y), 1e-4);
}

TEST(FinitePolicy, ZeroCorrelationIsMyopic)
{
    auto const s = setup(0.0, 1000);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 3.0);
    for (double t : {0.0, 1.3, 3.0})
        for (double y : {-2.0, 0.7, 3.0})
            EXPECT_NEAR(finite_policy(sol, s.coeffs, t, y)(0), y / 2.0, 1e-12);
}

TEST(FinitePolicy, OutOfMeshQueries)
{
    auto const s = setup(-0.5, 200);
    auto const sol = solve_horizon(s.coeffs, s.eigen, 1.0);
    EXPECT_THROW(finite_policy(sol, s.coeffs, 1.5, 0.0), WindowError);
    EXPECT_THROW(finite_policy(sol, s.coeffs, 0.5, 9.0), WindowError);
}

TEST(FinitePolicy, ConvergesToLongRunPolicy)
{
    auto const s = setup(-0.5, 1000);
    double const y = 1.5;
    double const target = long_run_policy(s.eigen, s.coeffs, y)(0);
    std::vector<double> gaps;
    for (double T : {1.0, 2.0, 4.0, 8.0, 16.0})
        gaps.push_back(std::fabs(finite_policy(solve_horizon(s.coeffs, s.eigen, T), s.coeffs, 0.0, y)(0) - target));
    for (std::size_t k = 1; k < gaps.size(); ++k)
        EXPECT_LT(gaps[k], gaps[k - 1]);
    EXPECT_LE(gaps.back(), 0.1 * gaps.front());
}

TEST(Horizon, LongRunValueGrowthSettles)
{
    auto const s = setup(-0.5, 1000);
    std::vector<double> level;
    for (double T : {2.0, 4.0, 8.0, 16.0})
        level.push_back(std::log(solve_horizon(s.coeffs, s.eigen, T).v_at(0.0, 0.5)) - s.eigen.lambda * T);
    for (std::size_t k = 2; k < level.size(); ++k)
        EXPECT_LT(std::fabs(level[k] - level[k - 1]), std::fabs(level[k - 1] - level[k - 2]) + 1e-12);
    EXPECT_LT(std::fabs(level[3] - level[2]), 1e-6);
}
