#include "turnpike/eigen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace turnpike;

namespace {

DiffusionModel linear(double rho) { return DiffusionModel::ou(0.05, 1.0, 1.0, 1.0, 1.0, rho); }

/// Gaussian ansatz exp(-a y^2/2) in L v + c v = lambda v for the linear model with p = -1.
struct GaussianOracle
{
    double a_star;
    double lambda;
    double norm;  // makes the integral of v^2 m_hat equal 1

    explicit GaussianOracle(double rho)
    {
        double const p = -1.0;
        double const q = p / (p - 1.0);
        double const delta = 1.0 / (1.0 - q * rho * rho);
        double const kappa = 1.0 + q * rho;  // -B'(y) with B = b - q a rho theta
        a_star = -kappa + std::sqrt(kappa * kappa + q / delta);
        lambda = p * 0.05 / delta - a_star / 2.0;
        // m_hat = exp(-kappa y^2), so v^2 m_hat = K^2 exp(-(a* + kappa) y^2).
        norm = std::pow((a_star + kappa) / std::numbers::pi, 0.25);
    }

    double v(double y) const { return norm * std::exp(-0.5 * a_star * y * y); }
};

EigenResult solve(double rho, std::size_t n = 2000, EigenOptions const& opt = {})
{
    auto const c = derive_coefficients(linear(rho), -1.0, 0.0);
    return solve_principal(c, Grid1D::uniform(-8.0, 8.0, n), opt);
}

double max_rel_error(EigenResult const& r, GaussianOracle const& o, double half_width)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < r.grid.size(); ++i)
        if (std::fabs(r.grid[i]) <= half_width)
            worst = std::max(worst, std::fabs(r.v_hat[i] / o.v(r.grid[i]) - 1.0));
    return worst;
}

}  // namespace

TEST(EigenOracle, NegativeCorrelation)
{
    GaussianOracle const o(-0.5);
    ASSERT_NEAR(o.a_star, 0.25, 1e-15);
    ASSERT_NEAR(o.lambda, -0.16875, 1e-15);
    auto const r = solve(-0.5);
    EXPECT_NEAR(r.lambda, -0.16875, 1e-6);
    EXPECT_LE(max_rel_error(r, o, 4.0), 1e-5);
    EXPECT_NEAR(r.grid.interpolate(r.v_hat, 0.0), 0.75113, 1e-5);
    EXPECT_LE(r.window_shift, 1e-8);
}

TEST(EigenOracle, ZeroCorrelation)
{
    GaussianOracle const o(0.0);
    EXPECT_NEAR(o.a_star, std::sqrt(1.5) - 1.0, 1e-15);
    auto const r = solve(0.0);
    EXPECT_NEAR(r.lambda, -0.1623724, 1e-6);
    EXPECT_NEAR(r.lambda, o.lambda, 1e-8);
    EXPECT_LE(max_rel_error(r, o, 4.0), 1e-5);
}

TEST(EigenOracle, RichardsonOffStillSecondOrder)
{
    GaussianOracle const o(-0.5);
    EigenOptions opt;
    opt.richardson = false;
    double const e1 = max_rel_error(solve(-0.5, 999, opt), o, 4.0);
    double const e2 = max_rel_error(solve(-0.5, 1999, opt), o, 4.0);
    EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}

TEST(EigenProperties, SymmetricModelGivesEvenEigenvector)
{
    DiffusionModel m = linear(-0.5);
    m.b = [](double y) { return -y - 0.2 * y * y * y; };
    m.a = [](double y) { return 1.0 + 0.1 * y * y; };
    auto const c = derive_coefficients(m, -1.0, 0.0);
    auto const r = solve_principal(c, Grid1D::uniform(-6.0, 6.0, 1201));
    std::size_t const n = r.grid.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::fabs(r.v_hat[i] - r.v_hat[n - 1 - i]));
    EXPECT_LE(worst, 1e-8);
}

TEST(EigenProperties, ResidualIsSecondOrder)
{
    auto const r1 = solve(-0.5, 999);
    auto const r2 = solve(-0.5, 1999);
    EXPECT_NEAR(r1.residual / r2.residual, 4.0, 1.0);
}

TEST(EigenProperties, DensityNormalizedAndPositive)
{
    for (double rho : {-0.5, 0.0})
    {
        auto const r = solve(rho);
        double mass = 0.0;
        for (std::size_t i = 0; i < r.grid.size(); ++i)
        {
            EXPECT_GT(r.v_hat[i], 0.0);
            EXPECT_GE(r.invariant_density[i], 0.0);
            mass += r.invariant_density[i] * r.grid.cell(i);
        }
        EXPECT_NEAR(mass, 1.0, 1e-8);
    }
}

TEST(EigenProperties, NonuniformGrid)
{
    std::vector<double> y;
    for (int i = -999; i <= 999; ++i)
    {
        double const s = i / 1000.0;
        y.push_back(8.0 * (0.6 * s + 0.4 * s * s * s));
    }
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    auto const r = solve_principal(c, Grid1D(y, -8.0, 8.0));
    EXPECT_NEAR(r.lambda, -0.16875, 1e-6);
    EXPECT_LE(max_rel_error(r, GaussianOracle(-0.5), 4.0), 1e-5);
}

TEST(EigenErrors, SmallWindowIsRejected)
{
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    EXPECT_THROW(solve_principal(c, Grid1D::uniform(-2.0, 2.0, 400)), WindowError);
}

TEST(EigenErrors, GridOutsideDomain)
{
    DiffusionModel m = linear(-0.5);
    m.domain = {-5.0, 5.0};
    auto const c = derive_coefficients(m, -1.0, 0.0);
    EXPECT_THROW(solve_principal(c, Grid1D::uniform(-8.0, 8.0, 400)), InvalidInput);
}

TEST(LongRunPolicy, ClosedForms)
{
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    auto const r = solve_principal(c, Grid1D::uniform(-8.0, 8.0, 2000));
    EXPECT_NEAR(long_run_policy(r, c, 1.0)(0), 4.0 / 7.0, 1e-6);
    EXPECT_NEAR(long_run_policy(r, c, 0.0)(0), 0.0, 1e-10);

    auto const c0 = derive_coefficients(linear(0.0), -1.0, 0.0);
    auto const r0 = solve_principal(c0, Grid1D::uniform(-8.0, 8.0, 2000));
    EXPECT_NEAR(long_run_policy(r0, c0, 1.0)(0), 0.5, 1e-12);
    EXPECT_THROW(long_run_policy(r0, c0, 9.0), WindowError);
}

TEST(LongRunPolicy, InvariantUnderRescaling)
{
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    auto r = solve_principal(c, Grid1D::uniform(-8.0, 8.0, 2000));
    EigenResult scaled = r;
    for (double& v : scaled.v_hat)
        v *= 37.5;
    scaled.log_deriv = log_derivative(scaled.grid, scaled.v_hat);
    for (double y : {-3.3, -1.0, 0.2, 2.7})
        EXPECT_NEAR(long_run_policy(scaled, c, y)(0), long_run_policy(r, c, y)(0), 1e-12);
}

TEST(EigenConditions, LinearModel)
{
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    auto const r = solve_principal(c, Grid1D::uniform(-8.0, 8.0, 2000));
    auto const rep = verify_eigen_conditions(r, c);
    EXPECT_EQ(rep.recurrence_left.status, Convergence::Divergent);
    EXPECT_EQ(rep.recurrence_right.status, Convergence::Divergent);
    EXPECT_NEAR(rep.l2_mass, 1.0, 1e-8);
    ASSERT_EQ(rep.l1_integral.status, Convergence::Converged);
    double const expected = std::pow(std::numbers::pi, -0.25) * std::sqrt(std::numbers::pi / 0.875);
    EXPECT_NEAR(rep.l1_integral.value, expected, 1e-5);
    EXPECT_TRUE(rep.ok());
}

TEST(ConsistentGenerator, EigenpairIsExact)
{
    auto const c = derive_coefficients(linear(-0.5), -1.0, 0.0);
    auto const r = solve_principal(c, Grid1D::uniform(-8.0, 8.0, 2000));
    Generator const g = consistent_generator(c, r);
    std::vector<double> tv;
    g.T.multiply(r.v_hat, tv);
    for (std::size_t i = 0; i < tv.size(); ++i)
    {
        double const row = std::fabs(g.T.lower[i]) + std::fabs(g.T.diag[i]) + std::fabs(g.T.upper[i]);
        EXPECT_NEAR(tv[i], r.lambda * r.v_hat[i], 1e-14 * row);
    }
}
