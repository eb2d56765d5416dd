#pragma once

// Principal eigenpair of  L v + c v = lambda v,  L = (1/2) A d^2/dy^2 + B d/dy,
// on a truncation window with v = 0 at the window ends.
//
// L is discretized in its self-adjoint form (1/m_hat) d/dy((A m_hat/2) dv/dy) by finite
// volumes. Row i of the resulting tridiagonal T is
//
//   upper_i = (A m_hat)_{i+1/2} / (2 m_hat_i (y_{i+1} - y_i) D_i)
//   lower_i = (A m_hat)_{i-1/2} / (2 m_hat_i (y_i - y_{i-1}) D_i)
//   diag_i  = c_i - upper_i - lower_i,          D_i = (y_{i+1} - y_{i-1})/2,
//
// and T is similar to a symmetric matrix with off-diagonal sqrt(upper_i lower_{i+1}).

#include "turnpike/errors.hpp"
#include "turnpike/grid.hpp"
#include "turnpike/model.hpp"
#include "turnpike/tridiagonal.hpp"
#include "turnpike/wellposed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace turnpike {

struct Generator
{
    /// L + c on the interior nodes, with zero values at the window ends.
    Tridiagonal T;
    /// Weights of the window-end values v(lower) in row 0 and v(upper) in row n-1.
    double left_coupling = 0.0;
    double right_coupling = 0.0;
    std::vector<double> log_m_hat;
    std::vector<double> c;
};

inline Generator assemble_generator(DerivedCoefficients const& coeffs, Grid1D const& g)
{
    std::size_t const n = g.size();
    Generator gen;
    gen.T = Tridiagonal(n);
    gen.log_m_hat.resize(n);
    gen.c.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        gen.log_m_hat[i] = coeffs.log_m_hat(g[i]);
        gen.c[i] = coeffs.c(g[i]);
    }
    // log(A m_hat) at the faces; face i sits between left_of(i) and node i.
    std::vector<double> face(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
    {
        double const left = g.left_of(i);
        double const right = i == n ? g.upper() : g[i];
        double const mid = 0.5 * (left + right);
        face[i] = coeffs.scale_exponent_hat(mid);
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        double const d = g.cell(i);
        double const lo = 0.5 * std::exp(face[i] - gen.log_m_hat[i]) / ((g[i] - g.left_of(i)) * d);
        double const up = 0.5 * std::exp(face[i + 1] - gen.log_m_hat[i]) / ((g.right_of(i) - g[i]) * d);
        gen.T.lower[i] = lo;
        gen.T.upper[i] = up;
        gen.T.diag[i] = gen.c[i] - lo - up;
    }
    gen.left_coupling = gen.T.lower[0];
    gen.right_coupling = gen.T.upper[n - 1];
    gen.T.lower[0] = 0.0;
    gen.T.upper[n - 1] = 0.0;
    return gen;
}

struct EigenResult
{
    double lambda = 0.0;
    Grid1D grid;
    std::vector<double> v_hat;
    std::vector<double> log_deriv;
    /// v_hat^2 m_hat, summing to 1 against the control-volume widths.
    std::vector<double> invariant_density;
    std::vector<double> log_m_hat;
    /// Max |(L + c - lambda) v_hat| over interior nodes (non-conservative centered stencil).
    double residual = 0.0;
    /// lambda on the doubled window and the shift relative to `lambda` (NaN when not checked).
    double lambda_doubled = std::numeric_limits<double>::quiet_NaN();
    double window_shift = std::numeric_limits<double>::quiet_NaN();

    Interval window() const { return grid.window(); }

    double log_derivative_at(double y) const { return grid.interpolate(log_deriv, y); }
};

struct EigenOptions
{
    double tol = 1e-12;
    /// Re-solve on a window twice as wide (same spacing) and require |shift| <= window_tol.
    bool check_window = true;
    double window_tol = 1e-8;
    bool richardson = true;
};

/// ½A v'' + B v' + (c - lambda) v at interior nodes with the centered non-conservative stencil.
inline std::vector<double> pointwise_residual(DerivedCoefficients const& coeffs, Grid1D const& g,
                                              std::vector<double> const& v, double lambda)
{
    std::size_t const n = g.size();
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        double const hl = g[i] - g[i - 1];
        double const hr = g[i + 1] - g[i];
        double const d1 = (v[i + 1] * hl * hl - v[i - 1] * hr * hr - v[i] * (hl * hl - hr * hr)) / (hl * hr * (hl + hr));
        double const d2 = 2.0 * (v[i + 1] * hl + v[i - 1] * hr - v[i] * (hl + hr)) / (hl * hr * (hl + hr));
        double const y = g[i];
        r[i] = 0.5 * coeffs.A(y) * d2 + coeffs.B(y) * d1 + (coeffs.c(y) - lambda) * v[i];
    }
    return r;
}

namespace detail {

struct DiscretePair
{
    double lambda;
    std::vector<double> v;
};

/// Largest eigenvalue of the assembled generator and its positive eigenvector (max-norm 1).
inline DiscretePair principal_pair(Generator const& gen, double tol)
{
    std::size_t const n = gen.T.size();
    SymmetricTridiagonal sym;
    sym.diag = gen.T.diag;
    sym.offsq.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        sym.offsq[i] = gen.T.upper[i] * gen.T.lower[i + 1];
    double const lambda = sym.largest_eigenvalue(tol);

    // Inverse iteration with a shift just above lambda: T - sigma is similar to a negative
    // definite matrix, so elimination without pivoting is stable.
    double const sigma = lambda + 1e-9 * std::max(1.0, std::fabs(lambda));
    Tridiagonal const shifted = gen.T.scaled_shifted(1.0, -sigma);
    std::vector<double> v(n, 1.0);
    for (int it = 0; it < 8; ++it)
    {
        std::vector<double> x = v;
        thomas_solve(shifted, x);
        double norm = 0.0;
        for (double xi : x)
            norm = std::max(norm, std::fabs(xi));
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            x[i] /= norm;
            change = std::max(change, std::fabs(std::fabs(x[i]) - std::fabs(v[i])));
        }
        v = std::move(x);
        if (change < 1e-14)
            break;
    }
    double const sign = std::accumulate(v.begin(), v.end(), 0.0) >= 0.0 ? 1.0 : -1.0;
    for (double& vi : v)
    {
        vi *= sign;
        if (!(vi > 0.0))
            throw NumericalError("eigenvector changes sign: not the principal branch");
    }
    return {lambda, std::move(v)};
}

/// Grid with the midpoints of every gap inserted; node i becomes node 2i+1.
inline Grid1D refined(Grid1D const& g)
{
    std::vector<double> y;
    y.reserve(2 * g.size() + 1);
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        y.push_back(0.5 * (g.left_of(i) + g[i]));
        y.push_back(g[i]);
    }
    y.push_back(0.5 * (g[g.size() - 1] + g.upper()));
    return Grid1D(std::move(y), g.lower(), g.upper());
}

inline EigenResult finish(DerivedCoefficients const& coeffs, Grid1D const& g, std::vector<double> const& log_m_hat,
                          double lambda, std::vector<double> v)
{
    std::size_t const n = g.size();
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mass += v[i] * v[i] * std::exp(log_m_hat[i]) * g.cell(i);
    double const scale = 1.0 / std::sqrt(mass);
    for (double& vi : v)
        vi *= scale;

    std::vector<double> density(n);
    for (std::size_t i = 0; i < n; ++i)
        density[i] = v[i] * v[i] * std::exp(log_m_hat[i]);

    double residual = 0.0;
    for (double r : pointwise_residual(coeffs, g, v, lambda))
        residual = std::max(residual, std::fabs(r));

    std::vector<double> dlog = log_derivative(g, v);
    return EigenResult{lambda, g, std::move(v), std::move(dlog), std::move(density), log_m_hat, residual};
}

}  // namespace detail

/// Uniform grid on a window twice as wide around the same center, with the average
/// spacing of `g`, kept strictly inside the state domain.
inline Grid1D doubled_grid(Grid1D const& g, Interval const& domain)
{
    double const center = 0.5 * (g.lower() + g.upper());
    double const half = 0.5 * (g.upper() - g.lower());
    double lo = center - 2.0 * half;
    double hi = center + 2.0 * half;
    if (!(lo > domain.lower))
        lo = 0.5 * (g.lower() + domain.lower);
    if (!(hi < domain.upper))
        hi = 0.5 * (g.upper() + domain.upper);
    double const h = (g.upper() - g.lower()) / static_cast<double>(g.size() + 1);
    auto const n = static_cast<std::size_t>(std::llround((hi - lo) / h)) - 1;
    return Grid1D::uniform(lo, hi, n);
}

/// Principal eigenpair on `grid`.
///
/// With `richardson` the pair is also computed on the midpoint-refined grid and the two
/// are combined as (4 fine - coarse)/3 at the coarse nodes, cancelling the h^2 error term.
/// The window check compares lambda computed the same way on the doubled window.
inline EigenResult solve_principal(DerivedCoefficients const& coeffs, Grid1D const& grid, EigenOptions const& opt = {})
{
    Interval const& e = coeffs.model().domain;
    if (!(e.lower <= grid.lower() && grid.upper() <= e.upper))
        throw InvalidInput("grid window must lie inside the state domain");

    Generator const gen = assemble_generator(coeffs, grid);
    detail::DiscretePair base = detail::principal_pair(gen, opt.tol);
    if (opt.richardson)
    {
        detail::DiscretePair const fine =
            detail::principal_pair(assemble_generator(coeffs, detail::refined(grid)), opt.tol);
        // Put both vectors on a common scale before combining.
        double const k = fine.v[1] / base.v[0];
        base.lambda = (4.0 * fine.lambda - base.lambda) / 3.0;
        for (std::size_t i = 0; i < base.v.size(); ++i)
        {
            double const combined = (4.0 * fine.v[2 * i + 1] / k - base.v[i]) / 3.0;
            if (!(combined > 0.0))
                throw NumericalError("extrapolated eigenvector is not positive; refine the grid");
            base.v[i] = combined;
        }
    }
    EigenResult out = detail::finish(coeffs, grid, gen.log_m_hat, base.lambda, std::move(base.v));
    if (opt.check_window)
    {
        Grid1D const wide = doubled_grid(grid, e);
        double wide_lambda = detail::principal_pair(assemble_generator(coeffs, wide), opt.tol).lambda;
        if (opt.richardson)
        {
            double const fine =
                detail::principal_pair(assemble_generator(coeffs, detail::refined(wide)), opt.tol).lambda;
            wide_lambda = (4.0 * fine - wide_lambda) / 3.0;
        }
        out.lambda_doubled = wide_lambda;
        out.window_shift = std::fabs(wide_lambda - out.lambda);
        if (out.window_shift > opt.window_tol)
        {
            std::ostringstream msg;
            msg << "principal eigenvalue moves by " << std::scientific << out.window_shift
                << " when the window is doubled; widen the window";
            throw WindowError(msg.str());
        }
    }
    return out;
}

/// Generator adjusted so that (lambda, v_hat) of `r` is an exact discrete eigenpair:
/// the potential at node i changes by -((T - lambda) v_hat)_i / v_hat_i, an O(h^2) amount.
inline Generator consistent_generator(DerivedCoefficients const& coeffs, EigenResult const& r)
{
    Generator gen = assemble_generator(coeffs, r.grid);
    std::vector<double> tv;
    gen.T.multiply(r.v_hat, tv);
    for (std::size_t i = 0; i < tv.size(); ++i)
    {
        double const shift = (tv[i] - r.lambda * r.v_hat[i]) / r.v_hat[i];
        gen.T.diag[i] -= shift;
        gen.c[i] -= shift;
    }
    return gen;
}

struct EigenConditionReport
{
    IntegralResult recurrence_left;
    IntegralResult recurrence_right;
    double l2_mass = 0.0;
    IntegralResult l1_integral;
    bool ok() const
    {
        return recurrence_left.status == Convergence::Divergent && recurrence_right.status == Convergence::Divergent &&
               l1_integral.status == Convergence::Converged;
    }
};

/// v_hat inside the grid by log-linear interpolation, outside by its end log-slope.
inline double extrapolated_log_v(EigenResult const& r, double y)
{
    Grid1D const& g = r.grid;
    std::size_t const n = g.size();
    if (y < g[0])
        return std::log(r.v_hat[0]) + r.log_deriv[0] * (y - g[0]);
    if (y > g[n - 1])
        return std::log(r.v_hat[n - 1]) + r.log_deriv[n - 1] * (y - g[n - 1]);
    std::size_t const k = g.bracket(y);
    double const w = (y - g[k]) / (g[k + 1] - g[k]);
    return (1.0 - w) * std::log(r.v_hat[k]) + w * std::log(r.v_hat[k + 1]);
}

inline EigenConditionReport verify_eigen_conditions(EigenResult const& r, DerivedCoefficients const& coeffs,
                                                    TruncationPolicy const& policy = {})
{
    EigenConditionReport rep;
    Interval const& e = coeffs.model().domain;
    double const center = coeffs.y0();
    auto recurrence = [&](double y) {
        return std::exp(-2.0 * extrapolated_log_v(r, y) - coeffs.log_m_hat(y)) / coeffs.A(y);
    };
    auto l1 = [&](double y) { return std::exp(extrapolated_log_v(r, y) + coeffs.log_m_hat(y)); };
    try
    {
        rep.recurrence_left = tail_integral(recurrence, center, e.lower, policy);
        rep.recurrence_right = tail_integral(recurrence, center, e.upper, policy);
    }
    catch (Error const&)
    {
        rep.recurrence_left.status = rep.recurrence_right.status = Convergence::Inconclusive;
    }
    try
    {
        rep.l1_integral = improper_integral(l1, e.lower, e.upper, center, policy);
    }
    catch (Error const&)
    {
        rep.l1_integral.status = Convergence::Inconclusive;
    }
    for (std::size_t i = 0; i < r.grid.size(); ++i)
        rep.l2_mass += r.invariant_density[i] * r.grid.cell(i);
    return rep;
}

/// Long-run policy pi_hat(y) = Sigma^{-1}(mu + delta Upsilon v_y/v)(y)/(1-p).
inline Vec long_run_policy(EigenResult const& r, DerivedCoefficients const& coeffs, double y)
{
    return coeffs.policy(y, r.log_derivative_at(y));
}

}  // namespace turnpike
