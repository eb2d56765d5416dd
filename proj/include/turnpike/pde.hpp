#pragma once

// Finite-horizon reduced HJB equation
//
//   v_t + L v + c v = 0 on (0,T) x window,   v(T, .) = 1,
//
// solved backward in tau = T - t on the eigen grid. Both routes run on the generator
// made consistent with (lambda_c, v_hat) (see consistent_generator):
//
//   w = e^{-lambda tau} v   solves  w_tau = (T - lambda) w,
//   h = w / v_hat           solves  h_tau = G h,   G = D^{-1} (T - lambda) D,  D = diag(v_hat).
//
// Crank-Nicolson after a Rannacher start of two implicit Euler half-steps. At the window
// ends v is pinned to the long-run profile e^{lambda tau} v_hat h_b, with v_hat extended by
// its end log-slope and h_b frozen at its terminal value 1/v_hat at the end node.

#include "turnpike/eigen.hpp"
#include "turnpike/errors.hpp"
#include "turnpike/grid.hpp"
#include "turnpike/model.hpp"
#include "turnpike/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace turnpike {

struct HorizonOptions
{
    /// Upper bound on the time step; 0 means a quarter of the smallest grid spacing, which
    /// keeps the first-order startup error below the spatial error.
    double max_dt = 0.0;
    /// Times the step count may be doubled after a positivity failure.
    int max_doublings = 4;
};

class HorizonSolution
{
  public:
    HorizonSolution(double T, double lambda, Grid1D grid, std::size_t steps)
        : T_(T), lambda_(lambda), grid_(std::move(grid)), steps_(steps)
    {
        std::size_t const cells = (steps + 1) * grid_.size();
        v_.resize(cells);
        h_.resize(cells);
        dlog_v_.resize(cells);
        dlog_h_.resize(cells);
    }

    double horizon() const { return T_; }
    double lambda() const { return lambda_; }
    Grid1D const& grid() const { return grid_; }
    std::size_t steps() const { return steps_; }
    double dt() const { return T_ / static_cast<double>(steps_); }
    /// t_j = j T / steps, j = 0..steps.
    double time(std::size_t j) const { return j == steps_ ? T_ : static_cast<double>(j) * dt(); }

    std::span<double const> v_row(std::size_t j) const { return row(v_, j); }
    std::span<double const> h_row(std::size_t j) const { return row(h_, j); }
    std::span<double const> log_deriv_v_row(std::size_t j) const { return row(dlog_v_, j); }
    std::span<double const> log_deriv_h_row(std::size_t j) const { return row(dlog_h_, j); }

    double v_at(double t, double y) const { return bilinear(v_, t, y); }
    double h_at(double t, double y) const { return bilinear(h_, t, y); }
    double log_deriv_v_at(double t, double y) const { return bilinear(dlog_v_, t, y); }
    double log_deriv_h_at(double t, double y) const { return bilinear(dlog_h_, t, y); }

    std::span<double> mutable_row(std::vector<double>& field, std::size_t j)
    {
        return {field.data() + j * grid_.size(), grid_.size()};
    }
    std::vector<double>& v_data() { return v_; }
    std::vector<double>& h_data() { return h_; }
    std::vector<double>& log_deriv_v_data() { return dlog_v_; }
    std::vector<double>& log_deriv_h_data() { return dlog_h_; }

  private:
    std::span<double const> row(std::vector<double> const& f, std::size_t j) const
    {
        return {f.data() + j * grid_.size(), grid_.size()};
    }

    double bilinear(std::vector<double> const& f, double t, double y) const
    {
        if (!(t >= 0.0 && t <= T_))
            throw WindowError("time outside [0, T]");
        if (!grid_.covers(y))
            throw WindowError("query point outside the grid");
        double const s = t / dt();
        std::size_t const j = std::min(static_cast<std::size_t>(s), steps_ - 1);
        double const wt = std::clamp(s - static_cast<double>(j), 0.0, 1.0);
        std::size_t const k = grid_.bracket(y);
        double const wy = (y - grid_[k]) / (grid_[k + 1] - grid_[k]);
        std::size_t const n = grid_.size();
        double const* a = f.data() + j * n;
        double const* b = a + n;
        double const lo = (1.0 - wy) * a[k] + wy * a[k + 1];
        double const hi = (1.0 - wy) * b[k] + wy * b[k + 1];
        return (1.0 - wt) * lo + wt * hi;
    }

    double T_;
    double lambda_;
    Grid1D grid_;
    std::size_t steps_;
    std::vector<double> v_;
    std::vector<double> h_;
    std::vector<double> dlog_v_;
    std::vector<double> dlog_h_;
};

namespace detail {

/// One theta-scheme step  (I - a M) x_new = (I + b M) x_old + s * bc.
inline bool theta_step(Tridiagonal const& m, double a, double b, double s, double bc_left, double bc_right,
                       std::vector<double>& x)
{
    std::size_t const n = x.size();
    std::vector<double> rhs(n);
    if (b != 0.0)
    {
        m.multiply(x, rhs);
        for (std::size_t i = 0; i < n; ++i)
            rhs[i] = x[i] + b * rhs[i];
    }
    else
    {
        rhs = x;
    }
    rhs[0] += s * bc_left;
    rhs[n - 1] += s * bc_right;
    thomas_solve(m.scaled_shifted(-a, 1.0), rhs);
    x = std::move(rhs);
    return std::all_of(x.begin(), x.end(), [](double xi) { return xi > 0.0 && std::isfinite(xi); });
}

}  // namespace detail

inline HorizonSolution solve_horizon(DerivedCoefficients const& coeffs, EigenResult const& eigen, double T,
                                     HorizonOptions const& opt = {})
{
    if (!(T > 0.0))
        throw InvalidInput("horizon must be positive");
    Grid1D const& g = eigen.grid;
    std::size_t const n = g.size();
    double const lambda = eigen.lambda;

    Generator const gen = consistent_generator(coeffs, eigen);
    Tridiagonal W = gen.T.scaled_shifted(1.0, -lambda);
    Tridiagonal H(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (i > 0)
            H.lower[i] = W.lower[i] * eigen.v_hat[i - 1] / eigen.v_hat[i];
        if (i + 1 < n)
            H.upper[i] = W.upper[i] * eigen.v_hat[i + 1] / eigen.v_hat[i];
        H.diag[i] = -(H.lower[i] + H.upper[i]);
    }
    // Pinned window-end values of w (constant in tau); h sees them divided by v_hat at the end node.
    double const w_left = std::exp(eigen.log_deriv[0] * (g.lower() - g[0]));
    double const w_right = std::exp(eigen.log_deriv[n - 1] * (g.upper() - g[n - 1]));
    double const bw_left = gen.left_coupling * w_left;
    double const bw_right = gen.right_coupling * w_right;
    double const bh_left = bw_left / eigen.v_hat[0];
    double const bh_right = bw_right / eigen.v_hat[n - 1];

    double min_h = kInf;
    for (std::size_t i = 0; i < n; ++i)
        min_h = std::min(min_h, g.right_of(i) - g[i]);
    double const max_dt = opt.max_dt > 0.0 ? opt.max_dt : 0.25 * min_h;
    auto steps = static_cast<std::size_t>(std::ceil(T / max_dt - 1e-9));
    steps = std::max<std::size_t>(steps, 2);

    for (int attempt = 0; attempt <= opt.max_doublings; ++attempt, steps *= 2)
    {
        HorizonSolution sol(T, lambda, g, steps);
        double const dt = T / static_cast<double>(steps);
        std::vector<double> w(n, 1.0);
        std::vector<double> h(n);
        for (std::size_t i = 0; i < n; ++i)
            h[i] = 1.0 / eigen.v_hat[i];

        auto store = [&](std::size_t k) {
            std::size_t const j = steps - k;
            double const growth = std::exp(lambda * static_cast<double>(k) * dt);
            auto vr = sol.mutable_row(sol.v_data(), j);
            auto hr = sol.mutable_row(sol.h_data(), j);
            for (std::size_t i = 0; i < n; ++i)
            {
                vr[i] = growth * w[i];
                hr[i] = h[i];
            }
        };
        store(0);
        bool ok = true;
        for (std::size_t k = 0; k < steps && ok; ++k)
        {
            if (k == 0)
            {
                for (int half = 0; half < 2 && ok; ++half)
                {
                    ok = detail::theta_step(W, 0.5 * dt, 0.0, 0.5 * dt, bw_left, bw_right, w) &&
                         detail::theta_step(H, 0.5 * dt, 0.0, 0.5 * dt, bh_left, bh_right, h);
                }
            }
            else
            {
                ok = detail::theta_step(W, 0.5 * dt, 0.5 * dt, dt, bw_left, bw_right, w) &&
                     detail::theta_step(H, 0.5 * dt, 0.5 * dt, dt, bh_left, bh_right, h);
            }
            if (ok)
                store(k + 1);
        }
        if (!ok)
            continue;

        for (std::size_t j = 0; j <= steps; ++j)
        {
            auto const hr = sol.h_row(j);
            std::vector<double> const dh = log_derivative(g, std::vector<double>(hr.begin(), hr.end()));
            auto dhr = sol.mutable_row(sol.log_deriv_h_data(), j);
            auto dvr = sol.mutable_row(sol.log_deriv_v_data(), j);
            for (std::size_t i = 0; i < n; ++i)
            {
                dhr[i] = dh[i];
                dvr[i] = eigen.log_deriv[i] + dh[i];
            }
        }
        return sol;
    }
    throw NumericalError("finite-horizon solution lost positivity after repeated step halving");
}

/// pi^T(t, y) = Sigma^{-1}(mu + delta Upsilon v^T_y/v^T)(t, y)/(1-p).
inline Vec finite_policy(HorizonSolution const& sol, DerivedCoefficients const& coeffs, double t, double y)
{
    return coeffs.policy(y, sol.log_deriv_v_at(t, y));
}

}  // namespace turnpike
