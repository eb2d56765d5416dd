#pragma once

#include "turnpike/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace turnpike {

/// Tridiagonal matrix in three bands: row i is lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1].
/// lower[0] and upper[n-1] are ignored.
struct Tridiagonal
{
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    Tridiagonal() = default;
    explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const { return diag.size(); }

    void multiply(std::vector<double> const& x, std::vector<double>& y) const
    {
        std::size_t const n = size();
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            double s = diag[i] * x[i];
            if (i > 0)
                s += lower[i] * x[i - 1];
            if (i + 1 < n)
                s += upper[i] * x[i + 1];
            y[i] = s;
        }
    }

    /// a*this + b*I
    Tridiagonal scaled_shifted(double a, double b) const
    {
        Tridiagonal out(*this);
        for (std::size_t i = 0; i < size(); ++i)
        {
            out.lower[i] *= a;
            out.upper[i] *= a;
            out.diag[i] = a * diag[i] + b;
        }
        return out;
    }
};

/// Thomas algorithm (no pivoting); `rhs` is overwritten with the solution.
/// Throws NumericalError on a zero pivot.
inline void thomas_solve(Tridiagonal const& m, std::vector<double>& rhs)
{
    std::size_t const n = m.size();
    std::vector<double> c(n);
    double pivot = m.diag[0];
    if (pivot == 0.0)
        throw NumericalError("zero pivot in tridiagonal solve");
    c[0] = n > 1 ? m.upper[0] / pivot : 0.0;
    rhs[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i)
    {
        pivot = m.diag[i] - m.lower[i] * c[i - 1];
        if (pivot == 0.0)
            throw NumericalError("zero pivot in tridiagonal solve");
        c[i] = i + 1 < n ? m.upper[i] / pivot : 0.0;
        rhs[i] = (rhs[i] - m.lower[i] * rhs[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] -= c[i] * rhs[i + 1];
}

/// Symmetric tridiagonal matrix given by its diagonal and squared off-diagonal
/// (offsq[i] couples rows i and i+1).
struct SymmetricTridiagonal
{
    std::vector<double> diag;
    std::vector<double> offsq;

    /// Number of eigenvalues strictly below x (Sturm count via LDL' pivots).
    std::size_t count_below(double x) const
    {
        std::size_t count = 0;
        double q = diag[0] - x;
        if (q < 0.0)
            ++count;
        for (std::size_t i = 1; i < diag.size(); ++i)
        {
            if (q == 0.0)
                q = 1e-300;
            q = diag[i] - x - offsq[i - 1] / q;
            if (q < 0.0)
                ++count;
        }
        return count;
    }

    /// Gershgorin interval containing the spectrum.
    std::pair<double, double> bounds() const
    {
        double lo = diag[0];
        double hi = diag[0];
        std::size_t const n = diag.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            double r = 0.0;
            if (i > 0)
                r += std::sqrt(offsq[i - 1]);
            if (i + 1 < n)
                r += std::sqrt(offsq[i]);
            lo = std::min(lo, diag[i] - r);
            hi = std::max(hi, diag[i] + r);
        }
        return {lo, hi};
    }

    /// Largest eigenvalue by bisection, to `tol` relative to max(1, |lambda|).
    double largest_eigenvalue(double tol = 1e-12) const
    {
        auto [lo, hi] = bounds();
        std::size_t const n = diag.size();
        while (hi - lo > tol * std::max(1.0, std::min(std::fabs(lo), std::fabs(hi))))
        {
            double const mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi)
                break;
            if (count_below(mid) == n)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    }
};

}  // namespace turnpike
