#pragma once

#include "turnpike/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace turnpike {

using ScalarFn = std::function<double(double)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod (15-point) on a finite interval. `a > b` flips the sign.
template <class F>
double integrate(F const& f, double a, double b, double rel_tol = 1e-12, double* error = nullptr,
                 unsigned max_depth = 15)
{
    if (a == b)
        return 0.0;
    if (a > b)
        return -integrate(f, b, a, rel_tol, error, max_depth);
    // Boost 1.74 compares an unscaled error estimate with a scaled tolerance, so short
    // intervals always recurse to max depth. Integrating over [-1, 1] sidesteps it.
    double const mid = 0.5 * (a + b);
    double const half = 0.5 * (b - a);
    auto g = [&](double t) { return f(mid + half * t) * half; };
    double err = 0.0;
    double const v =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, -1.0, 1.0, max_depth, rel_tol, &err);
    if (error)
        *error = err;
    return v;
}

/// F(y) = integral of f from y0 to y on an open interval, with anchors precomputed so
/// that every query integrates over a short piece only.
///
/// Anchors sit every 1/8 up to distance 64 from y0, then geometrically out to ~2^21
/// on infinite sides; finite ends are approached geometrically. If `f` cannot be
/// evaluated past some anchor, the reachable range stops there.
class CumulativeIntegral
{
  public:
    CumulativeIntegral() = default;

    CumulativeIntegral(ScalarFn f, double y0, double lower, double upper) : f_(std::move(f)), y0_(y0)
    {
        build_side(lower, left_);
        build_side(upper, right_);
    }

    double operator()(double y) const
    {
        if (y == y0_)
            return 0.0;
        Side const& s = y > y0_ ? right_ : left_;
        double const dist = std::fabs(y - y0_);
        if (dist > s.reach)
            throw WindowError("point outside the integrable range of the cumulative integral");
        auto it = std::upper_bound(s.dist.begin(), s.dist.end(), dist);
        std::size_t const k = static_cast<std::size_t>(it - s.dist.begin()) - 1;
        double const from = y > y0_ ? y0_ + s.dist[k] : y0_ - s.dist[k];
        return s.value[k] + integrate(f_, from, y);
    }

    double reach_lower() const { return y0_ - left_.reach; }
    double reach_upper() const { return y0_ + right_.reach; }

  private:
    struct Side
    {
        std::vector<double> dist{0.0};
        std::vector<double> value{0.0};
        double reach = 0.0;
    };

    void build_side(double end, Side& s) const
    {
        double const sign = end > y0_ ? 1.0 : -1.0;
        double const span = std::fabs(end - y0_);
        std::vector<double> d;
        if (std::isinf(span))
        {
            for (int j = 1; j <= 512; ++j)
                d.push_back(j / 8.0);
            for (int j = 1; j <= 120; ++j)
                d.push_back(64.0 * std::exp2(j / 8.0));
        }
        else
        {
            for (int j = 1; j <= 400; ++j)
                d.push_back(span * (1.0 - std::exp2(-j / 8.0)));
        }
        s.reach = 0.0;
        for (double dj : d)
        {
            if (!(dj > s.dist.back()))
                break;
            double v;
            try
            {
                v = s.value.back() + integrate(f_, y0_ + sign * s.dist.back(), y0_ + sign * dj);
            }
            catch (Error const&)
            {
                break;
            }
            if (!std::isfinite(v))
                break;
            s.dist.push_back(dj);
            s.value.push_back(v);
            s.reach = dj;
        }
        // Queries slightly past the last anchor integrate from it; finite ends stay open.
        if (std::isinf(span))
            s.reach = s.dist.back();
        else
            s.reach = std::max(s.reach, std::nextafter(span, 0.0));
    }

    ScalarFn f_;
    double y0_ = 0.0;
    Side left_;
    Side right_;
};

}  // namespace turnpike
