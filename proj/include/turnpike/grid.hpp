#pragma once

#include "turnpike/errors.hpp"
#include "turnpike/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace turnpike {

/// Strictly increasing interior nodes of a truncation window [lower, upper]; the window
/// ends carry the Dirichlet conditions and are not nodes.
class Grid1D
{
  public:
    Grid1D(std::vector<double> nodes, double lower, double upper)
        : nodes_(std::move(nodes)), lower_(lower), upper_(upper)
    {
        if (nodes_.size() < 16)
            throw InvalidInput("a grid needs at least 16 nodes");
        if (!(lower < nodes_.front() && nodes_.back() < upper))
            throw InvalidInput("grid nodes must lie strictly inside the window");
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (!(nodes_[i] > nodes_[i - 1]))
                throw InvalidInput("grid nodes must be strictly increasing");
        double const h = (nodes_.back() - nodes_.front()) / static_cast<double>(nodes_.size() - 1);
        uniform_step_ = h;
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (std::fabs(nodes_[i] - nodes_[i - 1] - h) > 1e-9 * h)
                uniform_step_ = 0.0;
    }

    /// n equally spaced interior nodes of [lower, upper].
    static Grid1D uniform(double lower, double upper, std::size_t n)
    {
        if (!(lower < upper))
            throw InvalidInput("empty window");
        std::vector<double> y(n);
        double const h = (upper - lower) / static_cast<double>(n + 1);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = lower + h * static_cast<double>(i + 1);
        return Grid1D(std::move(y), lower, upper);
    }

    std::size_t size() const { return nodes_.size(); }
    double operator[](std::size_t i) const { return nodes_[i]; }
    std::vector<double> const& nodes() const { return nodes_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    Interval window() const { return {lower_, upper_}; }

    /// Position left of node 0 and right of node n-1 are the window ends.
    double left_of(std::size_t i) const { return i == 0 ? lower_ : nodes_[i - 1]; }
    double right_of(std::size_t i) const { return i + 1 == nodes_.size() ? upper_ : nodes_[i + 1]; }

    /// Control-volume width (y_{i+1} - y_{i-1})/2 using the window ends as neighbours.
    double cell(std::size_t i) const { return 0.5 * (right_of(i) - left_of(i)); }

    bool covers(double y) const { return y >= nodes_.front() && y <= nodes_.back(); }

    /// Index k with nodes[k] <= y <= nodes[k+1]; requires covers(y).
    std::size_t bracket(double y) const
    {
        if (uniform_step_ > 0.0)
        {
            auto k = static_cast<std::size_t>(std::max(0.0, (y - nodes_.front()) / uniform_step_));
            k = std::min(k, nodes_.size() - 2);
            // Guard against rounding at cell edges.
            if (k > 0 && y < nodes_[k])
                --k;
            else if (k + 2 < nodes_.size() && y > nodes_[k + 1])
                ++k;
            return k;
        }
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), y);
        std::size_t k = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
        return std::min(k, nodes_.size() - 2);
    }

    /// Linear interpolation of nodal values; throws WindowError outside the node range.
    double interpolate(std::vector<double> const& values, double y) const
    {
        if (!covers(y))
            throw WindowError("query point outside the grid");
        std::size_t const k = bracket(y);
        double const w = (y - nodes_[k]) / (nodes_[k + 1] - nodes_[k]);
        return (1.0 - w) * values[k] + w * values[k + 1];
    }

  private:
    std::vector<double> nodes_;
    double lower_;
    double upper_;
    double uniform_step_ = 0.0;
};

/// Second-order derivative of nodal values: centered three-point formula inside,
/// one-sided three-point formula at the two end nodes.
inline std::vector<double> derivative(Grid1D const& g, std::vector<double> const& f)
{
    std::size_t const n = g.size();
    std::vector<double> d(n);
    auto three_point = [&](std::size_t a, std::size_t b, std::size_t c, double at) {
        // Derivative at `at` of the quadratic through (y_a,f_a),(y_b,f_b),(y_c,f_c).
        double const ya = g[a], yb = g[b], yc = g[c];
        return f[a] * ((at - yb) + (at - yc)) / ((ya - yb) * (ya - yc)) +
               f[b] * ((at - ya) + (at - yc)) / ((yb - ya) * (yb - yc)) +
               f[c] * ((at - ya) + (at - yb)) / ((yc - ya) * (yc - yb));
    };
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = three_point(i - 1, i, i + 1, g[i]);
    d[0] = three_point(0, 1, 2, g[0]);
    d[n - 1] = three_point(n - 3, n - 2, n - 1, g[n - 1]);
    return d;
}

/// Derivative of log f for positive nodal values f.
inline std::vector<double> log_derivative(Grid1D const& g, std::vector<double> const& f)
{
    std::vector<double> logf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        if (!(f[i] > 0.0))
            throw NumericalError("log-derivative of a nonpositive value");
        logf[i] = std::log(f[i]);
    }
    return derivative(g, logf);
}

}  // namespace turnpike
