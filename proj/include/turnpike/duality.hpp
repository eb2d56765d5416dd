#pragma once

// Complete-market duality in a Black-Scholes market. The state-price density is
//
//   Y_T = exp(-r T - lambda^2 T / 2 - lambda sqrt(T) xi),   xi ~ N(0, 1),
//
// and the optimal payoff of an investor with marginal utility U' and capital x0 is
// I(y Y_T), I = (U')^{-1}, with y fixed by the budget E[Y_T I(y Y_T)] = x0.

#include "turnpike/errors.hpp"
#include "turnpike/model.hpp"
#include "turnpike/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace turnpike {

struct BSMarket
{
    double r = 0.0;
    double mu = 0.0;
    double sigma = 1.0;

    double lambda() const { return mu / sigma; }

    void validate() const
    {
        if (!(sigma > 0.0) || !std::isfinite(r) || !std::isfinite(mu))
            throw InvalidInput("market needs finite r, mu and sigma > 0");
    }

    /// log Y_T at the standard normal value xi.
    double log_deflator(double T, double xi) const
    {
        double const l = lambda();
        return -r * T - 0.5 * l * l * T - l * std::sqrt(T) * xi;
    }
};

struct DualitySolution
{
    double T = 0.0;
    double multiplier_generic = 0.0;  ///< y^{1,T}
    double multiplier_power = 0.0;    ///< y^{0,T}
    double moment = 0.0;              ///< E^{P^T} |r^T_T - 1|
    /// y^{0,T} / y^{1,T}, with y^{1,T} taken for U scaled so that U'(x) ~ x^{p-1} as x -> inf.
    double multiplier_ratio = 0.0;
    double mass = 0.0;                ///< quadrature mass of dP^T/dP
    double budget = 0.0;              ///< E[Y_T X^{1,T}_T] at the solved multiplier
};

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature for the standard normal

struct HermiteRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch nodes (eigenvalues of the Jacobi matrix of the probabilists' Hermite
/// polynomials), polished by Newton on the orthonormal polynomial. Weights use
/// w_k = 1/(n p_{n-1}(x_k)^2); the squared eigenvector components lose all relative
/// accuracy at the outer nodes, where lognormal integrands are largest.
inline HermiteRule make_hermite_rule(std::size_t n)
{
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(n - 1));
    for (std::size_t k = 1; k < n; ++k)
        sub[static_cast<Eigen::Index>(k - 1)] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);

    // Orthonormal p_{n-1}(x), p_n(x) and p_n'(x) = sqrt(n) p_{n-1}(x).
    auto eval = [n](double x) {
        double pm = 0.0, p = 1.0;
        for (std::size_t k = 0; k + 1 < n; ++k)
        {
            double const next = (x * p - std::sqrt(static_cast<double>(k)) * pm) / std::sqrt(static_cast<double>(k + 1));
            pm = p;
            p = next;
        }
        double const pn = (x * p - std::sqrt(static_cast<double>(n - 1)) * pm) / std::sqrt(static_cast<double>(n));
        return std::pair{p, pn};
    };
    HermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k)
    {
        double x = es.eigenvalues()[static_cast<Eigen::Index>(k)];
        for (int it = 0; it < 3; ++it)
        {
            auto const [pn1, pn] = eval(x);
            x -= pn / (std::sqrt(static_cast<double>(n)) * pn1);
        }
        double const pn1 = eval(x).first;
        rule.nodes[k] = x;
        rule.weights[k] = 1.0 / (static_cast<double>(n) * pn1 * pn1);
    }
    return rule;
}

inline HermiteRule const& hermite_rule(std::size_t n)
{
    static HermiteRule const r64 = make_hermite_rule(64);
    static HermiteRule const r128 = make_hermite_rule(128);
    static HermiteRule const r256 = make_hermite_rule(256);
    switch (n)
    {
        case 64: return r64;
        case 128: return r128;
        case 256: return r256;
        default: throw InvalidInput("cached Gauss-Hermite rules have 64, 128 or 256 nodes");
    }
}

struct NormalExpectation
{
    double value = 0.0;
    std::size_t nodes = 0;
};

/// E[f(xi)] for xi ~ N(0,1), doubling 64 -> 128 -> 256 nodes until two successive
/// values agree to `rel_tol`. If 256 nodes do not settle it (complex singularities of f
/// near the real axis), falls back to adaptive Gauss-Kronrod on [-reach, reach]; `reach`
/// must cover the mass of phi f. nodes = 0 marks the fallback.
template <class F>
NormalExpectation normal_expectation(F const& f, double reach, double rel_tol = 1e-9)
{
    auto apply = [&](std::size_t n) {
        HermiteRule const& rule = hermite_rule(n);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += rule.weights[k] * f(rule.nodes[k]);
        return s;
    };
    double prev = apply(64);
    for (std::size_t n : {128, 256})
    {
        double const cur = apply(n);
        if (!std::isfinite(cur))
            return {cur, n};
        if (std::fabs(cur - prev) <= rel_tol * std::fabs(cur))
            return {cur, n};
        prev = cur;
    }
    double const c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    double err = 0.0;
    double const v = integrate([&](double xi) { return c * std::exp(-0.5 * xi * xi) * f(xi); }, -reach, reach,
                               0.01 * rel_tol, &err);
    if (!(err <= rel_tol * std::fabs(v)))
        throw NumericalError("normal expectation did not converge under node doubling or adaptive quadrature");
    return {v, 0};
}

// ---------------------------------------------------------------------------
// Inverse marginal utility

/// log x with U'(x) = e^{log_z}. Working in logs keeps deep lognormal tails finite.
inline double log_inverse_marginal(Utility const& u, double log_z)
{
    if (!std::isfinite(log_z))
        throw InvalidInput("inverse marginal utility needs a finite z > 0");
    if (auto const* pw = std::get_if<PowerUtility>(&u))
        return log_z / (pw->p - 1.0);
    if (std::holds_alternative<LogUtility>(u))
        return -log_z;

    auto const& mx = std::get<MixtureUtility>(u);
    std::size_t const m = mx.weights.size();
    // In s = log x:  f(s) = log sum_i w_i e^{-gamma_i s} - log z, strictly decreasing.
    auto f = [&](double s) {
        double top = -kInf;
        for (std::size_t i = 0; i < m; ++i)
            top = std::max(top, std::log(mx.weights[i]) - mx.gammas[i] * s);
        double sum = 0.0;
        double slope = 0.0;
        for (std::size_t i = 0; i < m; ++i)
        {
            double const e = std::exp(std::log(mx.weights[i]) - mx.gammas[i] * s - top);
            sum += e;
            slope -= mx.gammas[i] * e;
        }
        return std::pair{top + std::log(sum) - log_z, slope / sum};
    };
    // Every term is below the sum: x >= (w_i/z)^{1/gamma_i}. Every term below z/m: U' <= z.
    double lo = -kInf, hi = -kInf;
    for (std::size_t i = 0; i < m; ++i)
    {
        lo = std::max(lo, (std::log(mx.weights[i]) - log_z) / mx.gammas[i]);
        hi = std::max(hi, (std::log(static_cast<double>(m) * mx.weights[i]) - log_z) / mx.gammas[i]);
    }
    if (hi <= lo)
        return lo;
    for (int k = 0; k < 30 && hi - lo > 1e-6 * std::max(1.0, std::fabs(lo)); ++k)
    {
        double const mid = 0.5 * (lo + hi);
        (f(mid).first > 0.0 ? lo : hi) = mid;
    }
    boost::uintmax_t iters = 100;
    return boost::math::tools::newton_raphson_iterate(f, 0.5 * (lo + hi), lo, hi, 50, iters);
}

/// x with U'(x) = z.
inline double inverse_marginal(Utility const& u, double z)
{
    if (!(z > 0.0))
        throw InvalidInput("inverse marginal utility needs z > 0");
    return std::exp(log_inverse_marginal(u, std::log(z)));
}

// ---------------------------------------------------------------------------
// Lagrange multiplier

namespace detail {

inline void check_horizon(BSMarket const& market, double T, double x0)
{
    market.validate();
    if (!(T > 0.0) || !std::isfinite(T))
        throw InvalidInput("horizon must be positive");
    if (!(x0 > 0.0))
        throw InvalidInput("initial capital must be positive");
}

/// Half-width of the xi window for expectations of Y_T^a I(y Y_T)^b with |a|, |b| <= 1:
/// log of the integrand has slope at most |lambda| sqrt(T) (1 + 1/gamma_min) in xi.
inline double reach(Utility const& u, BSMarket const& market, double T)
{
    double const gamma_min = 1.0 - effective_p(u);
    return 16.0 + std::fabs(market.lambda()) * std::sqrt(T) * (1.0 + 1.0 / gamma_min);
}

/// Weight of the smallest risk aversion term; 1 for power and log utilities.
inline double leading_weight(Utility const& u)
{
    auto const* mx = std::get_if<MixtureUtility>(&u);
    if (!mx)
        return 1.0;
    auto const k = std::min_element(mx->gammas.begin(), mx->gammas.end()) - mx->gammas.begin();
    return mx->weights[static_cast<std::size_t>(k)];
}

inline Utility reference_utility(Utility const& u)
{
    double const p = effective_p(u);
    if (p == 0.0)
        return LogUtility{};
    return PowerUtility{p};
}

}  // namespace detail

/// E[Y_T I(y Y_T)].
inline double budget(Utility const& u, BSMarket const& market, double T, double y)
{
    double const log_y = std::log(y);
    NormalExpectation const e = normal_expectation([&](double xi) {
        double const log_z = market.log_deflator(T, xi);
        return std::exp(log_z + log_inverse_marginal(u, log_y + log_z));
    }, detail::reach(u, market, T));
    if (!std::isfinite(e.value))
        throw IllPosed("budget integral diverges at horizon " + std::to_string(T));
    return e.value;
}

/// y with E[Y_T I(y Y_T)] = x0, by bisection on log y.
inline double lagrange_multiplier(Utility const& u, BSMarket const& market, double T, double x0 = 1.0)
{
    validate(u);
    detail::check_horizon(market, T, x0);
    if (std::holds_alternative<LogUtility>(u))
        return 1.0 / x0;
    auto excess = [&](double log_y) { return budget(u, market, T, std::exp(log_y)) - x0; };
    // The budget decreases in y; widen a bracket around y = 1.
    double lo = 0.0, hi = 0.0;
    double step = 1.0;
    while (excess(lo) < 0.0)
    {
        lo -= step;
        step *= 2.0;
        if (step > 1e4)
            throw NumericalError("could not bracket the Lagrange multiplier");
    }
    step = 1.0;
    while (excess(hi) > 0.0)
    {
        hi += step;
        step *= 2.0;
        if (step > 1e4)
            throw NumericalError("could not bracket the Lagrange multiplier");
    }
    if (lo == hi)
        return std::exp(lo);
    auto const r = boost::math::tools::bisect(excess, lo, hi, boost::math::tools::eps_tolerance<double>(48));
    return std::exp(0.5 * (r.first + r.second));
}

// ---------------------------------------------------------------------------
// Abstract turnpike moments

/// E^{P^T}|r^T_T - 1| and the multiplier ratio for each horizon, where
///   r^T_T = I^1(y^{1,T} Y_T) / I^0(y^{0,T} Y_T),   dP^T/dP proportional to (X^{0,T}_T)^p,
/// and investor 0 has power utility with p = effective_p(u).
///
/// The moment integrand has kinks where r^T_T = 1, which Gauss-Hermite node doubling does
/// not resolve. It is integrated with adaptive Gauss-Kronrod between the kinks, over
/// xi in [m - 14, m + 14] with m the mean of xi under P^T.
inline std::vector<DualitySolution> abstract_turnpike_moments(Utility const& u, BSMarket const& market,
                                                             std::vector<double> const& T_grid, double x0 = 1.0)
{
    validate(u);
    Utility const ref = detail::reference_utility(u);
    double const p = effective_p(u);
    double const q = p / (p - 1.0);
    std::vector<DualitySolution> out;
    out.reserve(T_grid.size());
    for (double T : T_grid)
    {
        detail::check_horizon(market, T, x0);
        DualitySolution s;
        s.T = T;
        s.multiplier_generic = lagrange_multiplier(u, market, T, x0);
        s.multiplier_power = lagrange_multiplier(ref, market, T, x0);
        s.multiplier_ratio = s.multiplier_power / (s.multiplier_generic / detail::leading_weight(u));
        s.budget = budget(u, market, T, s.multiplier_generic);

        double const y0 = s.multiplier_power;
        double const y1 = s.multiplier_generic;
        double const log_y0 = std::log(y0), log_y1 = std::log(y1);
        auto ratio = [&](double xi) {
            double const log_z = market.log_deflator(T, xi);
            return std::exp(log_inverse_marginal(u, log_y1 + log_z) - log_inverse_marginal(ref, log_y0 + log_z));
        };
        // E[(X^0)^p] = y0 x0 because (X^0)^{p-1} = y0 Y.
        double const norm = y0 * x0;
        auto weight = [&](double xi) {
            return std::exp(p * log_inverse_marginal(ref, log_y0 + market.log_deflator(T, xi))) / norm;
        };
        s.mass = normal_expectation(weight, detail::reach(u, market, T)).value;

        // Weighted density phi(xi) (X^0)^p / norm, written in logs.
        auto density = [&](double xi) {
            double const log_w = q * (log_y0 + market.log_deflator(T, xi)) - 0.5 * xi * xi;
            return std::exp(log_w) / (std::sqrt(2.0 * std::numbers::pi) * norm);
        };
        double const center = -q * market.lambda() * std::sqrt(T);
        double const a = center - 14.0, b = center + 14.0;

        std::vector<double> cuts{a};
        constexpr int kSamples = 560;
        double prev_x = a, prev_g = ratio(a) - 1.0;
        for (int k = 1; k <= kSamples; ++k)
        {
            double const x = a + (b - a) * k / kSamples;
            double const g = ratio(x) - 1.0;
            if ((prev_g < 0.0) != (g < 0.0) && prev_g != 0.0 && g != 0.0)
            {
                boost::uintmax_t iters = 200;
                auto const root = boost::math::tools::toms748_solve(
                    [&](double t) { return ratio(t) - 1.0; }, prev_x, x, prev_g, g,
                    boost::math::tools::eps_tolerance<double>(50), iters);
                cuts.push_back(0.5 * (root.first + root.second));
            }
            prev_x = x;
            prev_g = g;
        }
        cuts.push_back(b);
        auto integrand = [&](double xi) {
            double const d = density(xi);
            return d > 0.0 ? std::fabs(ratio(xi) - 1.0) * d : 0.0;
        };
        double moment = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
            moment += integrate(integrand, cuts[k], cuts[k + 1], 1e-12);
        s.moment = moment;
        out.push_back(s);
    }
    return out;
}

}  // namespace turnpike
