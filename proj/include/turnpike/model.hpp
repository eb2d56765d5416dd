#pragma once

// Market primitives, utilities and the derived coefficient functions.
//
// State:   dY = b(Y)dt + a(Y)dW
// Returns: dR = mu(Y)dt + sigma(Y)dZ,  d<W,Z> = rho dt,  rho constant in R^d.

#include "turnpike/errors.hpp"
#include "turnpike/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace turnpike {

inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using VecFn = std::function<Vec(double)>;
using MatFn = std::function<Mat(double)>;

/// Open interval (lower, upper); either end may be infinite.
struct Interval
{
    double lower = -kInf;
    double upper = kInf;

    bool contains(double y) const { return y > lower && y < upper; }
    bool bounded_below() const { return std::isfinite(lower); }
    bool bounded_above() const { return std::isfinite(upper); }
};

struct DiffusionModel
{
    Interval domain;
    int dimension = 1;
    ScalarFn r;
    ScalarFn b;
    ScalarFn a;
    VecFn mu;
    MatFn sigma;
    Vec rho = Vec::Zero(1);

    /// dY = -kappa*Y dt + a dW, mu = slope*y, constant sigma and r; d = 1.
    static DiffusionModel ou(double r, double kappa, double a, double slope, double sigma, double rho)
    {
        DiffusionModel m;
        m.r = [r](double) { return r; };
        m.b = [kappa](double y) { return -kappa * y; };
        m.a = [a](double) { return a; };
        m.mu = [slope](double y) { return Vec::Constant(1, slope * y); };
        m.sigma = [sigma](double) { return Mat::Constant(1, 1, sigma); };
        m.rho = Vec::Constant(1, rho);
        return m;
    }

    /// Constant r, mu, sigma; the state is an OU factor that does not enter the market.
    static DiffusionModel black_scholes(double r, double mu, double sigma, double rho, double kappa = 1.0,
                                        double a = 1.0)
    {
        DiffusionModel m;
        m.r = [r](double) { return r; };
        m.b = [kappa](double y) { return -kappa * y; };
        m.a = [a](double) { return a; };
        m.mu = [mu](double) { return Vec::Constant(1, mu); };
        m.sigma = [sigma](double) { return Mat::Constant(1, 1, sigma); };
        m.rho = Vec::Constant(1, rho);
        return m;
    }

    double rho_squared() const { return rho.squaredNorm(); }

    /// Throws InvalidInput if a structural invariant fails or a coefficient is bad at `y`.
    void validate_at(double y) const
    {
        if (!domain.contains(y))
            throw InvalidInput("sample point outside the state domain");
        if (!(a(y) > 0.0))
            throw InvalidInput("state volatility a(y) must be positive at y=" + std::to_string(y));
        Mat const s = sigma(y);
        if (s.rows() != dimension || s.cols() != dimension)
            throw InvalidInput("sigma has the wrong shape");
        if (mu(y).size() != dimension)
            throw InvalidInput("mu has the wrong length");
        if (!(std::fabs(s.determinant()) > 0.0))
            throw InvalidInput("sigma(y) is singular at y=" + std::to_string(y));
    }

    void validate(std::vector<double> const& samples) const
    {
        if (dimension < 1 || dimension > kMaxDim)
            throw InvalidInput("dimension must be between 1 and " + std::to_string(kMaxDim));
        if (!r || !b || !a || !mu || !sigma)
            throw InvalidInput("model has an unset coefficient");
        if (rho.size() != dimension)
            throw InvalidInput("rho has the wrong length");
        if (rho_squared() > 1.0 + 1e-14)
            throw InvalidInput("rho'rho must not exceed 1");
        if (!(domain.lower < domain.upper))
            throw InvalidInput("empty state domain");
        for (double y : samples)
            validate_at(y);
    }
};

/// Symmetric positive semidefinite square root of I - rho rho'.
inline Mat rho_bar(Vec const& rho)
{
    int const d = static_cast<int>(rho.size());
    Mat out = Mat::Identity(d, d);
    double const n2 = rho.squaredNorm();
    if (n2 > 0.0)
        out -= ((1.0 - std::sqrt(std::max(0.0, 1.0 - n2))) / n2) * (rho * rho.transpose());
    return out;
}

// ---------------------------------------------------------------------------
// Utilities

struct PowerUtility
{
    double p;
};
struct LogUtility
{
};
/// U(x) = sum_i w_i x^(1-gamma_i)/(1-gamma_i).
struct MixtureUtility
{
    std::vector<double> weights;
    std::vector<double> gammas;
};

using Utility = std::variant<PowerUtility, LogUtility, MixtureUtility>;

inline void validate(Utility const& u)
{
    if (auto const* pw = std::get_if<PowerUtility>(&u))
    {
        if (!(pw->p < 1.0) || pw->p == 0.0)
            throw InvalidInput("power utility needs p < 1 and p != 0");
    }
    else if (auto const* mx = std::get_if<MixtureUtility>(&u))
    {
        if (mx->weights.empty() || mx->weights.size() != mx->gammas.size())
            throw InvalidInput("mixture needs equally many weights and risk aversions");
        for (std::size_t i = 0; i < mx->weights.size(); ++i)
        {
            if (!(mx->weights[i] > 0.0) || !(mx->gammas[i] > 0.0))
                throw InvalidInput("mixture weights and risk aversions must be positive");
            if (mx->gammas[i] == 1.0)
                throw InvalidInput("mixture terms with risk aversion 1 are not supported");
        }
    }
}

inline double effective_p(Utility const& u)
{
    if (auto const* pw = std::get_if<PowerUtility>(&u))
        return pw->p;
    if (std::holds_alternative<LogUtility>(u))
        return 0.0;
    auto const& mx = std::get<MixtureUtility>(u);
    return 1.0 - *std::min_element(mx.gammas.begin(), mx.gammas.end());
}

/// Rescale so the term with the smallest risk aversion has weight 1.
inline MixtureUtility normalized(MixtureUtility m)
{
    auto const k = static_cast<std::size_t>(std::min_element(m.gammas.begin(), m.gammas.end()) - m.gammas.begin());
    double const w0 = m.weights[k];
    for (double& w : m.weights)
        w /= w0;
    return m;
}

/// U'(x).
inline double marginal(Utility const& u, double x)
{
    if (!(x > 0.0))
        throw InvalidInput("marginal utility needs x > 0");
    if (auto const* pw = std::get_if<PowerUtility>(&u))
        return std::pow(x, pw->p - 1.0);
    if (std::holds_alternative<LogUtility>(u))
        return 1.0 / x;
    auto const& mx = std::get<MixtureUtility>(u);
    double s = 0.0;
    for (std::size_t i = 0; i < mx.weights.size(); ++i)
        s += mx.weights[i] * std::pow(x, -mx.gammas[i]);
    return s;
}

/// U'(x) / x^(p_ref - 1), with mixture weights normalized first.
inline double marginal_ratio(Utility const& u, double p_ref, double x)
{
    if (!(x > 0.0))
        throw InvalidInput("marginal ratio needs x > 0");
    if (auto const* mx = std::get_if<MixtureUtility>(&u))
    {
        MixtureUtility const n = normalized(*mx);
        // Sum in relative form so large x does not underflow.
        double s = 0.0;
        for (std::size_t i = 0; i < n.weights.size(); ++i)
            s += n.weights[i] * std::pow(x, 1.0 - n.gammas[i] - p_ref);
        return s;
    }
    return marginal(u, x) / std::pow(x, p_ref - 1.0);
}

/// Planner's master utility: weights w_i x_i^(1 - gamma_i).
inline MixtureUtility build_planner_utility(std::vector<double> const& capitals, std::vector<double> const& gammas,
                                            std::vector<double> const& weights)
{
    if (capitals.size() != gammas.size() || gammas.size() != weights.size() || capitals.empty())
        throw InvalidInput("capitals, risk aversions and weights must have equal nonzero length");
    MixtureUtility m;
    for (std::size_t i = 0; i < capitals.size(); ++i)
    {
        if (!(capitals[i] > 0.0) || !(gammas[i] > 0.0) || !(weights[i] > 0.0))
            throw InvalidInput("planner inputs must be positive");
        if (gammas[i] == 1.0)
            throw InvalidInput("log investors enter the planner problem as a constant and are excluded");
        m.weights.push_back(weights[i] * std::pow(capitals[i], 1.0 - gammas[i]));
        m.gammas.push_back(gammas[i]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Derived coefficients

/// Everything the eigen, PDE and simulation layers need, for one (model, p, y0).
///
/// Vector quantities are expressed through theta = sigma^{-1} mu, so
///   mu' Sigma^{-1} mu = |theta|^2   and   Upsilon' Sigma^{-1} mu = a rho'theta.
class DerivedCoefficients
{
  public:
    DerivedCoefficients(DiffusionModel model, double p, double y0) : model_(std::make_shared<DiffusionModel>(std::move(model)))
    {
        if (!(p < 1.0))
            throw InvalidInput("risk aversion parameter p must be below 1");
        if (!model_->domain.contains(y0))
            throw InvalidInput("reference point y0 must lie inside the state domain");
        model_->validate({y0});
        p_ = p;
        q_ = p / (p - 1.0);
        y0_ = y0;
        double const qrr = q_ * model_->rho_squared();
        if (!(qrr < 1.0))
            throw InvalidInput("q rho'rho must be below 1");
        delta_ = 1.0 / (1.0 - qrr);

        auto const m = model_;
        double const q = q_;
        log_m_ = CumulativeIntegral([m](double y) { return 2.0 * m->b(y) / (m->a(y) * m->a(y)); }, y0,
                                    m->domain.lower, m->domain.upper);
        auto self_B = [m, q](double y) {
            double const ay = m->a(y);
            return m->b(y) - q * ay * m->rho.dot(theta_of(*m, y));
        };
        log_m_hat_ = CumulativeIntegral([m, self_B](double y) { return 2.0 * self_B(y) / (m->a(y) * m->a(y)); }, y0,
                                        m->domain.lower, m->domain.upper);
    }

    DiffusionModel const& model() const { return *model_; }
    int dimension() const { return model_->dimension; }
    double p() const { return p_; }
    double q() const { return q_; }
    double delta() const { return delta_; }
    double y0() const { return y0_; }
    Vec const& rho() const { return model_->rho; }

    static Vec theta_of(DiffusionModel const& m, double y) { return m.sigma(y).partialPivLu().solve(m.mu(y)); }

    Vec theta(double y) const { return theta_of(*model_, y); }
    Mat Sigma(double y) const
    {
        Mat const s = model_->sigma(y);
        return s * s.transpose();
    }
    double A(double y) const
    {
        double const ay = model_->a(y);
        return ay * ay;
    }
    Vec Upsilon(double y) const { return model_->sigma(y) * model_->rho * model_->a(y); }

    double c(double y) const { return (p_ * model_->r(y) - 0.5 * q_ * theta(y).squaredNorm()) / delta_; }
    double B(double y) const { return model_->b(y) - q_ * model_->a(y) * model_->rho.dot(theta(y)); }

    double log_m(double y) const { return log_m_(y) - std::log(A(y)); }
    double log_m_hat(double y) const { return log_m_hat_(y) - std::log(A(y)); }
    double m(double y) const { return std::exp(log_m(y)); }
    double m_hat(double y) const { return std::exp(log_m_hat(y)); }

    /// s(y) = integral of 2b/A from y0 (scale exponent of the physical speed measure).
    double scale_exponent(double y) const { return log_m_(y); }
    double scale_exponent_hat(double y) const { return log_m_hat_(y); }

    /// Portfolio exposure sigma'pi for a given value of the log-derivative g = v_y/v.
    Vec exposure(double y, double g) const
    {
        return (theta(y) + (delta_ * model_->a(y) * g) * model_->rho) / (1.0 - p_);
    }

    /// pi = Sigma^{-1}(mu + delta Upsilon g)/(1-p).
    Vec policy(double y, double g) const { return model_->sigma(y).transpose().partialPivLu().solve(exposure(y, g)); }

  private:
    std::shared_ptr<DiffusionModel> model_;
    double p_ = 0.0;
    double q_ = 0.0;
    double delta_ = 1.0;
    double y0_ = 0.0;
    CumulativeIntegral log_m_;
    CumulativeIntegral log_m_hat_;
};

inline DerivedCoefficients derive_coefficients(DiffusionModel model, double p, double y0)
{
    return DerivedCoefficients(std::move(model), p, y0);
}

}  // namespace turnpike
