#pragma once

// Euler-Maruyama simulation of (Y, R) under the physical or the long-run measure, and
// the path functionals built on it.
//
// Physical:  dY = b dt + a dW,                 dR = mu dt + sigma dZ,
// long-run:  dY = (B + A l) dt + a dW^,        dR = (mu + delta Upsilon l)/(1-p) dt + sigma dZ^,
// with l = v_hat_y/v_hat and Z = rho W + rho_bar B (hatted likewise).
//
// Path i draws from its own counter-based stream, so results do not depend on the number
// of worker threads; per-path results are reduced in path order.

#include "turnpike/eigen.hpp"
#include "turnpike/errors.hpp"
#include "turnpike/model.hpp"
#include "turnpike/pde.hpp"
#include "turnpike/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace turnpike {

enum class Measure
{
    Physical,
    LongRun
};

enum class Scheme
{
    EulerMaruyama
};

inline char const* to_string(Measure m) { return m == Measure::Physical ? "physical" : "long-run"; }

struct SimConfig
{
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    double t_max = 1.0;
    std::uint64_t seed = 1;
    Measure measure = Measure::Physical;
    Scheme scheme = Scheme::EulerMaruyama;
    double y0 = 0.0;
    /// Brownian increments are drawn on this finer step and summed to dt; 0 means dt.
    /// Runs sharing seed and noise_dt are driven by the same Brownian paths.
    double noise_dt = 0.0;
    /// PathBundle keeps Y and R every `record_every` steps.
    std::size_t record_every = 1;
    /// 0 uses the hardware concurrency.
    unsigned threads = 0;

    std::size_t steps() const
    {
        double const k = t_max / dt;
        auto const n = static_cast<std::size_t>(std::llround(k));
        if (!(dt > 0.0) || n == 0 || std::fabs(k - static_cast<double>(n)) > 1e-9 * k)
            throw InvalidInput("t_max must be a positive multiple of dt");
        return n;
    }

    std::size_t substeps() const
    {
        if (noise_dt <= 0.0)
            return 1;
        double const k = dt / noise_dt;
        auto const n = static_cast<std::size_t>(std::llround(k));
        if (n == 0 || std::fabs(k - static_cast<double>(n)) > 1e-9 * k)
            throw InvalidInput("dt must be a multiple of noise_dt");
        return n;
    }

    void validate() const
    {
        if (n_paths < 1)
            throw InvalidInput("n_paths must be at least 1");
        if (record_every < 1)
            throw InvalidInput("record_every must be at least 1");
        steps();
        substeps();
    }
};

/// Rates above this fraction of paths flag a run as invalid.
inline constexpr double kMaxFlagRate = 0.01;

/// Runs f(i) for i in [0, n) on `threads` workers and returns the results in index order.
template <class R, class F>
std::vector<R> map_paths(std::size_t n, unsigned threads, F const& f)
{
    std::vector<R> out(n);
    unsigned const workers =
        std::max(1u, std::min<unsigned>(threads ? threads : std::thread::hardware_concurrency(),
                                        static_cast<unsigned>((n + 255) / 256)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        constexpr std::size_t block = 256;
        for (;;)
        {
            std::size_t const start = next.fetch_add(block);
            if (start >= n)
                return;
            try
            {
                for (std::size_t i = start; i < std::min(n, start + block); ++i)
                    out[i] = f(i);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < workers; ++k)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

struct MeanSE
{
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSE mean_se(std::vector<double> const& x)
{
    MeanSE r;
    if (x.empty())
        return r;
    double const n = static_cast<double>(x.size());
    for (double v : x)
        r.mean += v;
    r.mean /= n;
    if (x.size() > 1)
    {
        double ss = 0.0;
        for (double v : x)
            ss += (v - r.mean) * (v - r.mean);
        r.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

/// Proportion with its binomial standard error.
inline MeanSE proportion(std::size_t hits, std::size_t n)
{
    double const p = static_cast<double>(hits) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

/// One Euler step of a path: state at t, increments over [t, t+dt], state at t+dt.
struct Step
{
    std::size_t k = 0;
    double t = 0.0;
    double dt = 0.0;
    double y = 0.0;
    double y_next = 0.0;
    double dW = 0.0;
    Vec dB;
    /// rho dW + rho_bar dB.
    Vec dZ;
    /// v_hat_y/v_hat at y (long-run measure only, NaN otherwise).
    double ell = std::numeric_limits<double>::quiet_NaN();
};

struct PathCounts
{
    std::size_t reflections = 0;
    std::size_t clamps = 0;
};

/// Generates paths of Y with their driving increments.
class PathEngine
{
  public:
    /// `coeffs` and `eigen` are required under the long-run measure. `reflect_at` defaults
    /// to the state domain.
    PathEngine(DiffusionModel model, std::optional<DerivedCoefficients> coeffs, std::shared_ptr<EigenResult const> eigen,
               SimConfig cfg, std::optional<Interval> reflect_at = std::nullopt)
        : model_(std::move(model)), coeffs_(std::move(coeffs)), eigen_(std::move(eigen)), cfg_(cfg)
    {
        cfg_.validate();
        if (cfg_.measure == Measure::LongRun && (!coeffs_ || !eigen_))
            throw InvalidInput("the long-run measure needs derived coefficients and an eigen result");
        if (!model_.domain.contains(cfg_.y0))
            throw InvalidInput("initial point outside the state domain");
        reflect_ = reflect_at.value_or(model_.domain);
        rho_bar_ = rho_bar(model_.rho);
        steps_ = cfg_.steps();
        substeps_ = cfg_.substeps();
    }

    SimConfig const& config() const { return cfg_; }
    DiffusionModel const& model() const { return model_; }
    DerivedCoefficients const* coeffs() const { return coeffs_ ? &*coeffs_ : nullptr; }
    EigenResult const* eigen() const { return eigen_.get(); }
    std::size_t steps() const { return steps_; }
    Mat const& rho_bar_matrix() const { return rho_bar_; }

    /// v_hat_y/v_hat with y clamped to the eigen grid; counts the clamp.
    double ell(double y, PathCounts& counts) const
    {
        Grid1D const& g = eigen_->grid;
        if (y < g[0] || y > g[g.size() - 1])
        {
            ++counts.clamps;
            y = std::clamp(y, g[0], g[g.size() - 1]);
        }
        return eigen_->log_derivative_at(y);
    }

    /// Calls visit(step) for every step of path `path`.
    template <class Visit>
    PathCounts run(std::size_t path, Visit&& visit) const
    {
        PathCounts counts;
        NormalStream noise(cfg_.seed, path);
        int const d = model_.dimension;
        double const sub = std::sqrt(cfg_.dt / static_cast<double>(substeps_));
        bool const long_run = cfg_.measure == Measure::LongRun;
        Step s;
        s.dt = cfg_.dt;
        s.dB = Vec::Zero(d);
        double y = cfg_.y0;
        for (std::size_t k = 0; k < steps_; ++k)
        {
            s.k = k;
            s.t = static_cast<double>(k) * cfg_.dt;
            s.y = y;
            s.dW = 0.0;
            s.dB.setZero();
            for (std::size_t m = 0; m < substeps_; ++m)
            {
                s.dW += sub * noise();
                for (int j = 0; j < d; ++j)
                    s.dB(j) += sub * noise();
            }
            s.dZ = model_.rho * s.dW + rho_bar_ * s.dB;
            double const a = model_.a(y);
            double drift;
            if (long_run)
            {
                s.ell = ell(y, counts);
                drift = coeffs_->B(y) + a * a * s.ell;
            }
            else
            {
                drift = model_.b(y);
            }
            s.y_next = reflect(y + drift * cfg_.dt + a * s.dW, counts);
            visit(static_cast<Step const&>(s));
            y = s.y_next;
        }
        return counts;
    }

  private:
    double reflect(double y, PathCounts& counts) const
    {
        if (reflect_.contains(y))
            return y;
        ++counts.reflections;
        if (y <= reflect_.lower)
            y = 2.0 * reflect_.lower - y;
        else if (y >= reflect_.upper)
            y = 2.0 * reflect_.upper - y;
        if (!reflect_.contains(y))
            y = 0.5 * (reflect_.lower + reflect_.upper);
        return y;
    }

    DiffusionModel model_;
    std::optional<DerivedCoefficients> coeffs_;
    std::shared_ptr<EigenResult const> eigen_;
    SimConfig cfg_;
    Interval reflect_;
    Mat rho_bar_;
    std::size_t steps_ = 0;
    std::size_t substeps_ = 1;
};

/// Fraction of paths with at least one reflection / clamp, and the 1% flag.
struct PathFlags
{
    double reflection_rate = 0.0;
    double clamp_rate = 0.0;
    bool flagged = false;

    static PathFlags from(std::vector<PathCounts> const& counts)
    {
        PathFlags f;
        std::size_t refl = 0;
        std::size_t clamp = 0;
        for (auto const& c : counts)
        {
            refl += c.reflections > 0;
            clamp += c.clamps > 0;
        }
        double const n = static_cast<double>(std::max<std::size_t>(1, counts.size()));
        f.reflection_rate = static_cast<double>(refl) / n;
        f.clamp_rate = static_cast<double>(clamp) / n;
        f.flagged = f.reflection_rate > kMaxFlagRate || f.clamp_rate > kMaxFlagRate;
        return f;
    }
};

// ---------------------------------------------------------------------------
// Path bundles and wealth

/// Y and cumulative excess returns R recorded every `record_every` steps (row 0 is t = 0).
/// The driving increments are regenerated on demand from the engine.
struct PathBundle
{
    std::shared_ptr<PathEngine const> engine;
    Measure measure = Measure::Physical;
    std::vector<double> times;
    /// n_paths x times.size()
    std::vector<double> Y;
    /// n_paths x times.size() x d
    std::vector<double> R;
    PathFlags flags;

    std::size_t n_paths() const { return engine->config().n_paths; }
    std::size_t n_times() const { return times.size(); }
    double y(std::size_t path, std::size_t j) const { return Y[path * times.size() + j]; }
    double r(std::size_t path, std::size_t j, int comp = 0) const
    {
        auto const d = static_cast<std::size_t>(engine->model().dimension);
        return R[(path * times.size() + j) * d + static_cast<std::size_t>(comp)];
    }

    /// Increments (dW, dB) of one path at the simulation step.
    std::pair<std::vector<double>, std::vector<Vec>> increments(std::size_t path) const
    {
        std::pair<std::vector<double>, std::vector<Vec>> out;
        engine->run(path, [&](Step const& s) {
            out.first.push_back(s.dW);
            out.second.push_back(s.dB);
        });
        return out;
    }
};

namespace detail {

inline std::vector<double> record_times(PathEngine const& e)
{
    std::vector<double> t{0.0};
    std::size_t const every = e.config().record_every;
    for (std::size_t k = every; k <= e.steps(); k += every)
        t.push_back(static_cast<double>(k) * e.config().dt);
    return t;
}

/// Return drift per unit time under the engine's measure.
inline Vec return_drift(PathEngine const& e, double y, double ell)
{
    if (e.config().measure == Measure::Physical)
        return e.model().mu(y);
    DerivedCoefficients const& c = *e.coeffs();
    return (e.model().mu(y) + c.delta() * ell * c.Upsilon(y)) / (1.0 - c.p());
}

}  // namespace detail

inline PathBundle simulate_paths(DiffusionModel model, std::optional<DerivedCoefficients> coeffs,
                                 std::shared_ptr<EigenResult const> eigen, SimConfig const& cfg)
{
    PathBundle b;
    b.engine = std::make_shared<PathEngine const>(std::move(model), std::move(coeffs), std::move(eigen), cfg);
    PathEngine const& e = *b.engine;
    b.measure = cfg.measure;
    b.times = detail::record_times(e);
    std::size_t const nt = b.times.size();
    auto const d = static_cast<std::size_t>(e.model().dimension);
    b.Y.assign(cfg.n_paths * nt, 0.0);
    b.R.assign(cfg.n_paths * nt * d, 0.0);
    auto counts = map_paths<PathCounts>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        double* y = b.Y.data() + i * nt;
        double* r = b.R.data() + i * nt * d;
        y[0] = cfg.y0;
        Vec cum = Vec::Zero(static_cast<int>(d));
        return e.run(i, [&](Step const& s) {
            cum += detail::return_drift(e, s.y, s.ell) * s.dt + e.model().sigma(s.y) * s.dZ;
            if ((s.k + 1) % cfg.record_every == 0)
            {
                std::size_t const j = (s.k + 1) / cfg.record_every;
                y[j] = s.y_next;
                for (std::size_t c = 0; c < d; ++c)
                    r[j * d + c] = cum(static_cast<int>(c));
            }
        });
    });
    b.flags = PathFlags::from(counts);
    return b;
}

/// Feedback portfolio weights pi(t, y) in R^d.
using Policy = std::function<Vec(double t, double y)>;

struct WealthPaths
{
    std::vector<double> times;
    /// log X, n_paths x times.size(); NaN after an abort.
    std::vector<double> log_wealth;
    std::size_t aborted = 0;
    std::vector<std::string> diagnostics;

    double at(std::size_t path, std::size_t j) const { return log_wealth[path * times.size() + j]; }
};

/// log X += (r + pi'mu_bar - pi'Sigma pi/2) dt + pi'sigma dZ from X_0 = 1, on the bundle's paths.
inline WealthPaths wealth_path(PathBundle const& bundle, Policy const& policy)
{
    PathEngine const& e = *bundle.engine;
    SimConfig const& cfg = e.config();
    WealthPaths w;
    w.times = bundle.times;
    std::size_t const nt = w.times.size();
    w.log_wealth.assign(cfg.n_paths * nt, 0.0);
    auto aborted = map_paths<std::string>(cfg.n_paths, cfg.threads, [&](std::size_t i) -> std::string {
        double* lx = w.log_wealth.data() + i * nt;
        double acc = 0.0;
        std::string diagnostic;
        e.run(i, [&](Step const& s) {
            if (!diagnostic.empty())
                return;
            Vec const pi = policy(s.t, s.y);
            if (!pi.allFinite())
            {
                diagnostic = "path " + std::to_string(i) + ": non-finite policy at t=" + std::to_string(s.t) +
                             ", y=" + std::to_string(s.y);
                for (std::size_t j = s.k / cfg.record_every + 1; j < nt; ++j)
                    lx[j] = std::numeric_limits<double>::quiet_NaN();
                return;
            }
            Mat const sig = e.model().sigma(s.y);
            Vec const expo = sig.transpose() * pi;
            double const drift = e.model().r(s.y) + pi.dot(detail::return_drift(e, s.y, s.ell)) - 0.5 * expo.squaredNorm();
            acc += drift * s.dt + expo.dot(s.dZ);
            if ((s.k + 1) % cfg.record_every == 0)
                lx[(s.k + 1) / cfg.record_every] = acc;
        });
        return diagnostic;
    });
    for (auto& d : aborted)
        if (!d.empty())
        {
            ++w.aborted;
            w.diagnostics.push_back(std::move(d));
        }
    return w;
}

// ---------------------------------------------------------------------------
// Explicit turnpike diagnostics

/// A horizon solution, or the reason it is missing.
struct HorizonEntry
{
    double T = 0.0;
    std::shared_ptr<HorizonSolution const> solution;
    std::string error;
};

struct TurnpikeRow
{
    double T = 0.0;
    bool ok = false;
    std::string error;
    /// P(sup_{u<=t} |r_u - 1| >= eps)
    MeanSE prob_sup;
    /// E[<Pi>_t]
    MeanSE mean_bracket;
    /// P(<Pi>_t >= eps)
    MeanSE prob_bracket;
};

struct TurnpikeTable
{
    double t = 0.0;
    double eps = 0.0;
    std::vector<TurnpikeRow> rows;
    PathFlags flags;
};

/// Ratio r^T = X^{pi^T}/X^{pi_hat} and bracket <Pi^T>_t = int (pi^T - pi_hat)'Sigma(pi^T - pi_hat)
/// on common physical paths. In exposure form e = sigma'pi the difference is
/// delta a (h^T_y/h^T) rho/(1-p), so the comparison does not lose digits to cancellation.
inline TurnpikeTable turnpike_diagnostics(DerivedCoefficients const& coeffs, std::shared_ptr<EigenResult const> eigen,
                                          std::vector<HorizonEntry> const& horizons, double t, double eps,
                                          SimConfig cfg)
{
    cfg.measure = Measure::Physical;
    cfg.t_max = t;
    PathEngine const e(coeffs.model(), coeffs, eigen, cfg);
    TurnpikeTable table;
    table.t = t;
    table.eps = eps;

    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < horizons.size(); ++k)
    {
        TurnpikeRow row;
        row.T = horizons[k].T;
        row.error = horizons[k].error;
        if (row.error.empty() && !horizons[k].solution)
            row.error = "missing horizon solution";
        if (row.error.empty() && horizons[k].solution->horizon() < t)
            row.error = "horizon shorter than the diagnostic time";
        if (row.error.empty())
            live.push_back(k);
        table.rows.push_back(row);
    }

    struct PerPath
    {
        std::vector<double> sup;
        std::vector<double> bracket;
        PathCounts counts;
    };
    double const scale = coeffs.delta() / (1.0 - coeffs.p());
    Grid1D const& g = eigen->grid;
    auto results = map_paths<PerPath>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        PerPath out;
        out.sup.assign(live.size(), 0.0);
        out.bracket.assign(live.size(), 0.0);
        std::vector<double> log_ratio(live.size(), 0.0);
        PathCounts clamps;
        out.counts = e.run(i, [&](Step const& s) {
            double y = s.y;
            if (y < g[0] || y > g[g.size() - 1])
            {
                ++clamps.clamps;
                y = std::clamp(y, g[0], g[g.size() - 1]);
            }
            double const a = e.model().a(s.y);
            Vec const theta = coeffs.theta(s.y);
            Vec const e_hat = coeffs.exposure(s.y, eigen->log_derivative_at(y));
            for (std::size_t k = 0; k < live.size(); ++k)
            {
                double const gh = horizons[live[k]].solution->log_deriv_h_at(s.t, y);
                Vec const diff = (scale * a * gh) * coeffs.rho();
                Vec const e_T = e_hat + diff;
                log_ratio[k] += (diff.dot(theta) - 0.5 * (e_T.squaredNorm() - e_hat.squaredNorm())) * s.dt +
                                diff.dot(s.dZ);
                out.bracket[k] += diff.squaredNorm() * s.dt;
                out.sup[k] = std::max(out.sup[k], std::fabs(std::expm1(log_ratio[k])));
            }
        });
        out.counts.clamps += clamps.clamps;
        return out;
    });

    std::vector<PathCounts> counts;
    counts.reserve(results.size());
    for (auto const& r : results)
        counts.push_back(r.counts);
    table.flags = PathFlags::from(counts);
    for (std::size_t k = 0; k < live.size(); ++k)
    {
        std::size_t hits_sup = 0;
        std::size_t hits_bracket = 0;
        std::vector<double> brackets;
        brackets.reserve(results.size());
        for (auto const& r : results)
        {
            hits_sup += r.sup[k] >= eps;
            hits_bracket += r.bracket[k] >= eps;
            brackets.push_back(r.bracket[k]);
        }
        TurnpikeRow& row = table.rows[live[k]];
        row.ok = true;
        row.prob_sup = proportion(hits_sup, results.size());
        row.prob_bracket = proportion(hits_bracket, results.size());
        row.mean_bracket = mean_se(brackets);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Section 4.3 identities

struct IdentityReport
{
    double max_discrepancy = 0.0;
    std::size_t paths = 0;
    PathFlags flags;
};

namespace detail {

/// Delta = q delta rho' rho_bar as a vector, so that Delta'dB^ is a scalar.
inline Vec delta_vector(DerivedCoefficients const& c, Mat const& rho_bar)
{
    return c.q() * c.delta() * (rho_bar.transpose() * c.rho());
}

/// dB^ for the step: B^ itself under the long-run measure, B shifted by
/// (q rho_bar theta + Delta a l) dt under the physical one.
inline Vec hat_dB(PathEngine const& e, DerivedCoefficients const& c, Vec const& Delta, Step const& s, double ell)
{
    if (e.config().measure == Measure::LongRun)
        return s.dB;
    return s.dB + (c.q() * (e.rho_bar_matrix() * c.theta(s.y)) + Delta * (e.model().a(s.y) * ell)) * s.dt;
}

inline double clamp_to(Grid1D const& g, double y, PathCounts& counts)
{
    if (y < g[0] || y > g[g.size() - 1])
    {
        ++counts.clamps;
        return std::clamp(y, g[0], g[g.size() - 1]);
    }
    return y;
}

}  // namespace detail

/// Max over paths and steps t <= t_max of
///   | (X^{pi^T}_t / X^_t) / [ (h_t/h_0)^{(1-delta)/p} E(-int a Delta'(h_y/h) dB^)_t^{1/p} ] - 1 |.
inline IdentityReport wealth_ratio_identity_check(DerivedCoefficients const& coeffs,
                                                  std::shared_ptr<EigenResult const> eigen,
                                                  HorizonSolution const& sol, SimConfig const& cfg)
{
    double const p = coeffs.p();
    if (p == 0.0)
        throw InvalidInput("the wealth-ratio identity needs p != 0");
    if (cfg.t_max > sol.horizon())
        throw InvalidInput("t_max exceeds the horizon");
    PathEngine const e(coeffs.model(), coeffs, eigen, cfg);
    Vec const Delta = detail::delta_vector(coeffs, e.rho_bar_matrix());
    double const delta = coeffs.delta();
    double const scale = delta / (1.0 - p);
    Grid1D const& g = sol.grid();

    struct PerPath
    {
        double worst = 0.0;
        PathCounts counts;
    };
    auto results = map_paths<PerPath>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        PerPath out;
        PathCounts clamps;
        double const log_h0 = std::log(sol.h_at(0.0, detail::clamp_to(g, cfg.y0, clamps)));
        double lhs = 0.0;
        double stoch_log = 0.0;
        out.counts = e.run(i, [&](Step const& s) {
            double const y = detail::clamp_to(g, s.y, clamps);
            double const a = e.model().a(s.y);
            double const ell = e.config().measure == Measure::LongRun ? s.ell : eigen->log_derivative_at(y);
            double const gh = sol.log_deriv_h_at(s.t, y);
            Vec const theta_bar = e.config().measure == Measure::LongRun ? coeffs.exposure(s.y, ell) : coeffs.theta(s.y);
            Vec const e_hat = coeffs.exposure(s.y, ell);
            Vec const diff = (scale * a * gh) * coeffs.rho();
            Vec const e_T = e_hat + diff;
            lhs += (diff.dot(theta_bar) - 0.5 * (e_T.squaredNorm() - e_hat.squaredNorm())) * s.dt + diff.dot(s.dZ);

            double const k = a * gh;
            Vec const dBh = detail::hat_dB(e, coeffs, Delta, s, ell);
            stoch_log += -k * Delta.dot(dBh) - 0.5 * k * k * Delta.squaredNorm() * s.dt;

            double const t_next = s.t + s.dt;
            double const y_next = detail::clamp_to(g, s.y_next, clamps);
            double const log_h = std::log(sol.h_at(std::min(t_next, sol.horizon()), y_next));
            double const rhs = (1.0 - delta) / p * (log_h - log_h0) + stoch_log / p;
            out.worst = std::max(out.worst, std::fabs(std::expm1(lhs - rhs)));
        });
        out.counts.clamps += clamps.clamps;
        return out;
    });
    IdentityReport rep;
    rep.paths = results.size();
    std::vector<PathCounts> counts;
    for (auto const& r : results)
    {
        rep.max_discrepancy = std::max(rep.max_discrepancy, r.worst);
        counts.push_back(r.counts);
    }
    rep.flags = PathFlags::from(counts);
    return rep;
}

/// dP^T/dP^ on F_t along long-run paths: (h^T(t,Y_t)/h^T(0,y)) E(-int a Delta'(h_y/h) dB^)_t,
/// recorded every `record_every` steps (row 0 is t = 0, value 1).
struct DensityRatioPaths
{
    std::vector<double> times;
    std::vector<double> values;
    PathFlags flags;

    std::size_t n_paths() const { return values.size() / times.size(); }
    double at(std::size_t path, std::size_t j) const { return values[path * times.size() + j]; }
    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> c;
        for (std::size_t i = 0; i < n_paths(); ++i)
            c.push_back(at(i, j));
        return c;
    }
};

inline DensityRatioPaths density_ratio_path(DerivedCoefficients const& coeffs, std::shared_ptr<EigenResult const> eigen,
                                            HorizonSolution const& sol, SimConfig cfg)
{
    if (coeffs.p() == 0.0)
        throw InvalidInput("the density ratio needs p != 0");
    if (cfg.t_max > sol.horizon())
        throw InvalidInput("t_max exceeds the horizon");
    cfg.measure = Measure::LongRun;
    PathEngine const e(coeffs.model(), coeffs, eigen, cfg);
    Vec const Delta = detail::delta_vector(coeffs, e.rho_bar_matrix());
    Grid1D const& g = sol.grid();
    DensityRatioPaths out;
    out.times = detail::record_times(e);
    std::size_t const nt = out.times.size();
    out.values.assign(cfg.n_paths * nt, 1.0);
    auto counts = map_paths<PathCounts>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        PathCounts clamps;
        double* row = out.values.data() + i * nt;
        double const log_h0 = std::log(sol.h_at(0.0, detail::clamp_to(g, cfg.y0, clamps)));
        double stoch_log = 0.0;
        PathCounts c = e.run(i, [&](Step const& s) {
            double const y = detail::clamp_to(g, s.y, clamps);
            double const k = e.model().a(s.y) * sol.log_deriv_h_at(s.t, y);
            stoch_log += -k * Delta.dot(s.dB) - 0.5 * k * k * Delta.squaredNorm() * s.dt;
            if ((s.k + 1) % cfg.record_every == 0)
            {
                double const t_next = std::min(s.t + s.dt, sol.horizon());
                double const log_h = std::log(sol.h_at(t_next, detail::clamp_to(g, s.y_next, clamps)));
                row[(s.k + 1) / cfg.record_every] = std::exp(log_h - log_h0 + stoch_log);
            }
        });
        c.clamps += clamps.clamps;
        return c;
    });
    out.flags = PathFlags::from(counts);
    return out;
}

// ---------------------------------------------------------------------------
// Feynman-Kac checks

struct FeynmanKacEstimate
{
    MeanSE estimate;
    /// Fraction of paths that left the eigen window and were reflected back.
    double flag_rate = 0.0;
    bool valid = true;
};

/// Monte Carlo estimate of h^T(t, y) = E^[1/v_hat(Y_{T-t})] under the long-run dynamics,
/// with paths reflected at the eigen window ends.
inline FeynmanKacEstimate feynman_kac_check(DerivedCoefficients const& coeffs, std::shared_ptr<EigenResult const> eigen,
                                            double T, double t, double y, SimConfig cfg)
{
    if (!(t >= 0.0 && t <= T))
        throw InvalidInput("need 0 <= t <= T");
    FeynmanKacEstimate out;
    double const tau = T - t;
    if (tau == 0.0)
    {
        out.estimate = {std::exp(-extrapolated_log_v(*eigen, y)), 0.0};
        return out;
    }
    cfg.measure = Measure::LongRun;
    cfg.y0 = y;
    cfg.t_max = tau;
    PathEngine const e(coeffs.model(), coeffs, eigen, cfg, eigen->window());
    std::vector<PathCounts> counts(cfg.n_paths);
    auto samples = map_paths<double>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        double last = y;
        counts[i] = e.run(i, [&](Step const& s) { last = s.y_next; });
        return std::exp(-extrapolated_log_v(*eigen, last));
    });
    out.estimate = mean_se(samples);
    std::size_t flagged = 0;
    for (auto const& c : counts)
        flagged += c.reflections > 0;
    out.flag_rate = static_cast<double>(flagged) / static_cast<double>(cfg.n_paths);
    out.valid = out.flag_rate <= kMaxFlagRate;
    return out;
}

/// Sample means of h^T(t, Y_t)/h^T(0, y) under the long-run dynamics at the given times.
inline std::vector<MeanSE> h_martingale_check(DerivedCoefficients const& coeffs,
                                              std::shared_ptr<EigenResult const> eigen, HorizonSolution const& sol,
                                              std::vector<double> const& times, SimConfig cfg)
{
    cfg.measure = Measure::LongRun;
    cfg.t_max = *std::max_element(times.begin(), times.end());
    if (cfg.t_max > sol.horizon())
        throw InvalidInput("check time beyond the horizon");
    PathEngine const e(coeffs.model(), coeffs, eigen, cfg);
    Grid1D const& g = sol.grid();
    std::vector<std::size_t> at_step;
    for (double t : times)
    {
        auto const k = static_cast<std::size_t>(std::llround(t / cfg.dt));
        if (std::fabs(static_cast<double>(k) * cfg.dt - t) > 1e-9 * std::max(1.0, t))
            throw InvalidInput("check times must be multiples of dt");
        at_step.push_back(k);
    }
    auto ratios = map_paths<std::vector<double>>(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        PathCounts clamps;
        double const h0 = sol.h_at(0.0, detail::clamp_to(g, cfg.y0, clamps));
        std::vector<double> r(times.size(), 1.0);
        e.run(i, [&](Step const& s) {
            for (std::size_t j = 0; j < times.size(); ++j)
                if (at_step[j] == s.k + 1)
                    r[j] = sol.h_at(times[j], detail::clamp_to(g, s.y_next, clamps)) / h0;
        });
        return r;
    });
    std::vector<MeanSE> out;
    for (std::size_t j = 0; j < times.size(); ++j)
    {
        std::vector<double> col;
        col.reserve(ratios.size());
        for (auto const& r : ratios)
            col.push_back(r[j]);
        out.push_back(mean_se(col));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distribution checks

/// Cumulative distribution of the invariant density on the eigen grid (trapezoid rule,
/// renormalized to end at 1); linear between nodes, 0 and 1 outside.
inline std::function<double(double)> invariant_cdf(EigenResult const& r)
{
    Grid1D const& g = r.grid;
    std::size_t const n = g.size();
    auto cdf = std::make_shared<std::vector<double>>(n + 2, 0.0);
    auto at = std::make_shared<std::vector<double>>(n + 2);
    (*at)[0] = g.lower();
    (*at)[n + 1] = g.upper();
    for (std::size_t i = 0; i < n; ++i)
        (*at)[i + 1] = g[i];
    auto density = [&](std::size_t k) { return k == 0 || k == n + 1 ? 0.0 : r.invariant_density[k - 1]; };
    for (std::size_t k = 1; k < n + 2; ++k)
        (*cdf)[k] = (*cdf)[k - 1] + 0.5 * (density(k - 1) + density(k)) * ((*at)[k] - (*at)[k - 1]);
    double const total = cdf->back();
    for (double& c : *cdf)
        c /= total;
    return [cdf, at](double y) {
        if (y <= at->front())
            return 0.0;
        if (y >= at->back())
            return 1.0;
        auto const it = std::upper_bound(at->begin(), at->end(), y);
        std::size_t const k = static_cast<std::size_t>(it - at->begin()) - 1;
        double const w = (y - (*at)[k]) / ((*at)[k + 1] - (*at)[k]);
        return (1.0 - w) * (*cdf)[k] + w * (*cdf)[k + 1];
    };
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_distance(std::vector<double> sample, std::function<double(double)> const& cdf)
{
    std::sort(sample.begin(), sample.end());
    double const n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i)
    {
        double const f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace turnpike
