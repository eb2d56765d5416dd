// turnpike: command-line front end.
//
//   turnpike [options] check | eigen | horizon | simulate | turnpike | planner
//
// Options may also come from an INI file (--config); every run writes the effective
// configuration and a manifest next to its outputs.

#include "turnpike/turnpike.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef TURNPIKE_VERSION
#define TURNPIKE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace turnpike;

namespace {

enum Exit : int
{
    kOk = 0,
    kConditionFailed = 1,
    kInconclusive = 2,
    kNumerical = 3,
    kUsage = 64,
};

struct Options
{
    std::string model;
    double p = -1.0;
    std::size_t nodes = 2000;
    std::optional<double> window_lower;
    std::optional<double> window_upper;
    std::string out = "turnpike-out";
    std::string cache = ".turnpike-cache";
    std::string log_level = "info";

    // horizon
    double T = 5.0;
    std::vector<double> slices{0.0};
    double max_dt = 0.0;

    // simulation
    std::size_t paths = 10000;
    double dt = 1e-3;
    double t_max = 1.0;
    std::uint64_t seed = 1;
    std::string measure = "physical";
    std::size_t record_every = 10;
    unsigned threads = 0;

    // turnpike
    std::vector<double> horizons{1, 2, 4, 8, 16};
    double t = 1.0;
    double eps = 0.05;
    bool explicit_mode = false;
    bool abstract_mode = false;

    // duality / planner
    std::string utility = "mixture:1@2,1@8";
    double market_r = 0.01;
    double market_mu = 0.4;
    double market_sigma = 1.0;
    std::vector<double> capitals;
    std::vector<double> gammas;
    std::vector<double> weights;
};

class UsageError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct Run
{
    Options const& opt;
    fs::path out;
    Cache cache;
    std::vector<fs::path> outputs;

    fs::path output(std::string const& name)
    {
        fs::path p = out / name;
        outputs.push_back(p);
        return p;
    }
};

// ---------------------------------------------------------------------------
// Setup

struct Setup
{
    ModelFile file;
    Interval window;
    DerivedCoefficients coeffs;
    std::string key;
};

Setup load_setup(Options const& opt)
{
    if (opt.model.empty())
        throw UsageError("--model is required for this command");
    if (!fs::exists(opt.model))
        throw UsageError("model file not found: " + opt.model);
    ModelFile file = load_model(opt.model);
    Interval window = file.window;
    if (opt.window_lower)
        window.lower = *opt.window_lower;
    if (opt.window_upper)
        window.upper = *opt.window_upper;
    DerivedCoefficients coeffs = derive_coefficients(file.model, opt.p, file.y0);
    std::string const key = content_hash(std::string("eigen/") + TURNPIKE_VERSION + "\n" + file.canonical +
                                         "p=" + format_double(opt.p) + "\nwindow=" + format_double(window.lower) +
                                         "," + format_double(window.upper) + "\nnodes=" + std::to_string(opt.nodes));
    return {std::move(file), window, std::move(coeffs), key};
}

double elapsed_ms(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<EigenResult const> cached_eigen(Run& run, Setup const& s)
{
    auto const t0 = std::chrono::steady_clock::now();
    if (auto doc = run.cache.load("eigen", s.key))
    {
        auto r = std::make_shared<EigenResult const>(eigen_from_json(*doc));
        spdlog::info("eigen cache hit {} ({:.1f} ms)", s.key, elapsed_ms(t0));
        return r;
    }
    auto r = std::make_shared<EigenResult const>(
        solve_principal(s.coeffs, Grid1D::uniform(s.window.lower, s.window.upper, run.opt.nodes)));
    spdlog::info("eigen solved ({:.1f} ms), cached as {}", elapsed_ms(t0), s.key);
    run.cache.store("eigen", s.key, to_json(*r));
    return r;
}

SimConfig sim_config(Options const& opt, double y0)
{
    SimConfig c;
    c.n_paths = opt.paths;
    c.dt = opt.dt;
    c.t_max = opt.t_max;
    c.seed = opt.seed;
    c.y0 = y0;
    c.record_every = opt.record_every;
    c.threads = opt.threads;
    if (opt.measure == "physical")
        c.measure = Measure::Physical;
    else if (opt.measure == "long-run")
        c.measure = Measure::LongRun;
    else
        throw UsageError("--measure must be physical or long-run");
    return c;
}

/// "power:<p>", "log", or "mixture:<w>@<gamma>,<w>@<gamma>,...".
Utility parse_utility(std::string const& spec)
{
    auto const colon = spec.find(':');
    std::string const kind = spec.substr(0, colon);
    std::string const args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try
    {
        if (kind == "log")
            return LogUtility{};
        if (kind == "power")
            return PowerUtility{std::stod(args)};
        if (kind == "mixture")
        {
            MixtureUtility m;
            for (auto const& term : detail::split(args, ','))
            {
                auto const at = term.find('@');
                if (at == std::string::npos)
                    throw UsageError("mixture terms are written weight@gamma");
                m.weights.push_back(std::stod(term.substr(0, at)));
                m.gammas.push_back(std::stod(term.substr(at + 1)));
            }
            return m;
        }
    }
    catch (std::logic_error const&)
    {
        throw UsageError("malformed utility '" + spec + "'");
    }
    throw UsageError("unknown utility '" + spec + "' (power:<p>, log, mixture:<w>@<gamma>,...)");
}

std::vector<std::string> pi_columns(int d, std::string const& prefix = "pi")
{
    std::vector<std::string> cols;
    for (int i = 0; i < d; ++i)
        cols.push_back(prefix + std::to_string(i + 1));
    return cols;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_check(Run& run)
{
    Setup const s = load_setup(run.opt);
    ConditionReport const rep = check_turnpike_conditions(s.coeffs);
    bool const c_decays = rep.c_decays_left == Check::Pass && rep.c_decays_right == Check::Pass;
    Json doc{{"feller_left", to_string(rep.feller.left.verdict)},
             {"feller_right", to_string(rep.feller.right.verdict)},
             {"rho_constant", rep.rho_constant},
             {"c_sup", to_string(rep.c_sup)},
             {"c_sup_value", rep.c_sup_value},
             {"c_sup_infinite", rep.c_sup_infinite},
             {"c_decays_left", to_string(rep.c_decays_left)},
             {"c_decays_right", to_string(rep.c_decays_right)},
             {"c_decays", c_decays},
             {"m_hat_integral", to_string(rep.m_hat_integral.status)},
             {"m_hat_integral_value", rep.m_hat_integral.value},
             {"overall", rep.overall}};
    write_text_atomic(run.output("check.json"), doc.dump(2) + "\n");
    std::cout << doc.dump(2) << "\n";
    if (rep.overall)
        return kOk;
    return rep.any_inconclusive() ? kInconclusive : kConditionFailed;
}

int cmd_eigen(Run& run)
{
    Setup const s = load_setup(run.opt);
    auto const e = cached_eigen(run, s);
    CsvWriter csv(run.output("eigen.csv"), {"y", "v_hat", "log_deriv", "invariant_density"});
    for (std::size_t i = 0; i < e->grid.size(); ++i)
        csv.row({e->grid[i], e->v_hat[i], e->log_deriv[i], e->invariant_density[i]});
    std::printf("lambda_c = %.10g\n", e->lambda);
    if (!std::isnan(e->window_shift))
        spdlog::info("window doubling shift {:.3e}", e->window_shift);
    return kOk;
}

int cmd_horizon(Run& run)
{
    Options const& opt = run.opt;
    Setup const s = load_setup(opt);
    auto const e = cached_eigen(run, s);
    std::string const key = content_hash(s.key + "\nT=" + format_double(opt.T) + "\nmax_dt=" +
                                         format_double(opt.max_dt) + "\nslices=" + Json(opt.slices).dump());
    std::string text;
    if (auto doc = run.cache.load("horizon", key))
    {
        spdlog::info("horizon cache hit {}", key);
        text = doc->at("csv").get<std::string>();
    }
    else
    {
        auto const t0 = std::chrono::steady_clock::now();
        HorizonSolution const sol = solve_horizon(s.coeffs, *e, opt.T, HorizonOptions{opt.max_dt, 4});
        spdlog::info("horizon T={} solved with {} steps ({:.1f} ms)", opt.T, sol.steps(), elapsed_ms(t0));
        int const d = s.file.model.dimension;
        std::vector<std::string> header{"t", "y", "v", "h"};
        for (auto const& c : pi_columns(d))
            header.push_back(c);
        for (auto const& c : pi_columns(d, "pi_hat"))
            header.push_back(c);
        std::string body;
        auto line = [&](std::vector<double> const& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                body += (i ? "," : "") + format_double(cells[i]);
            body += "\n";
        };
        for (std::size_t i = 0; i < header.size(); ++i)
            body += (i ? "," : "") + header[i];
        body += "\n";
        for (double t : opt.slices)
        {
            if (!(t >= 0.0 && t <= opt.T))
                throw UsageError("slice times must lie in [0, T]");
            for (std::size_t i = 0; i < sol.grid().size(); ++i)
            {
                double const y = sol.grid()[i];
                std::vector<double> cells{t, y, sol.v_at(t, y), sol.h_at(t, y)};
                Vec const pi = finite_policy(sol, s.coeffs, t, y);
                Vec const pi_hat = long_run_policy(*e, s.coeffs, y);
                for (int k = 0; k < d; ++k)
                    cells.push_back(pi[k]);
                for (int k = 0; k < d; ++k)
                    cells.push_back(pi_hat[k]);
                line(cells);
            }
        }
        text = body;
        run.cache.store("horizon", key, Json{{"csv", text}});
    }
    write_text_atomic(run.output("horizon.csv"), text);
    return kOk;
}

int cmd_simulate(Run& run)
{
    Options const& opt = run.opt;
    Setup const s = load_setup(opt);
    auto const e = cached_eigen(run, s);
    SimConfig const cfg = sim_config(opt, s.file.y0);
    PathBundle const bundle = simulate_paths(s.file.model, s.coeffs, e, cfg);
    Grid1D const& g = e->grid;
    WealthPaths const w = wealth_path(bundle, [&](double, double y) {
        return long_run_policy(*e, s.coeffs, std::clamp(y, g[0], g[g.size() - 1]));
    });
    CsvWriter csv(run.output("simulate.csv"),
                  {"t", "mean_y", "sd_y", "mean_log_wealth", "se_log_wealth"});
    std::size_t const n = cfg.n_paths;
    for (std::size_t j = 0; j < bundle.n_times(); ++j)
    {
        std::vector<double> ys(n), lx;
        lx.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            ys[i] = bundle.y(i, j);
            if (std::isfinite(w.at(i, j)))
                lx.push_back(w.at(i, j));
        }
        MeanSE const my = mean_se(ys);
        MeanSE const ml = mean_se(lx);
        csv.row({bundle.times[j], my.mean, my.se * std::sqrt(static_cast<double>(n)), ml.mean, ml.se});
    }
    spdlog::info("{} paths, measure {}, reflection rate {:.4f}, aborted {}", n, to_string(cfg.measure),
                 bundle.flags.reflection_rate, w.aborted);
    if (bundle.flags.flagged)
        spdlog::warn("run flagged: reflection rate {:.4f} exceeds {}", bundle.flags.reflection_rate, kMaxFlagRate);
    return kOk;
}

int turnpike_explicit(Run& run)
{
    Options const& opt = run.opt;
    Setup const s = load_setup(opt);
    auto const e = cached_eigen(run, s);
    HorizonOptions hopt;
    hopt.max_dt = opt.max_dt > 0.0 ? opt.max_dt : 0.01;
    std::vector<HorizonEntry> entries;
    for (double T : opt.horizons)
    {
        HorizonEntry entry;
        entry.T = T;
        try
        {
            entry.solution = std::make_shared<HorizonSolution const>(solve_horizon(s.coeffs, *e, T, hopt));
        }
        catch (Error const& err)
        {
            entry.error = err.what();
            spdlog::warn("horizon T={} failed: {}", T, err.what());
        }
        entries.push_back(std::move(entry));
    }
    SimConfig cfg = sim_config(opt, s.file.y0);
    TurnpikeTable const table = turnpike_diagnostics(s.coeffs, e, entries, opt.t, opt.eps, cfg);

    CsvWriter csv(run.output("turnpike.csv"),
                  {"T", "ok", "prob_sup", "prob_sup_se", "mean_bracket", "mean_bracket_se", "prob_bracket",
                   "prob_bracket_se", "error"});
    CsvWriter plot(run.output("turnpike_bracket.csv"), {"x", "y"});
    std::size_t ok = 0;
    for (auto const& r : table.rows)
    {
        csv.write({format_double(r.T), r.ok ? "1" : "0", format_double(r.prob_sup.mean),
                   format_double(r.prob_sup.se), format_double(r.mean_bracket.mean),
                   format_double(r.mean_bracket.se), format_double(r.prob_bracket.mean),
                   format_double(r.prob_bracket.se), "\"" + r.error + "\""});
        if (r.ok)
        {
            ++ok;
            plot.row({r.T, r.mean_bracket.mean});
        }
    }
    if (table.flags.flagged)
        spdlog::warn("run flagged: clamp rate {:.4f}, reflection rate {:.4f}", table.flags.clamp_rate,
                     table.flags.reflection_rate);
    return ok > 0 ? kOk : kNumerical;
}

std::vector<DualitySolution> duality_rows(Utility const& u, BSMarket const& m, std::vector<double> const& horizons,
                                          std::vector<std::string>& errors)
{
    std::vector<DualitySolution> rows;
    for (double T : horizons)
    {
        try
        {
            rows.push_back(abstract_turnpike_moments(u, m, {T}).front());
            errors.emplace_back();
        }
        catch (Error const& err)
        {
            DualitySolution failed;
            failed.T = T;
            rows.push_back(failed);
            errors.emplace_back(err.what());
            spdlog::warn("horizon T={} failed: {}", T, err.what());
        }
    }
    return rows;
}

int write_duality(Run& run, std::string const& name, Utility const& u)
{
    Options const& opt = run.opt;
    BSMarket const market{opt.market_r, opt.market_mu, opt.market_sigma};
    std::vector<std::string> errors;
    auto const rows = duality_rows(u, market, opt.horizons, errors);
    CsvWriter csv(run.output(name + ".csv"), {"T", "ok", "multiplier_generic", "multiplier_power", "moment",
                                              "multiplier_ratio", "mass", "budget", "error"});
    CsvWriter plot(run.output(name + "_moment.csv"), {"x", "y"});
    std::size_t ok = 0;
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        auto const& r = rows[k];
        bool const good = errors[k].empty();
        csv.write({format_double(r.T), good ? "1" : "0", format_double(r.multiplier_generic),
                   format_double(r.multiplier_power), format_double(r.moment), format_double(r.multiplier_ratio),
                   format_double(r.mass), format_double(r.budget), "\"" + errors[k] + "\""});
        if (good)
        {
            ++ok;
            plot.row({r.T, r.moment});
        }
    }
    return ok > 0 ? kOk : kNumerical;
}

int cmd_turnpike(Run& run)
{
    if (run.opt.explicit_mode && run.opt.abstract_mode)
        throw UsageError("choose one of --explicit and --abstract");
    if (run.opt.abstract_mode)
    {
        Utility const u = parse_utility(run.opt.utility);
        validate(u);
        return write_duality(run, "duality", u);
    }
    return turnpike_explicit(run);
}

int cmd_planner(Run& run)
{
    Options const& opt = run.opt;
    MixtureUtility const u = build_planner_utility(opt.capitals, opt.gammas, opt.weights);
    double const p = effective_p(u);
    std::printf("effective p = %.10g (risk aversion %.10g)\n", p, 1.0 - p);
    CsvWriter w(run.output("planner_weights.csv"), {"capital", "gamma", "weight", "master_weight"});
    for (std::size_t i = 0; i < u.weights.size(); ++i)
    {
        w.row({opt.capitals[i], opt.gammas[i], opt.weights[i], u.weights[i]});
        std::printf("master weight %zu = %.10g\n", i + 1, u.weights[i]);
    }
    return write_duality(run, "planner", u);
}

// ---------------------------------------------------------------------------

/// Every option that can change results; output location, logging and threads are left out.
Json options_json(Options const& o)
{
    auto opt_num = [](std::optional<double> const& v) { return v ? Json(*v) : Json(nullptr); };
    std::string const model = !o.model.empty() && fs::exists(o.model) ? read_text(o.model) : "";
    return Json{{"model", model},
                {"p", o.p},
                {"nodes", o.nodes},
                {"window_lower", opt_num(o.window_lower)},
                {"window_upper", opt_num(o.window_upper)},
                {"T", o.T},
                {"slices", o.slices},
                {"max_dt", o.max_dt},
                {"paths", o.paths},
                {"dt", o.dt},
                {"t_max", o.t_max},
                {"seed", o.seed},
                {"measure", o.measure},
                {"record_every", o.record_every},
                {"horizons", o.horizons},
                {"t", o.t},
                {"eps", o.eps},
                {"explicit", o.explicit_mode},
                {"abstract", o.abstract_mode},
                {"utility", o.utility},
                {"market", {o.market_r, o.market_mu, o.market_sigma}},
                {"capitals", o.capitals},
                {"gammas", o.gammas},
                {"weights", o.weights}};
}

void write_manifest(Run& run, CLI::App const& app, std::string const& command, int code)
{
    // Unset options are written as key="" and would read back as zeros.
    std::istringstream all(app.config_to_str(true, false));
    std::string config, line;
    while (std::getline(all, line))
        if (!line.ends_with("=\"\""))
            config += line + '\n';
    write_text_atomic(run.out / "config.ini", config);
    Json const options = options_json(run.opt);
    Json outputs = Json::array();
    for (auto const& p : run.outputs)
        if (fs::exists(p))
            outputs.push_back({{"file", p.filename().string()}, {"sha1", content_hash(read_text(p))}});
    Json const manifest{{"command", command},
                        {"version", TURNPIKE_VERSION},
                        {"config_hash", content_hash(options.dump())},
                        {"options", options},
                        {"config_file", "config.ini"},
                        {"seed", run.opt.seed},
                        {"exit_code", code},
                        {"outputs", outputs}};
    write_text_atomic(run.out / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv)
{
    Options opt;
    CLI::App app{"Turnpike laboratory: ergodic HJB eigenproblem, finite-horizon HJB, simulation and duality checks"};
    app.set_version_flag("--version", TURNPIKE_VERSION);
    app.set_config("--config", "", "INI file with option values (command line wins)");
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--model", opt.model, "Model definition file (INI)");
    app.add_option("--p", opt.p, "Risk aversion parameter p < 1")->capture_default_str();
    app.add_option("--nodes", opt.nodes, "Interior grid nodes")->capture_default_str()->check(CLI::Range(16, 1 << 22));
    app.add_option("--window-lower", opt.window_lower, "Override the model's truncation window");
    app.add_option("--window-upper", opt.window_upper, "Override the model's truncation window");
    app.add_option("--out", opt.out, "Output directory")->capture_default_str();
    app.add_option("--cache", opt.cache, "Cache directory")->capture_default_str();
    app.add_option("--log-level", opt.log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    app.add_option("--T", opt.T, "Horizon for the horizon command")->capture_default_str();
    app.add_option("--slices", opt.slices, "Times written by the horizon command")->delimiter(',')->capture_default_str();
    app.add_option("--max-dt", opt.max_dt,
                   "Time step bound for horizon solves; 0 means a quarter grid spacing (horizon) or 0.01 (turnpike)")
        ->capture_default_str();

    app.add_option("--paths", opt.paths, "Monte Carlo paths")->capture_default_str();
    app.add_option("--dt", opt.dt, "Simulation step")->capture_default_str();
    app.add_option("--t-max", opt.t_max, "Simulated time span")->capture_default_str();
    app.add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    app.add_option("--measure", opt.measure, "physical or long-run")->capture_default_str();
    app.add_option("--record-every", opt.record_every, "Steps between recorded rows")->capture_default_str();
    app.add_option("--threads", opt.threads, "Worker threads (0: all cores); results do not depend on it");

    app.add_option("--horizons", opt.horizons, "Horizon grid")->delimiter(',')->capture_default_str();
    app.add_option("--t", opt.t, "Diagnostic time for the explicit turnpike")->capture_default_str();
    app.add_option("--eps", opt.eps, "Threshold epsilon for the explicit turnpike")->capture_default_str();

    app.add_option("--utility", opt.utility, "power:<p>, log or mixture:<w>@<gamma>,...")->capture_default_str();
    app.add_option("--market-r", opt.market_r, "Black-Scholes rate")->capture_default_str();
    app.add_option("--market-mu", opt.market_mu, "Black-Scholes excess drift")->capture_default_str();
    app.add_option("--market-sigma", opt.market_sigma, "Black-Scholes volatility")->capture_default_str();
    app.add_option("--capitals", opt.capitals, "Planner: investor capitals")->delimiter(',');
    app.add_option("--gammas", opt.gammas, "Planner: investor risk aversions")->delimiter(',');
    app.add_option("--weights", opt.weights, "Planner: welfare weights")->delimiter(',');

    app.add_subcommand("check", "Check the well-posedness conditions; exit 0 if all hold");
    app.add_subcommand("eigen", "Solve the ergodic eigenproblem and print lambda_c");
    app.add_subcommand("horizon", "Solve the finite-horizon equation and write slices");
    app.add_subcommand("simulate", "Simulate factor and long-run wealth paths");
    auto* tp = app.add_subcommand("turnpike", "Turnpike diagnostics over the horizon grid");
    tp->add_flag("--explicit", opt.explicit_mode, "Finite versus long-run policies on simulated paths (default)");
    tp->add_flag("--abstract", opt.abstract_mode, "Complete-market duality for a generic utility");
    app.add_subcommand("planner", "Social planner master utility and its duality diagnostics");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::Success const& e)
    {
        return app.exit(e);
    }
    catch (CLI::ParseError const& e)
    {
        app.exit(e);
        return kUsage;
    }

    auto logger = spdlog::stderr_color_mt("turnpike");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(opt.log_level));

    std::string const command = app.get_subcommands().front()->get_name();
    Run run{opt, fs::path(opt.out), Cache(opt.cache), {}};
    int code = kOk;
    try
    {
        fs::create_directories(run.out);
        if (command == "check")
            code = cmd_check(run);
        else if (command == "eigen")
            code = cmd_eigen(run);
        else if (command == "horizon")
            code = cmd_horizon(run);
        else if (command == "simulate")
            code = cmd_simulate(run);
        else if (command == "turnpike")
            code = cmd_turnpike(run);
        else
            code = cmd_planner(run);
    }
    catch (UsageError const& e)
    {
        spdlog::error("{}", e.what());
        code = kUsage;
    }
    catch (InvalidInput const& e)
    {
        spdlog::error("invalid input: {}", e.what());
        code = kUsage;
    }
    catch (IllPosed const& e)
    {
        spdlog::error("ill-posed: {}", e.what());
        code = kConditionFailed;
    }
    catch (NumericalError const& e)
    {
        spdlog::error("numerical failure: {}", e.what());
        code = kNumerical;
    }
    catch (Error const& e)
    {
        spdlog::error("{}", e.what());
        code = kNumerical;
    }
    catch (fs::filesystem_error const& e)
    {
        spdlog::error("{}", e.what());
        code = kUsage;
    }
    try
    {
        write_manifest(run, app, command, code);
    }
    catch (std::exception const& e)
    {
        spdlog::error("could not write the manifest: {}", e.what());
    }
    return code;
}
