#pragma once

// Model definition files (INI syntax):
//
//   [domain]        lower, upper (may be -inf/inf), window_lower, window_upper, y0 (optional)
//   [coefficients]  either `preset = ou | black_scholes` plus numeric parameters,
//                   or expressions in y for r, b, a, mu, sigma and an optional `dimension`.
//                   Vector entries are separated by ',', matrix rows by ';'.
//   [correlation]   rho, comma separated

#include "turnpike/errors.hpp"
#include "turnpike/expr.hpp"
#include "turnpike/model.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace turnpike {

struct ModelFile
{
    DiffusionModel model;
    Interval window;
    double y0 = 0.0;
    /// Sorted `section.key=value` lines; stable input for content hashes.
    std::string canonical;
};

namespace detail {

inline double parse_extended(std::string s)
{
    boost::algorithm::trim(s);
    boost::algorithm::to_lower(s);
    if (s == "inf" || s == "+inf")
        return kInf;
    if (s == "-inf")
        return -kInf;
    return parse_coefficient(s)(0.0);
}

inline std::vector<std::string> split(std::string const& s, char sep)
{
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, [sep](char c) { return c == sep; });
    for (auto& p : parts)
        boost::algorithm::trim(p);
    return parts;
}

inline std::vector<Expr> parse_list(std::string const& s)
{
    std::vector<Expr> out;
    for (auto const& part : split(s, ','))
        out.push_back(parse_coefficient(part));
    return out;
}

}  // namespace detail

inline ModelFile parse_model(std::string const& text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try
    {
        pt::read_ini(in, tree);
    }
    catch (pt::ini_parser_error const& e)
    {
        throw InvalidInput(std::string("model file: ") + e.what());
    }

    auto get = [&](std::string const& path) -> std::optional<std::string> {
        auto v = tree.get_optional<std::string>(path);
        if (!v)
            return std::nullopt;
        return boost::algorithm::trim_copy(*v);
    };
    auto require = [&](std::string const& path) {
        auto v = get(path);
        if (!v)
            throw InvalidInput("model file: missing key " + path);
        return *v;
    };
    auto number = [&](std::string const& path, std::optional<double> fallback = std::nullopt) {
        auto v = get(path);
        if (!v)
        {
            if (fallback)
                return *fallback;
            throw InvalidInput("model file: missing key " + path);
        }
        return detail::parse_extended(*v);
    };

    ModelFile out;
    DiffusionModel& m = out.model;

    if (auto preset = get("coefficients.preset"))
    {
        double const r = number("coefficients.r");
        double const rho = number("correlation.rho", 0.0);
        if (*preset == "ou")
            m = DiffusionModel::ou(r, number("coefficients.kappa", 1.0), number("coefficients.a", 1.0),
                                   number("coefficients.slope", 1.0), number("coefficients.sigma", 1.0), rho);
        else if (*preset == "black_scholes")
            m = DiffusionModel::black_scholes(r, number("coefficients.mu"), number("coefficients.sigma"), rho,
                                              number("coefficients.kappa", 1.0), number("coefficients.a", 1.0));
        else
            throw InvalidInput("model file: unknown preset '" + *preset + "'");
    }
    else
    {
        int const d = static_cast<int>(number("coefficients.dimension", 1.0));
        if (d < 1 || d > kMaxDim)
            throw InvalidInput("model file: dimension out of range");
        m.dimension = d;
        Expr const r = parse_coefficient(require("coefficients.r"));
        Expr const b = parse_coefficient(require("coefficients.b"));
        Expr const a = parse_coefficient(require("coefficients.a"));
        std::vector<Expr> const mu = detail::parse_list(require("coefficients.mu"));
        if (static_cast<int>(mu.size()) != d)
            throw InvalidInput("model file: mu needs " + std::to_string(d) + " entries");
        std::vector<std::vector<Expr>> sigma;
        for (auto const& row : detail::split(require("coefficients.sigma"), ';'))
        {
            sigma.push_back(detail::parse_list(row));
            if (static_cast<int>(sigma.back().size()) != d)
                throw InvalidInput("model file: sigma rows need " + std::to_string(d) + " entries");
        }
        if (static_cast<int>(sigma.size()) != d)
            throw InvalidInput("model file: sigma needs " + std::to_string(d) + " rows");

        m.r = r;
        m.b = b;
        m.a = a;
        m.mu = [mu](double y) {
            Vec v(static_cast<Eigen::Index>(mu.size()));
            for (std::size_t i = 0; i < mu.size(); ++i)
                v[static_cast<Eigen::Index>(i)] = mu[i](y);
            return v;
        };
        m.sigma = [sigma](double y) {
            auto const n = static_cast<Eigen::Index>(sigma.size());
            Mat s(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    s(i, j) = sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](y);
            return s;
        };
        m.rho = Vec::Zero(d);
        if (auto rho = get("correlation.rho"))
        {
            auto parts = detail::split(*rho, ',');
            if (static_cast<int>(parts.size()) != d)
                throw InvalidInput("model file: rho needs " + std::to_string(d) + " entries");
            for (int i = 0; i < d; ++i)
                m.rho[i] = detail::parse_extended(parts[static_cast<std::size_t>(i)]);
        }
    }

    m.domain.lower = number("domain.lower", -kInf);
    m.domain.upper = number("domain.upper", kInf);
    out.window.lower = number("domain.window_lower");
    out.window.upper = number("domain.window_upper");
    if (!(out.window.lower < out.window.upper) || out.window.lower < m.domain.lower ||
        out.window.upper > m.domain.upper)
        throw InvalidInput("model file: window must be a nonempty subinterval of the domain");
    out.y0 = number("domain.y0", 0.5 * (out.window.lower + out.window.upper));
    if (!m.domain.contains(out.y0))
        throw InvalidInput("model file: y0 outside the domain");
    m.validate({out.y0, 0.5 * (out.y0 + out.window.lower), 0.5 * (out.y0 + out.window.upper)});

    std::vector<std::string> lines;
    for (auto const& [section, keys] : tree)
        for (auto const& [key, value] : keys)
            lines.push_back(section + "." + key + "=" + boost::algorithm::trim_copy(value.data()));
    std::sort(lines.begin(), lines.end());
    for (auto const& l : lines)
        out.canonical += l + "\n";
    return out;
}

inline ModelFile load_model(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

}  // namespace turnpike
