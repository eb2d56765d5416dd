#pragma once

// CSV output, content-addressed JSON cache, and run manifests.

#include "turnpike/eigen.hpp"
#include "turnpike/errors.hpp"
#include "turnpike/grid.hpp"

#include <boost/uuid/name_generator_sha1.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace turnpike {

using Json = nlohmann::json;

/// SHA-1 name-based UUID of `text`, as 32 hex digits.
inline std::string content_hash(std::string const& text)
{
    static boost::uuids::name_generator_sha1 const gen(boost::uuids::ns::url());
    std::string s = boost::uuids::to_string(gen(text));
    std::erase(s, '-');
    return s;
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x)
{
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec)
    {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x)
            break;
    }
    return buf;
}

class CsvWriter
{
  public:
    CsvWriter(std::filesystem::path const& path, std::vector<std::string> const& header) : out_(path)
    {
        if (!out_)
            throw InvalidInput("cannot write " + path.string());
        write(header);
    }

    void row(std::vector<double> const& values)
    {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values)
            cells.push_back(format_double(v));
        write(cells);
    }

    void write(std::vector<std::string> const& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

/// Write through a temporary file so readers never see a partial file.
inline void write_text_atomic(std::filesystem::path const& path, std::string const& text)
{
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw InvalidInput("cannot write " + tmp.string());
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidInput("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// JSON documents stored as <dir>/<kind>-<hash>.json.
class Cache
{
  public:
    explicit Cache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::filesystem::path path(std::string const& kind, std::string const& key) const
    {
        return dir_ / (kind + "-" + key + ".json");
    }

    std::optional<Json> load(std::string const& kind, std::string const& key) const
    {
        auto const p = path(kind, key);
        if (!std::filesystem::exists(p))
            return std::nullopt;
        try
        {
            return Json::parse(read_text(p));
        }
        catch (Json::exception const&)
        {
            return std::nullopt;  // damaged entry; recompute and overwrite
        }
    }

    void store(std::string const& kind, std::string const& key, Json const& doc) const
    {
        write_text_atomic(path(kind, key), doc.dump());
    }

  private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Eigen results

inline Json to_json(EigenResult const& r)
{
    return Json{{"lambda", r.lambda},
                {"lower", r.grid.lower()},
                {"upper", r.grid.upper()},
                {"nodes", r.grid.nodes()},
                {"v_hat", r.v_hat},
                {"log_deriv", r.log_deriv},
                {"invariant_density", r.invariant_density},
                {"log_m_hat", r.log_m_hat},
                {"residual", r.residual},
                {"lambda_doubled", std::isnan(r.lambda_doubled) ? Json(nullptr) : Json(r.lambda_doubled)},
                {"window_shift", std::isnan(r.window_shift) ? Json(nullptr) : Json(r.window_shift)}};
}

inline EigenResult eigen_from_json(Json const& j)
{
    auto nan_or = [](Json const& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    EigenResult r{.lambda = j.at("lambda").get<double>(),
                  .grid = Grid1D(j.at("nodes").get<std::vector<double>>(), j.at("lower").get<double>(),
                                 j.at("upper").get<double>()),
                  .v_hat = j.at("v_hat").get<std::vector<double>>(),
                  .log_deriv = j.at("log_deriv").get<std::vector<double>>(),
                  .invariant_density = j.at("invariant_density").get<std::vector<double>>(),
                  .log_m_hat = j.at("log_m_hat").get<std::vector<double>>(),
                  .residual = j.at("residual").get<double>(),
                  .lambda_doubled = nan_or(j.at("lambda_doubled")),
                  .window_shift = nan_or(j.at("window_shift"))};
    std::size_t const n = r.grid.size();
    if (r.v_hat.size() != n || r.log_deriv.size() != n || r.invariant_density.size() != n ||
        r.log_m_hat.size() != n)
        throw InvalidInput("eigen cache entry has inconsistent lengths");
    return r;
}

}  // namespace turnpike
