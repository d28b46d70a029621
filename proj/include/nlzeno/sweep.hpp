#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nlzeno/fock.hpp"
#include "nlzeno/params.hpp"
#include "nlzeno/zeno.hpp"

namespace nlzeno {

class ConfigParse : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnknownPreset : public ValidationError {
public:
    explicit UnknownPreset(const std::string& id) : ValidationError("unknown figure preset '" + id + "'") {}
};

/// Reading or writing a file failed.
class OutputIO : public Error {
public:
    using Error::Error;
};

/// Quantities an axis may sweep. Coupling phases are config-only.
inline const std::vector<std::string>& sweepable_keys()
{
    static const std::vector<std::string> keys = {
        "kz",        "dk_a",        "dk_b",     "gamma_a",    "gamma_b",   "k",           "alpha_mag",
        "alpha_phase", "beta_mag",  "beta_phase", "gamma_mag", "gamma_phase", "delta_mag", "delta_phase",
    };
    return keys;
}

inline const std::vector<std::string>& scalar_keys()
{
    static const std::vector<std::string> keys = [] {
        auto k = sweepable_keys();
        for (const char* extra : {"k_phase", "gamma_a_phase", "gamma_b_phase"})
            k.emplace_back(extra);
        return k;
    }();
    return keys;
}

inline bool is_sweepable(const std::string& name)
{
    const auto& k = sweepable_keys();
    return std::find(k.begin(), k.end(), name) != k.end();
}

inline bool is_scalar_key(const std::string& name)
{
    const auto& k = scalar_keys();
    return std::find(k.begin(), k.end(), name) != k.end();
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double x)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::string format12(double x)
{
    if (std::isnan(x))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline double parse_number(const std::string& s, const std::string& what)
{
    const char* b = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(b, &end);
    if (end == b || *end != '\0')
        throw ConfigParse("bad number '" + s + "' for " + what);
    return v;
}

enum class SweepVariant { Linear, Nonlinear, Spontaneous, Oracle, Both };

inline const char* to_string(SweepVariant v)
{
    switch (v) {
    case SweepVariant::Linear: return "linear";
    case SweepVariant::Nonlinear: return "nonlinear";
    case SweepVariant::Spontaneous: return "spontaneous";
    case SweepVariant::Oracle: return "oracle";
    case SweepVariant::Both: return "both";
    }
    return "nonlinear";
}

inline SweepVariant parse_variant(const std::string& s)
{
    for (auto v : {SweepVariant::Linear, SweepVariant::Nonlinear, SweepVariant::Spontaneous, SweepVariant::Oracle,
                   SweepVariant::Both})
        if (s == to_string(v))
            return v;
    throw ConfigParse("unknown variant '" + s + "'");
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;)
        out.push_back(t);
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// mag * exp(i pi phase), exact on the axes.
inline cplx polar_pi(double mag, double phase)
{
    const double r = std::fmod(phase, 2.0);
    const double q = (r < 0 ? r + 2.0 : r) * 2.0;
    if (q == std::floor(q)) {
        switch (static_cast<int>(q)) {
        case 0: return {mag, 0.0};
        case 1: return {0.0, mag};
        case 2: return {-mag, 0.0};
        case 3: return {0.0, -mag};
        default: break;
        }
    }
    return std::polar(mag, std::numbers::pi * phase);
}

} // namespace detail

struct Axis {
    enum class Scale { Linear, Log };
    std::string name;
    double min = 0.0;
    double max = 1.0;
    int steps = 2;
    Scale scale = Scale::Linear;

    std::vector<double> values() const
    {
        std::vector<double> v(static_cast<std::size_t>(steps));
        for (int i = 0; i < steps; ++i) {
            const double t = static_cast<double>(i) / (steps - 1);
            v[i] = scale == Scale::Linear ? min + (max - min) * t
                                          : std::exp(std::log(min) + (std::log(max) - std::log(min)) * t);
        }
        v.front() = min;
        v.back() = max;
        return v;
    }

    /// `name min max steps [linear|log]`
    static Axis parse(const std::string& text)
    {
        const auto t = detail::split_ws(text);
        if (t.size() != 4 && t.size() != 5)
            throw ConfigParse("axis needs 'name min max steps [linear|log]', got '" + text + "'");
        Axis a;
        a.name = t[0];
        a.min = parse_number(t[1], "axis min");
        a.max = parse_number(t[2], "axis max");
        const double steps = parse_number(t[3], "axis steps");
        if (steps != std::floor(steps) || steps > 1e7)
            throw ConfigParse("axis steps must be an integer");
        a.steps = static_cast<int>(steps);
        if (t.size() == 5) {
            if (t[4] == "linear")
                a.scale = Scale::Linear;
            else if (t[4] == "log")
                a.scale = Scale::Log;
            else
                throw ConfigParse("axis scale must be linear or log");
        }
        a.check();
        return a;
    }

    void check() const
    {
        if (!is_sweepable(name))
            throw ConfigParse("'" + name + "' is not a sweepable quantity");
        if (steps < 2)
            throw ConfigParse("axis " + name + " needs at least 2 steps");
        if (!std::isfinite(min) || !std::isfinite(max))
            throw ConfigParse("axis " + name + " bounds must be finite");
        if (scale == Scale::Log && !(min > 0.0 && max > 0.0))
            throw ConfigParse("log axis " + name + " needs positive bounds");
    }

    std::string to_string() const
    {
        return name + " " + format_exact(min) + " " + format_exact(max) + " " + std::to_string(steps) + " "
               + (scale == Scale::Linear ? "linear" : "log");
    }
};

/// One curve of a multi-curve sweep: a label plus scalar overrides.
struct Series {
    std::string label;
    std::vector<std::pair<std::string, double>> set;

    /// `label key=value ...`
    static Series parse(const std::string& text)
    {
        const auto t = detail::split_ws(text);
        if (t.empty())
            throw ConfigParse("series needs a label");
        Series s;
        s.label = t[0];
        if (s.label.find_first_of(",\"") != std::string::npos)
            throw ConfigParse("series label may not contain commas or quotes");
        for (std::size_t i = 1; i < t.size(); ++i) {
            const auto eq = t[i].find('=');
            if (eq == std::string::npos)
                throw ConfigParse("series override must be key=value, got '" + t[i] + "'");
            const std::string key = t[i].substr(0, eq);
            if (!is_scalar_key(key))
                throw ConfigParse("unknown key '" + key + "' in series " + s.label);
            s.set.emplace_back(key, parse_number(t[i].substr(eq + 1), key));
        }
        return s;
    }

    std::string to_string() const
    {
        std::string out = label;
        for (const auto& [k, v] : set)
            out += " " + k + "=" + format_exact(v);
        return out;
    }
};

/// target = factor * source, applied after axes and series.
struct Tie {
    std::string target;
    double factor = 1.0;
    std::string source;

    /// `target factor source`
    static Tie parse(const std::string& text)
    {
        const auto t = detail::split_ws(text);
        if (t.size() != 3)
            throw ConfigParse("tie needs 'target factor source', got '" + text + "'");
        Tie tie{t[0], parse_number(t[1], "tie factor"), t[2]};
        if (!is_scalar_key(tie.target) || !is_scalar_key(tie.source))
            throw ConfigParse("tie refers to an unknown key");
        return tie;
    }

    std::string to_string() const { return target + " " + format_exact(factor) + " " + source; }
};

struct SweepConfig {
    std::map<std::string, double> values = {
        {"kz", 1.0},          {"k", 1.0},           {"k_phase", 0.0},     {"gamma_a", 0.0},
        {"gamma_a_phase", 0.0}, {"gamma_b", 1e-2},  {"gamma_b_phase", 0.0}, {"dk_a", 1.1e-3},
        {"dk_b", 1e-3},       {"alpha_mag", 0.0},   {"alpha_phase", 0.0}, {"beta_mag", 0.0},
        {"beta_phase", 0.0},  {"gamma_mag", 0.0},   {"gamma_phase", 0.0}, {"delta_mag", 0.0},
        {"delta_phase", 0.0},
    };
    SweepVariant variant = SweepVariant::Nonlinear;
    std::vector<Axis> axes;
    std::vector<Series> series;
    std::vector<Tie> ties;
    std::vector<std::string> notes;
    std::string output; // empty or "-" means stdout
    std::string format = "csv";
    OracleSettings oracle;
    ValidationOptions validation;
    double neutral_scale = 1e-15;

    /// Every key `set` accepts.
    static const std::vector<std::string>& keys()
    {
        static const std::vector<std::string> k = [] {
            std::vector<std::string> out = scalar_keys();
            for (const char* x : {"variant", "axis", "series", "tie", "note", "output", "format", "oracle_truncation",
                                  "oracle_cutoff", "oracle_abs_tol", "oracle_rel_tol", "oracle_stepper", "tol_sing",
                                  "perturbative_ceiling", "perturbative_warning", "neutral_tol"})
                out.emplace_back(x);
            return out;
        }();
        return k;
    }

    static bool is_list_key(const std::string& key)
    {
        return key == "axis" || key == "series" || key == "tie" || key == "note";
    }

    /// Applies one key=value; list keys append.
    void set(const std::string& key, const std::string& raw)
    {
        const std::string value = detail::trim(raw);
        if (is_scalar_key(key))
            values[key] = parse_number(value, key);
        else if (key == "variant")
            variant = parse_variant(value);
        else if (key == "axis")
            axes.push_back(Axis::parse(value));
        else if (key == "series")
            series.push_back(Series::parse(value));
        else if (key == "tie")
            ties.push_back(Tie::parse(value));
        else if (key == "note")
            notes.push_back(value);
        else if (key == "output")
            output = value;
        else if (key == "format") {
            if (value != "csv" && value != "json")
                throw ConfigParse("format must be csv or json");
            format = value;
        } else if (key == "oracle_truncation") {
            if (value == "weighted")
                oracle.truncation.scheme = TruncationSpec::Scheme::WeightedTotal;
            else if (value == "per_mode")
                oracle.truncation.scheme = TruncationSpec::Scheme::PerMode;
            else
                throw ConfigParse("oracle_truncation must be weighted or per_mode");
        } else if (key == "oracle_cutoff") {
            const double c = parse_number(value, key);
            if (c < 0 || c != std::floor(c) || c > 1000)
                throw ConfigParse("oracle_cutoff must be a small non-negative integer");
            oracle.truncation.cutoff = static_cast<int>(c);
        } else if (key == "oracle_abs_tol")
            oracle.step.abs_tol = parse_number(value, key);
        else if (key == "oracle_rel_tol")
            oracle.step.rel_tol = parse_number(value, key);
        else if (key == "oracle_stepper") {
            if (value == "dopri5")
                oracle.step.stepper = Stepper::Dopri5;
            else if (value == "rkf78")
                oracle.step.stepper = Stepper::Fehlberg78;
            else
                throw ConfigParse("oracle_stepper must be dopri5 or rkf78");
        } else if (key == "tol_sing")
            validation.tol_sing = parse_number(value, key);
        else if (key == "perturbative_ceiling")
            validation.perturbative_ceiling = parse_number(value, key);
        else if (key == "perturbative_warning")
            validation.perturbative_warning = parse_number(value, key);
        else if (key == "neutral_tol")
            neutral_scale = parse_number(value, key);
        else
            throw ConfigParse("unknown config key '" + key + "'");
    }

    void clear(const std::string& list_key)
    {
        if (list_key == "axis")
            axes.clear();
        else if (list_key == "series")
            series.clear();
        else if (list_key == "tie")
            ties.clear();
        else if (list_key == "note")
            notes.clear();
    }

    void check() const
    {
        if (axes.empty() || axes.size() > 2)
            throw ConfigParse("a sweep needs one or two axes");
        for (const auto& a : axes)
            a.check();
        if (axes.size() == 2 && axes[0].name == axes[1].name)
            throw ConfigParse("the two axes must sweep different quantities");
    }

    /// Canonical key=value listing; parse_config of it reproduces this config.
    std::vector<std::pair<std::string, std::string>> to_pairs() const
    {
        std::vector<std::pair<std::string, std::string>> out;
        out.emplace_back("variant", to_string(variant));
        for (const auto& key : scalar_keys())
            out.emplace_back(key, format_exact(values.at(key)));
        for (const auto& a : axes)
            out.emplace_back("axis", a.to_string());
        for (const auto& s : series)
            out.emplace_back("series", s.to_string());
        for (const auto& t : ties)
            out.emplace_back("tie", t.to_string());
        for (const auto& n : notes)
            out.emplace_back("note", n);
        if (!output.empty())
            out.emplace_back("output", output);
        out.emplace_back("format", format);
        out.emplace_back("oracle_truncation",
                         oracle.truncation.scheme == TruncationSpec::Scheme::WeightedTotal ? "weighted" : "per_mode");
        out.emplace_back("oracle_cutoff", std::to_string(oracle.truncation.cutoff));
        out.emplace_back("oracle_abs_tol", format_exact(oracle.step.abs_tol));
        out.emplace_back("oracle_rel_tol", format_exact(oracle.step.rel_tol));
        out.emplace_back("oracle_stepper", oracle.step.stepper == Stepper::Dopri5 ? "dopri5" : "rkf78");
        out.emplace_back("tol_sing", format_exact(validation.tol_sing));
        out.emplace_back("perturbative_ceiling", format_exact(validation.perturbative_ceiling));
        out.emplace_back("perturbative_warning", format_exact(validation.perturbative_warning));
        out.emplace_back("neutral_tol", format_exact(neutral_scale));
        return out;
    }

    std::string to_text() const
    {
        std::string out;
        for (const auto& [k, v] : to_pairs())
            out += k + " = " + v + "\n";
        return out;
    }
};

/// Flat `key = value` lines; `#` starts a comment.
inline SweepConfig parse_config(std::istream& in, SweepConfig cfg = {})
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigParse("line " + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigParse& e) {
            throw ConfigParse("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

inline SweepConfig parse_config_file(const std::string& path, SweepConfig cfg = {})
{
    std::ifstream in(path);
    if (!in)
        throw OutputIO("cannot read config file " + path);
    return parse_config(in, std::move(cfg));
}

/// Concrete inputs of one grid point, before validation.
struct PointInputs {
    CouplerParams raw;
    CoherentAmplitudes amps;
    double kz = 0.0;
};

inline PointInputs resolve_point(const std::map<std::string, double>& v)
{
    auto at = [&v](const char* key) { return v.at(key); };
    PointInputs p;
    p.raw.k = detail::polar_pi(at("k"), at("k_phase"));
    p.raw.gamma_a = detail::polar_pi(at("gamma_a"), at("gamma_a_phase"));
    p.raw.gamma_b = detail::polar_pi(at("gamma_b"), at("gamma_b_phase"));
    p.raw.dk_a = at("dk_a");
    p.raw.dk_b = at("dk_b");
    p.amps.alpha = detail::polar_pi(at("alpha_mag"), at("alpha_phase"));
    p.amps.beta = detail::polar_pi(at("beta_mag"), at("beta_phase"));
    p.amps.gamma = detail::polar_pi(at("gamma_mag"), at("gamma_phase"));
    p.amps.delta = detail::polar_pi(at("delta_mag"), at("delta_phase"));
    p.kz = at("kz");
    return p;
}

struct SweepRow {
    std::string series;
    std::vector<double> coords;
    double delta_n = std::numeric_limits<double>::quiet_NaN();
    Regime regime = Regime::Undefined;
    double residual = std::numeric_limits<double>::quiet_NaN();
    Flags flags;
    double oracle_delta_n = std::numeric_limits<double>::quiet_NaN();
    double oracle_diff = std::numeric_limits<double>::quiet_NaN();
    std::string error; // reason for an invalid row; not emitted
};

struct SweepTable {
    bool has_series = false;
    bool has_oracle = false; // analytic and oracle side by side
    std::vector<std::string> axis_names;
    std::vector<SweepRow> rows;

    std::vector<std::string> columns() const
    {
        std::vector<std::string> c;
        if (has_series)
            c.emplace_back("series");
        c.insert(c.end(), axis_names.begin(), axis_names.end());
        for (const char* f : {"delta_n", "regime", "residual", "flags"})
            c.emplace_back(f);
        if (has_oracle) {
            c.emplace_back("oracle_delta_n");
            c.emplace_back("oracle_diff");
        }
        return c;
    }
};

namespace detail {

// Runs job(i) for i in [0, n) on `threads` workers. Each job writes only its own slot.
template <class Job>
void parallel_for(std::size_t n, unsigned threads, Job job)
{
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;)
            job(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
}

struct GridPoint {
    std::size_t series = 0;
    std::vector<std::size_t> index; // per axis
};

inline std::map<std::string, double> point_values(const SweepConfig& cfg, const GridPoint& g,
                                                  const std::vector<std::vector<double>>& axis_values)
{
    auto v = cfg.values;
    if (!cfg.series.empty())
        for (const auto& [k, x] : cfg.series[g.series].set)
            v[k] = x;
    for (std::size_t a = 0; a < cfg.axes.size(); ++a)
        v[cfg.axes[a].name] = axis_values[a][g.index[a]];
    for (const auto& t : cfg.ties)
        v[t.target] = t.factor * v[t.source];
    return v;
}

// |k| scaled to 1 without the singular-manifold checks; the oracle has no denominators.
inline CouplerParams normalize_only(const CouplerParams& raw)
{
    if (!detail::finite(raw.k) || !detail::finite(raw.gamma_a) || !detail::finite(raw.gamma_b)
        || !std::isfinite(raw.dk_a) || !std::isfinite(raw.dk_b))
        throw ValidationError("coupler parameters must be finite");
    const double K = std::abs(raw.k);
    if (K == 0.0)
        throw ValidationError("linear coupling k must be nonzero");
    return {raw.k / K, raw.gamma_a / K, raw.gamma_b / K, raw.dk_a / K, raw.dk_b / K};
}

inline void mark_invalid(SweepRow& row, const std::string& why)
{
    row.delta_n = std::numeric_limits<double>::quiet_NaN();
    row.regime = Regime::Undefined;
    row.residual = std::numeric_limits<double>::quiet_NaN();
    row.flags |= Flag::invalid;
    row.error = why;
}

inline void evaluate_analytic(const SweepConfig& cfg, const PointInputs& in, SweepRow& row)
{
    try {
        CouplerParams raw = in.raw;
        const bool linear = cfg.variant == SweepVariant::Linear || cfg.variant == SweepVariant::Spontaneous;
        if (linear)
            raw.gamma_a = 0.0; // the probe nonlinearity plays no part; keep its manifolds out of validation
        validate_amplitudes(in.amps);
        const Validated v = validate_params(raw, cfg.validation);
        const EvalPoint at(in.kz);
        EngineOptions eo;
        eo.neutral_scale = cfg.neutral_scale;
        ZenoResult r;
        switch (cfg.variant) {
        case SweepVariant::Linear: r = zeno_linear(v.params, in.amps, at, eo); break;
        case SweepVariant::Spontaneous: r = zeno_spontaneous(v.params, in.amps, at, eo); break;
        default: r = zeno_nonlinear(v.params, in.amps, at, eo); break;
        }
        row.delta_n = r.value;
        row.regime = r.regime;
        row.residual = r.consistency_residual;
        row.flags |= v.flags | r.flags;
    } catch (const Error& e) {
        mark_invalid(row, e.what());
    }
}

} // namespace detail

/// Evaluates every grid point. Rows come out series-major, then axis 1, then
/// axis 2, independent of the thread count.
inline SweepTable run_sweep(const SweepConfig& cfg, unsigned threads = 0)
{
    cfg.check();
    std::vector<std::vector<double>> axis_values;
    for (const auto& a : cfg.axes)
        axis_values.push_back(a.values());

    SweepTable table;
    table.has_series = !cfg.series.empty();
    table.has_oracle = cfg.variant == SweepVariant::Both;
    for (const auto& a : cfg.axes)
        table.axis_names.push_back(a.name);

    std::vector<detail::GridPoint> grid;
    const std::size_t n_series = std::max<std::size_t>(1, cfg.series.size());
    for (std::size_t s = 0; s < n_series; ++s)
        for (std::size_t i = 0; i < axis_values[0].size(); ++i) {
            if (cfg.axes.size() == 1) {
                grid.push_back({s, {i}});
                continue;
            }
            for (std::size_t j = 0; j < axis_values[1].size(); ++j)
                grid.push_back({s, {i, j}});
        }

    table.rows.resize(grid.size());
    std::vector<PointInputs> inputs(grid.size());
    for (std::size_t r = 0; r < grid.size(); ++r) {
        auto& row = table.rows[r];
        if (table.has_series)
            row.series = cfg.series[grid[r].series].label;
        for (std::size_t a = 0; a < cfg.axes.size(); ++a)
            row.coords.push_back(axis_values[a][grid[r].index[a]]);
        inputs[r] = resolve_point(detail::point_values(cfg, grid[r], axis_values));
    }

    if (cfg.variant != SweepVariant::Oracle)
        detail::parallel_for(grid.size(), threads,
                             [&](std::size_t r) { detail::evaluate_analytic(cfg, inputs[r], table.rows[r]); });
    if (cfg.variant != SweepVariant::Oracle && cfg.variant != SweepVariant::Both)
        return table;

    // Oracle: rows that differ only in kz share one propagation.
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        std::vector<std::size_t> key{grid[r].series};
        for (std::size_t a = 0; a < cfg.axes.size(); ++a)
            key.push_back(cfg.axes[a].name == "kz" ? 0 : grid[r].index[a]);
        groups[key].push_back(r);
    }
    std::vector<std::vector<std::size_t>> jobs;
    for (auto& [key, rows] : groups)
        jobs.push_back(rows);

    const bool oracle_only = cfg.variant == SweepVariant::Oracle;
    detail::parallel_for(jobs.size(), threads, [&](std::size_t j) {
        const auto& rows = jobs[j];
        std::vector<double> kz;
        for (std::size_t r : rows)
            kz.push_back(inputs[r].kz);
        std::vector<double> sorted = kz;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        try {
            validate_amplitudes(inputs[rows.front()].amps);
            const CouplerParams p = detail::normalize_only(inputs[rows.front()].raw);
            const OracleZeno oz = oracle_zeno(p, inputs[rows.front()].amps, sorted, cfg.oracle);
            const double drift = std::max({oz.probe_on.max_norm_drift, oz.probe_off.max_norm_drift,
                                           oz.probe_on.max_weighted_drift, oz.probe_off.max_weighted_drift});
            for (std::size_t r : rows) {
                auto& row = table.rows[r];
                const auto it = std::lower_bound(sorted.begin(), sorted.end(), inputs[r].kz);
                const double dn = oz.delta_n[static_cast<std::size_t>(it - sorted.begin())];
                row.flags |= oz.flags;
                if (oracle_only) {
                    row.delta_n = dn;
                    row.residual = drift;
                    row.regime = classify(dn, cfg.neutral_scale
                                                  * std::max(1.0, oz.probe_on.mean_n[static_cast<std::size_t>(
                                                      it - sorted.begin())]));
                } else {
                    row.oracle_delta_n = dn;
                    row.oracle_diff = row.delta_n - dn;
                }
            }
        } catch (const Error& e) {
            for (std::size_t r : rows) {
                if (oracle_only)
                    detail::mark_invalid(table.rows[r], e.what());
                else
                    table.rows[r].flags |= Flag::invalid;
            }
        }
    });
    return table;
}

inline std::string to_csv(const SweepTable& t)
{
    std::string out;
    const auto cols = t.columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& r : t.rows) {
        std::string line;
        if (t.has_series)
            line += r.series + ",";
        for (double c : r.coords)
            line += format12(c) + ",";
        line += format12(r.delta_n) + "," + to_string(r.regime) + "," + format12(r.residual) + ","
                + r.flags.to_string();
        if (t.has_oracle)
            line += "," + format12(r.oracle_delta_n) + "," + format12(r.oracle_diff);
        out += line + '\n';
    }
    return out;
}

namespace detail {

// The value a reader of the CSV sees.
inline nlohmann::ordered_json json_number(double x)
{
    if (std::isnan(x))
        return nullptr;
    return std::strtod(format12(x).c_str(), nullptr);
}

} // namespace detail

inline std::string to_json(const SweepTable& t, const SweepConfig& cfg)
{
    using nlohmann::ordered_json;
    ordered_json meta;
    ordered_json config = ordered_json::object();
    for (const auto& [k, v] : cfg.to_pairs()) {
        if (SweepConfig::is_list_key(k)) {
            if (!config.contains(k))
                config[k] = ordered_json::array();
            config[k].push_back(v);
        } else {
            config[k] = v;
        }
    }
    meta["config"] = config;
    meta["columns"] = t.columns();

    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
        ordered_json row;
        if (t.has_series)
            row["series"] = r.series;
        for (std::size_t a = 0; a < t.axis_names.size(); ++a)
            row[t.axis_names[a]] = detail::json_number(r.coords[a]);
        row["delta_n"] = detail::json_number(r.delta_n);
        row["regime"] = to_string(r.regime);
        row["residual"] = detail::json_number(r.residual);
        row["flags"] = r.flags.to_string();
        if (t.has_oracle) {
            row["oracle_delta_n"] = detail::json_number(r.oracle_delta_n);
            row["oracle_diff"] = detail::json_number(r.oracle_diff);
        }
        rows.push_back(std::move(row));
    }
    ordered_json doc;
    doc["metadata"] = meta;
    doc["rows"] = rows;
    return doc.dump(2) + "\n";
}

/// Writes the table in cfg.format to cfg.output (stdout when empty or "-").
inline void emit(const SweepTable& t, const SweepConfig& cfg, std::ostream& stdout_stream = std::cout)
{
    const std::string text = cfg.format == "json" ? to_json(t, cfg) : to_csv(t);
    if (cfg.output.empty() || cfg.output == "-") {
        stdout_stream << text;
        if (!stdout_stream)
            throw OutputIO("failed writing to stdout");
        return;
    }
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out)
        throw OutputIO("cannot open " + cfg.output + " for writing");
    out << text;
    out.close();
    if (!out)
        throw OutputIO("failed writing " + cfg.output);
}

namespace detail {

inline Regime parse_regime(const std::string& s)
{
    for (auto r : {Regime::Zeno, Regime::AntiZeno, Regime::Neutral, Regime::Undefined})
        if (s == to_string(r))
            return r;
    throw ConfigParse("unknown regime label '" + s + "'");
}

inline Flags parse_flags(const std::string& s)
{
    Flags f;
    std::size_t b = 0;
    while (b < s.size()) {
        auto e = s.find('|', b);
        if (e == std::string::npos)
            e = s.size();
        const std::string name = s.substr(b, e - b);
        bool known = false;
        for (auto flag : {Flag::weak_perturbative, Flag::near_singular, Flag::truncation_tail, Flag::invalid})
            if (Flags(flag).to_string() == name) {
                f |= flag;
                known = true;
            }
        if (!known)
            throw ConfigParse("unknown flag '" + name + "'");
        b = e + 1;
    }
    return f;
}

inline double parse_cell(const std::string& s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    return parse_number(s, "CSV cell");
}

} // namespace detail

/// Reads back what to_csv writes.
inline SweepTable parse_csv(std::istream& in)
{
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::size_t b = 0;
        for (;;) {
            const auto e = line.find(',', b);
            out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
            if (e == std::string::npos)
                break;
            b = e + 1;
        }
        return out;
    };
    std::string line;
    if (!std::getline(in, line))
        throw ConfigParse("CSV has no header");
    const auto header = split(line);
    SweepTable t;
    std::size_t c = 0;
    if (!header.empty() && header[0] == "series") {
        t.has_series = true;
        c = 1;
    }
    while (c < header.size() && header[c] != "delta_n")
        t.axis_names.push_back(header[c++]);
    if (header.size() - c != 4 && header.size() - c != 6)
        throw ConfigParse("unexpected CSV columns");
    t.has_oracle = header.size() - c == 6;
    const auto expect = t.columns();
    if (header != expect)
        throw ConfigParse("unexpected CSV header");

    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != expect.size())
            throw ConfigParse("CSV row has " + std::to_string(cells.size()) + " cells");
        SweepRow r;
        std::size_t i = 0;
        if (t.has_series)
            r.series = cells[i++];
        for (std::size_t a = 0; a < t.axis_names.size(); ++a)
            r.coords.push_back(detail::parse_cell(cells[i++]));
        r.delta_n = detail::parse_cell(cells[i++]);
        r.regime = detail::parse_regime(cells[i++]);
        r.residual = detail::parse_cell(cells[i++]);
        r.flags = detail::parse_flags(cells[i++]);
        if (t.has_oracle) {
            r.oracle_delta_n = detail::parse_cell(cells[i++]);
            r.oracle_diff = detail::parse_cell(cells[i++]);
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

inline const std::vector<std::string>& preset_ids()
{
    static const std::vector<std::string> ids = {
        "fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig4c", "fig4d", "fig5a",
        "fig5b", "fig5c", "fig5d", "fig6a", "fig6b", "fig7a", "fig7b", "fig7c", "fig7d", "fig8a", "fig8b",
    };
    return ids;
}

/// Named parameter sets fig2a..fig8b. Single-axis presets sweep kz over
/// [0, 10] in 201 points; maps use 101 kz points.
inline SweepConfig figure_preset(const std::string& id)
{
    SweepConfig c;
    auto set = [&c](std::initializer_list<std::pair<const char*, double>> kv) {
        for (const auto& [k, v] : kv)
            c.values[k] = v;
    };
    auto series = [&c](const std::string& text) { c.series.push_back(Series::parse(text)); };
    const Axis kz_axis{"kz", 0.0, 10.0, 201, Axis::Scale::Linear};
    const Axis kz_map{"kz", 0.0, 10.0, 101, Axis::Scale::Linear};
    const std::string fig = id.substr(0, std::min<std::size_t>(id.size(), 4));

    c.notes.push_back("preset " + id + "; axis ranges are defaults, override with --axis");

    if (id == "fig2a") {
        c.variant = SweepVariant::Linear;
        set({{"gamma_b", 1e-2}, {"dk_b", 1e-3}, {"alpha_mag", 5}, {"beta_mag", 3}});
        series("delta=+1 delta_mag=1");
        series("delta=-1 delta_mag=1 delta_phase=1");
        series("delta=0 delta_mag=0");
        c.axes = {kz_axis};
    } else if (id == "fig2b") {
        c.variant = SweepVariant::Spontaneous;
        set({{"gamma_b", 1e-2}, {"dk_b", 1e-3}, {"alpha_mag", 10}});
        series("beta=3 beta_mag=3");
        series("beta=6 beta_mag=6");
        series("beta=7 beta_mag=7");
        c.axes = {kz_axis};
    } else if (id == "fig2c") {
        c.variant = SweepVariant::Linear;
        set({{"gamma_b", 1e-2}, {"dk_b", 1e-3}, {"alpha_mag", 10}, {"beta_mag", 8}});
        series("delta=-4 delta_mag=4 delta_phase=1");
        series("delta=0 delta_mag=0");
        series("delta=+4 delta_mag=4");
        c.axes = {kz_axis};
    } else if (fig == "fig3") {
        c.variant = SweepVariant::Nonlinear;
        set({{"gamma_a", 1e-2}, {"gamma_b", 1e-2}, {"dk_a", 1.1e-3}, {"dk_b", 1e-3}});
        c.notes.push_back("dk_b = 1e-3 rather than 1.1e-3: equal to dk_a it would make "
                          "dk_ab = 0 (singular); 1e-3 is the system mismatch used in figs 4-5");
        if (id == "fig3a") {
            set({{"alpha_mag", 5}, {"beta_mag", 3}});
            series("gamma=+2/delta=+1 gamma_mag=2 delta_mag=1");
            series("gamma=+2/delta=-1 gamma_mag=2 delta_mag=1 delta_phase=1");
            series("gamma=-2/delta=+1 gamma_mag=2 gamma_phase=1 delta_mag=1");
            series("gamma=-2/delta=-1 gamma_mag=2 gamma_phase=1 delta_mag=1 delta_phase=1");
        } else if (id == "fig3b") {
            set({{"alpha_mag", 10}, {"gamma_mag", 3}, {"delta_mag", 1}});
            series("beta=3 beta_mag=3");
            series("beta=6 beta_mag=6");
            series("beta=7 beta_mag=7");
        } else if (id == "fig3c") {
            set({{"alpha_mag", 6}, {"beta_mag", 6}, {"gamma_mag", 3}, {"delta_mag", 2}});
            series("reference");
            series("alpha_phase=pi alpha_phase=1");
            series("beta_phase=pi beta_phase=1");
        } else {
            throw UnknownPreset(id);
        }
        c.axes = {kz_axis};
    } else if (fig == "fig4") {
        c.variant = SweepVariant::Linear;
        set({{"gamma_b", 1e-2}, {"dk_b", 1e-3}, {"alpha_mag", 5}, {"beta_mag", 3}});
        if (id == "fig4a" || id == "fig4c")
            c.variant = SweepVariant::Spontaneous;
        else
            set({{"delta_mag", 1}});
        if (id == "fig4a" || id == "fig4b") {
            series("gamma_b=1e-2 gamma_b=1e-2");
            series("gamma_b=5e-2 gamma_b=5e-2");
        } else if (id == "fig4c" || id == "fig4d") {
            series("dk_b=1e-3 dk_b=1e-3");
            series("dk_b=1e-1 dk_b=1e-1");
        } else {
            throw UnknownPreset(id);
        }
        c.axes = {kz_axis};
    } else if (fig == "fig5") {
        c.variant = SweepVariant::Nonlinear;
        set({{"gamma_a", 1e-2}, {"gamma_b", 1e-2}, {"dk_a", 1.1e-3}, {"dk_b", 1e-3}, {"alpha_mag", 5},
             {"beta_mag", 3}, {"gamma_mag", 2}, {"delta_mag", 1}});
        if (id == "fig5a") {
            series("gamma_b=1e-2 gamma_b=1e-2");
            series("gamma_b=5e-2 gamma_b=5e-2");
        } else if (id == "fig5b") {
            series("gamma_a=1e-2 gamma_a=1e-2");
            series("gamma_a=5e-2 gamma_a=5e-2");
        } else if (id == "fig5c") {
            series("dk_a=1.1e-3 dk_a=1.1e-3");
            series("dk_a=1.1e-1 dk_a=1.1e-1");
        } else if (id == "fig5d") {
            series("dk_b=1e-3 dk_b=1e-3");
            series("dk_b=1e-1 dk_b=1e-1");
        } else {
            throw UnknownPreset(id);
        }
        c.axes = {kz_axis};
    } else if (id == "fig6a" || id == "fig6b") {
        c.variant = id == "fig6a" ? SweepVariant::Linear : SweepVariant::Nonlinear;
        set({{"gamma_a", 1e-2}, {"gamma_b", 1e-2}, {"dk_a", 1.1e-3}, {"dk_b", 1e-3}, {"alpha_mag", 6},
             {"beta_mag", 4}, {"gamma_mag", 2}, {"delta_mag", 1}});
        c.notes.push_back("k axis scales the linear coupling with couplings and mismatches fixed at their "
                          "k = 1 values; k >= 0.1 keeps |gamma|/|k| under the perturbative ceiling");
        c.axes = {{"k", 0.1, 2.0, 39, Axis::Scale::Linear}, kz_map};
    } else if (fig == "fig7") {
        set({{"gamma_b", 1e-2}, {"alpha_mag", 6}, {"beta_mag", 4}});
        const Axis mismatch{"dk_b", 1e-4, 1.0, 41, Axis::Scale::Log};
        if (id == "fig7a") {
            c.variant = SweepVariant::Linear;
            c.axes = {mismatch, kz_map};
        } else if (id == "fig7b") {
            c.variant = SweepVariant::Linear;
            set({{"delta_mag", 1}});
            c.axes = {mismatch, kz_map};
        } else if (id == "fig7c" || id == "fig7d") {
            c.variant = SweepVariant::Nonlinear;
            set({{"gamma_a", 1e-2}, {"dk_a", 1.1e-3}, {"dk_b", 1e-3}, {"gamma_mag", 2}, {"delta_mag", 1}});
            c.axes = {id == "fig7c" ? mismatch : Axis{"dk_a", 1e-4, 1.0, 41, Axis::Scale::Log}, kz_map};
            c.notes.push_back("the mismatch axis crosses dk_a = dk_b, where the closed form is singular; "
                              "such points are flagged rather than dropped");
        } else {
            throw UnknownPreset(id);
        }
        c.notes.push_back("regime column gives the Zeno / anti-Zeno partition of the contour map");
    } else if (id == "fig8a" || id == "fig8b") {
        c.variant = id == "fig8a" ? SweepVariant::Spontaneous : SweepVariant::Linear;
        set({{"gamma_b", 1e-2}, {"dk_b", 1e-3}, {"kz", 1}});
        c.ties.push_back({"gamma_mag", 0.5, "alpha_mag"});
        if (id == "fig8b")
            c.ties.push_back({"delta_mag", 1.0 / 3.0, "beta_mag"});
        c.axes = {{"alpha_mag", 0.0, 10.0, 51, Axis::Scale::Linear}, {"beta_mag", 0.0, 10.0, 51, Axis::Scale::Linear}};
    } else {
        throw UnknownPreset(id);
    }
    return c;
}

} // namespace nlzeno
