// nlzeno command-line front end.
//
//   nlzeno coeffs  [--config f] [--<key> v ...]        l1..l14 and p2, p5, p6 at one point
//   nlzeno zeno    [--config f] [--<key> v ...]        one Zeno parameter
//   nlzeno sweep   --config f [--<key> v ...]          grid sweep to CSV / JSON
//   nlzeno figure  <id> [--print-config] [...]         preset sweep
//   nlzeno oracle  [--config f] [--points n] [...]     closed form vs Fock-space propagation
//
// Exit status: 0 success, 1 invalid input, 2 I/O failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlzeno/nlzeno.hpp"

using namespace nlzeno;

namespace {

struct Overrides {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> scalars;
    std::map<std::string, std::vector<std::string>> lists;

    void add_to(CLI::App* app)
    {
        app->add_option("--config", config_file, "key = value config file");
        for (const auto& key : SweepConfig::keys()) {
            if (SweepConfig::is_list_key(key))
                app->add_option_function<std::vector<std::string>>(
                    "--" + key, [this, key](const std::vector<std::string>& v) { lists[key] = v; },
                    "replaces every '" + key + "' entry (repeatable)");
            else
                app->add_option_function<std::string>(
                    "--" + key, [this, key](const std::string& v) { scalars.emplace_back(key, v); });
        }
    }

    SweepConfig build(SweepConfig base = {}) const
    {
        if (!config_file.empty())
            base = parse_config_file(config_file, std::move(base));
        for (const auto& [k, v] : scalars)
            base.set(k, v);
        for (const auto& [k, vs] : lists) {
            base.clear(k);
            for (const auto& v : vs)
                base.set(k, v);
        }
        return base;
    }
};

void print_kv(const char* key, double v) { std::printf("%s = %.17g\n", key, v); }

Validated validated_point(const SweepConfig& cfg, PointInputs& in)
{
    in = resolve_point(cfg.values);
    validate_amplitudes(in.amps);
    if (cfg.variant == SweepVariant::Linear || cfg.variant == SweepVariant::Spontaneous)
        in.raw.gamma_a = 0.0;
    return validate_params(in.raw, cfg.validation);
}

int run_coeffs(const SweepConfig& cfg)
{
    PointInputs in;
    const Validated v = validated_point(cfg, in);
    const EvalPoint at(in.kz);
    const CoeffSet c = coeff_l(v.params, at);
    const ProbeOffCoeffs q = coeff_p(v.params, at);
    std::printf("%s", dump(c).c_str());
    std::printf("p2 = %.17g %.17g\np5 = %.17g %.17g\np6 = %.17g %.17g\n", q.p2.real(), q.p2.imag(), q.p5.real(),
                q.p5.imag(), q.p6.real(), q.p6.imag());
    const Flags f = v.flags | c.flags;
    if (!f.empty())
        std::printf("flags = %s\n", f.to_string().c_str());
    return 0;
}

int run_zeno(const SweepConfig& cfg)
{
    PointInputs in;
    const Validated v = validated_point(cfg, in);
    const EvalPoint at(in.kz);
    EngineOptions eo;
    eo.neutral_scale = cfg.neutral_scale;
    ZenoResult r;
    switch (cfg.variant) {
    case SweepVariant::Linear: r = zeno_linear(v.params, in.amps, at, eo); break;
    case SweepVariant::Spontaneous: r = zeno_spontaneous(v.params, in.amps, at, eo); break;
    default: r = zeno_nonlinear(v.params, in.amps, at, eo); break;
    }
    std::printf("variant = %s\n", to_string(r.variant));
    print_kv("delta_n", r.value);
    std::printf("regime = %s\n", to_string(r.regime));
    print_kv("mean_n_probe_on", r.mean_n_probe_on);
    print_kv("mean_n_probe_off", r.mean_n_probe_off);
    print_kv("imag_residual", r.imag_residual);
    print_kv("consistency_residual", r.consistency_residual);
    std::printf("flags = %s\n", (v.flags | r.flags).to_string().c_str());
    if (cfg.variant == SweepVariant::Oracle || cfg.variant == SweepVariant::Both) {
        const OracleZeno oz = oracle_zeno(v.params, in.amps, {in.kz}, cfg.oracle);
        print_kv("oracle_delta_n", oz.delta_n[0]);
        print_kv("oracle_diff", r.value - oz.delta_n[0]);
    }
    return 0;
}

int run_table(const SweepConfig& cfg, unsigned threads)
{
    const SweepTable t = run_sweep(cfg, threads);
    emit(t, cfg);
    std::size_t invalid = 0;
    for (const auto& r : t.rows)
        invalid += r.flags.has(Flag::invalid) ? 1 : 0;
    if (invalid)
        std::fprintf(stderr, "nlzeno: %zu of %zu grid points flagged invalid\n", invalid, t.rows.size());
    return 0;
}

// Analytic curve against the Fock-space propagation over kz in [0, kz].
int run_oracle(const SweepConfig& cfg, int points, bool convergence)
{
    PointInputs in;
    const Validated v = validated_point(cfg, in);
    if (points < 2)
        throw ValidationError("--points must be >= 2");
    std::vector<double> grid;
    for (int i = 0; i < points; ++i)
        grid.push_back(in.kz * i / (points - 1));

    auto analytic = [&](double kz) {
        switch (cfg.variant) {
        case SweepVariant::Linear: return zeno_linear(v.params, in.amps, EvalPoint(kz)).value;
        case SweepVariant::Spontaneous: return zeno_spontaneous(v.params, in.amps, EvalPoint(kz)).value;
        default: return zeno_nonlinear(v.params, in.amps, EvalPoint(kz)).value;
        }
    };
    const OracleZeno oz = oracle_zeno(v.params, in.amps, grid, cfg.oracle);

    std::printf("# kz analytic oracle diff\n");
    double max_diff = 0.0, max_oracle = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double a = analytic(grid[i]);
        const double d = a - oz.delta_n[i];
        max_diff = std::max(max_diff, std::abs(d));
        max_oracle = std::max(max_oracle, std::abs(oz.delta_n[i]));
        std::printf("%.6g %.12g %.12g %.3e\n", grid[i], a, oz.delta_n[i], d);
    }
    std::printf("dim = %zu\n", oz.probe_on.dim);
    print_kv("tail_mass", oz.probe_on.tail_mass);
    print_kv("max_norm_drift", std::max(oz.probe_on.max_norm_drift, oz.probe_off.max_norm_drift));
    print_kv("max_weighted_drift", std::max(oz.probe_on.max_weighted_drift, oz.probe_off.max_weighted_drift));
    print_kv("max_abs_diff", max_diff);
    print_kv("tolerance", std::max(1e-8, 0.05 * max_oracle));

    if (convergence) {
        auto max_change = [&](const OracleSettings& s) {
            const OracleZeno other = oracle_zeno(v.params, in.amps, grid, s);
            double m = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i)
                m = std::max(m, std::abs(other.delta_n[i] - oz.delta_n[i]));
            return m;
        };
        OracleSettings wider = cfg.oracle;
        wider.truncation.cutoff += 2;
        OracleSettings tighter = cfg.oracle;
        tighter.step.abs_tol *= 0.5;
        tighter.step.rel_tol *= 0.5;
        OracleSettings other_pair = cfg.oracle;
        other_pair.step.stepper = cfg.oracle.step.stepper == Stepper::Dopri5 ? Stepper::Fehlberg78 : Stepper::Dopri5;
        print_kv("change_cutoff_plus_2", max_change(wider));
        print_kv("change_half_tolerance", max_change(tighter));
        print_kv("change_other_stepper", max_change(other_pair));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Zeno parameters of a chi2-chi2 nonlinear coupler: closed form, Fock-space oracle, sweeps"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads for sweeps (0 = all cores)");

    auto* coeffs = app.add_subcommand("coeffs", "print l1..l14 and p2, p5, p6 at one point");
    Overrides coeffs_o;
    coeffs_o.add_to(coeffs);

    auto* zeno = app.add_subcommand("zeno", "evaluate one Zeno parameter");
    Overrides zeno_o;
    zeno_o.add_to(zeno);

    auto* sweep = app.add_subcommand("sweep", "config-driven grid sweep");
    Overrides sweep_o;
    sweep_o.add_to(sweep);

    auto* figure = app.add_subcommand("figure", "named preset sweep (fig2a ... fig8b)");
    Overrides figure_o;
    figure_o.add_to(figure);
    std::string figure_id;
    bool print_config = false;
    figure->add_option("id", figure_id, "preset id (fig2a ... fig8b)")->required();
    figure->add_flag("--print-config", print_config, "print the resolved config instead of running it");

    auto* oracle = app.add_subcommand("oracle", "closed form vs truncated Fock-space propagation over [0, kz]");
    Overrides oracle_o;
    oracle_o.add_to(oracle);
    int points = 21;
    bool convergence = false;
    oracle->add_option("--points", points, "grid points including kz = 0");
    oracle->add_flag("--convergence", convergence, "also report changes under cutoff + 2, half tolerance, other stepper");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*coeffs)
            return run_coeffs(coeffs_o.build());
        if (*zeno)
            return run_zeno(zeno_o.build());
        if (*sweep)
            return run_table(sweep_o.build(), threads);
        if (*figure) {
            const SweepConfig cfg = figure_o.build(figure_preset(figure_id));
            if (print_config) {
                std::cout << cfg.to_text();
                return 0;
            }
            return run_table(cfg, threads);
        }
        if (*oracle)
            return run_oracle(oracle_o.build(), points, convergence);
    } catch (const OutputIO& e) {
        std::fprintf(stderr, "nlzeno: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "nlzeno: %s\n", e.what());
        return 1;
    }
    return 1;
}
