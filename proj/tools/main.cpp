#include "config.hpp"
#include "pipeline.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/metrics.hpp"
#include "ibrid/svgplot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace {

using namespace ibrid;
using namespace ibrid::cli;
namespace fs = std::filesystem;

// stable exit codes, one per failure class
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kConfigError = 2,
    kDataError = 3,
    kSearchExhaustion = 4,
    kValidationFailure = 5,
    kDivergence = 6,
};

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir;
    std::string mode = "gfm";
};

RunConfig make_config(const GlobalOptions& g) {
    RunConfig cfg = RunConfig::defaults_for_mode(g.mode);
    if (!g.config_path.empty()) {
        // the file may switch the mode; rebuild defaults when it does
        RunConfig probe = cfg;
        probe.apply_file(g.config_path);
        if (probe.mode != cfg.mode) cfg = RunConfig::defaults_for_mode(probe.mode);
        cfg.apply_file(g.config_path);
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.workers) cfg.workers = *g.workers;
    if (!g.out_dir.empty()) cfg.paths.out_dir = g.out_dir;
    cfg.paths.resolve();
    cfg.validate();
    return cfg;
}

void write_csv_atomic(const TimeSeries& series, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    write_csv(series, tmp);
    fs::rename(tmp, path);
}

int cmd_gen_data(const GlobalOptions& g) {
    const RunConfig cfg = make_config(g);
    fs::create_directories(cfg.paths.out_dir);
    const GeneratedData data = generate_datasets(cfg);
    write_csv_atomic(data.estimation, cfg.paths.estimation_csv);
    write_csv_atomic(data.validation, cfg.paths.validation_csv);
    std::printf("wrote %s (%zu samples) and %s (%zu samples)\n",
                cfg.paths.estimation_csv.c_str(), data.estimation.length(),
                cfg.paths.validation_csv.c_str(), data.validation.length());
    return kOk;
}

int cmd_identify(const GlobalOptions& g) {
    const RunConfig cfg = make_config(g);
    const TimeSeries est = read_csv(cfg.paths.estimation_csv);
    const TimeSeries val = read_csv(cfg.paths.validation_csv);
    const IdentifyResult result = identify(cfg, est, val);

    fs::create_directories(cfg.paths.out_dir);
    for (const auto& oi : result.outputs)
        save_leaderboard(oi.board,
                         cfg.paths.out_dir / ("leaderboard_" + oi.board.output_name + ".csv"));
    save_model(result.model, result.metadata_json, cfg.paths.model);
    {
        const fs::path summary = cfg.paths.out_dir / "summary.json";
        const fs::path tmp = summary.string() + ".tmp";
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << result.metadata_json << '\n';
        f.close();
        fs::rename(tmp, summary);
    }

    for (const auto& oi : result.outputs) {
        const Candidate& c = oi.cascade.winner;
        std::printf("%-4s est fit %7.3f %%  val fit %7.3f %%  FPE %.3e  (%s deg %d, n_b=%d n_f=%d "
                    "n_k=%d, %s)  >92%%: %zu of %zu\n",
                    oi.board.output_name.c_str(), c.est_fit,
                    oi.cascade.validation_report.fit_percent, c.est_fpe,
                    to_string(c.structure.family).c_str(), c.structure.nl_degree,
                    c.structure.numerator_order, c.structure.denominator_order, c.structure.delay,
                    to_string(c.method).c_str(), oi.board.above_threshold_count,
                    oi.board.candidates.size());
    }
    std::printf("model written to %s\n", cfg.paths.model.c_str());
    return kOk;
}

int cmd_validate(const GlobalOptions& g) {
    const RunConfig cfg = make_config(g);
    const LoadedModel loaded = load_model(cfg.paths.model);
    const TimeSeries est = read_csv(cfg.paths.estimation_csv);
    const TimeSeries val = read_csv(cfg.paths.validation_csv);

    const auto results = validate_model(cfg, loaded.model, est, val);
    bool all_pass = true;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::string failed;
        if (r.val_fit < cfg.cascade.fit_threshold) failed += " validation_fit";
        if (!r.residual.degenerate && !r.residual.autocorrelation_pass)
            failed += " residual_autocorrelation";
        for (const auto& cc : r.residual.cross_correlations)
            if (!r.residual.degenerate && !cc.pass) {
                failed += " residual_crosscorrelation";
                break;
            }
        std::printf("%-4s est fit %7.3f %%  val fit %7.3f %%  val FPE %.3e  residuals %s%s%s\n",
                    r.output_name.c_str(), r.est_fit, r.val_fit, r.val_fpe,
                    r.residual.degenerate ? "degenerate-pass" : (r.residual.pass() ? "pass" : "FAIL"),
                    r.pass ? "" : "  [FAILED:", r.pass ? "" : (failed + " ]").c_str());
    }

    // correlation sequences exported for plotting; emission failures must not
    // mask a passing validation
    try {
        fs::create_directories(cfg.paths.report_dir);
        for (const auto& r : results) {
            std::string out = "lag,autocorrelation";
            for (const auto& cc : r.residual.cross_correlations) out += ",xcorr_" + cc.input_name;
            out += ",bound\n";
            const int L = r.residual.max_lag;
            for (int tau = -L; tau <= L; ++tau) {
                const double ree = r.residual.autocorrelation.empty()
                                       ? 0.0
                                       : r.residual.autocorrelation[static_cast<std::size_t>(
                                             std::abs(tau))];
                out += std::to_string(tau) + "," + std::to_string(ree);
                for (const auto& cc : r.residual.cross_correlations)
                    out += "," + std::to_string(cc.values[static_cast<std::size_t>(tau + L)]);
                out += "," + std::to_string(r.residual.confidence_bound) + "\n";
            }
            const fs::path p = cfg.paths.report_dir / ("correlation_" + r.output_name + ".csv");
            const fs::path tmp = p.string() + ".tmp";
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            f << out;
            f.close();
            fs::rename(tmp, p);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "warning: correlation export failed: %s\n", e.what());
    }
    return all_pass ? kOk : kValidationFailure;
}

int cmd_simulate(const GlobalOptions& g) {
    const RunConfig cfg = make_config(g);
    const LoadedModel loaded = load_model(cfg.paths.model);
    const ComparisonResult cmp = closed_loop_comparison(cfg, loaded.model);

    fs::create_directories(cfg.paths.out_dir);
    write_csv_atomic(cmp.traces, cfg.paths.out_dir / "comparison.csv");
    for (const auto& d : cmp.deviations)
        std::printf("%-4s max |dev| %.5f  rms %.5f\n", d.name.c_str(), d.max_abs, d.rms);
    std::printf("stability: %s\n", cmp.stable ? "bounded" : "UNBOUNDED");
    return cmp.stable ? kOk : kDivergence;
}

int cmd_report(const GlobalOptions& g) {
    const RunConfig cfg = make_config(g);
    const LoadedModel loaded = load_model(cfg.paths.model);
    const TimeSeries val = read_csv(cfg.paths.validation_csv);
    fs::create_directories(cfg.paths.report_dir);

    const auto results = validate_model(cfg, loaded.model, val, val);
    for (const auto& block : loaded.model.blocks) {
        const std::vector<double> sim = simulate_miso(block, val);
        const std::vector<double>& meas = val.channel(block.output_name);
        std::vector<double> t(val.length());
        for (std::size_t k = 0; k < t.size(); ++k)
            t[k] = static_cast<double>(k) * val.sample_time();

        write_csv_atomic(TimeSeries(val.sample_time(),
                                    {{"measured", meas}, {"model", sim}}),
                         cfg.paths.report_dir / ("fit_" + block.output_name + ".csv"));

        SvgPlot plot("Measured vs model: " + block.output_name, "t [s]", block.output_name);
        plot.add_line("measured", t, meas, "#1f77b4");
        plot.add_line("model", t, sim, "#d62728");
        plot.write(cfg.paths.report_dir / ("fit_" + block.output_name + ".svg"));
    }
    for (const auto& r : results) {
        SvgPlot plot("Residual correlation: " + r.output_name, "lag", "normalized correlation");
        plot.add_hband(-r.residual.confidence_bound, r.residual.confidence_bound, "#9ecae1");
        const int L = r.residual.max_lag;
        std::vector<double> lags_pos, ree;
        for (int tau = 0; tau <= L; ++tau) {
            lags_pos.push_back(tau);
            ree.push_back(r.residual.autocorrelation[static_cast<std::size_t>(tau)]);
        }
        plot.add_stems("autocorrelation", lags_pos, ree, "#d62728");
        if (!r.residual.cross_correlations.empty()) {
            const auto& cc = r.residual.cross_correlations.front();
            std::vector<double> lags_all, rue;
            for (int tau = -L; tau <= L; ++tau) {
                lags_all.push_back(tau);
                rue.push_back(cc.values[static_cast<std::size_t>(tau + L)]);
            }
            plot.add_stems("xcorr " + cc.input_name, lags_all, rue, "#2ca02c");
        }
        plot.write(cfg.paths.report_dir / ("correlation_" + r.output_name + ".svg"));
    }
    std::printf("report written to %s\n", cfg.paths.report_dir.c_str());
    return kOk;
}

int dispatch(int (*fn)(const GlobalOptions&), const GlobalOptions& g) {
    try {
        return fn(g);
    } catch (const ExhaustionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSearchExhaustion;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDivergence;
    } catch (const PllLockError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDivergence;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDataError;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hammerstein-Wiener surrogate identification for grid-forming/"
                 "grid-following inverter black boxes"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "JSON config file")
        ->envname("IBRID_CONFIG");
    app.add_option("--seed", g.seed, "global seed (propagates to every stochastic component)")
        ->envname("IBRID_SEED");
    app.add_option("--workers", g.workers, "parallel candidate fits in the structure search")
        ->envname("IBRID_WORKERS");
    app.add_option("--out-dir", g.out_dir, "output directory")->envname("IBRID_OUT_DIR");
    app.add_option("--mode", g.mode, "plant mode: gfm | gfl")
        ->check(CLI::IsMember({"gfm", "gfl"}))
        ->envname("IBRID_MODE");

    auto* gen = app.add_subcommand("gen-data", "simulate the plant and write est.csv / val.csv");
    auto* ident = app.add_subcommand("identify", "structure search + validation cascade -> model artifact");
    auto* valcmd = app.add_subcommand("validate", "re-run metrics and residual tests on a model artifact");
    auto* sim = app.add_subcommand("simulate", "closed-loop microgrid comparison: black box vs surrogate");
    auto* rep = app.add_subcommand("report", "emit measured-vs-model overlays and correlation plots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    if (gen->parsed()) return dispatch(cmd_gen_data, g);
    if (ident->parsed()) return dispatch(cmd_identify, g);
    if (valcmd->parsed()) return dispatch(cmd_validate, g);
    if (sim->parsed()) return dispatch(cmd_simulate, g);
    if (rep->parsed()) return dispatch(cmd_report, g);
    return kConfigError;
}
