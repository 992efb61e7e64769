#pragma once

// Command-line front end. Exit codes: 0 success, 1 configuration error,
// 2 data error, 3 internal error. BUSGHG_LOG sets log verbosity
// (trace, debug, info, warn, error, off; default warn).

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "busghg/config.hpp"
#include "busghg/error.hpp"
#include "busghg/io.hpp"
#include "busghg/pipeline.hpp"
#include "busghg/synthgen.hpp"

namespace busghg::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kInternalError = 3 };

inline void init_logging() {
    auto logger = spdlog::get("busghg");
    if (!logger) {
        logger = spdlog::stderr_color_mt("busghg");
        spdlog::set_default_logger(logger);
    }
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("BUSGHG_LOG"); env && *env) {
        level = spdlog::level::from_str(env);
    }
    spdlog::set_level(level);
}

/// Options shared by the pipeline subcommands.
struct CommonOptions {
    std::optional<std::string> config;
    std::vector<std::string> sets;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<double> mean_s;

    void attach(CLI::App& app) {
        app.add_option("-c,--config", config, "run configuration file (key = value)")->check(CLI::ExistingFile);
        app.add_option("--set", sets, "override a configuration key: --set key=value (repeatable)");
        app.add_option("-j,--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
        app.add_option("-o,--out", out, "output directory");
    }

    RunConfig load() const {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& s : sets) {
            overrides.push_back(split_setting(s, "--set"));
        }
        if (workers) {
            overrides.emplace_back("workers", std::to_string(*workers));
        }
        if (out) {
            overrides.emplace_back("output.dir", *out);
        }
        if (mean_s) {
            overrides.emplace_back("sinuosity.mean_override", csv::format_double(*mean_s));
        }
        auto cfg = load_config(config, overrides);
        validate_parameters(cfg);
        return cfg;
    }
};

inline fs::path input_or_default(const std::optional<std::string>& given, const RunConfig& cfg, const char* name) {
    return given ? fs::path(*given) : fs::path(cfg.output_dir) / name;
}

inline void require_input(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
        throw ConfigError(std::string(what) + ": file not found: " + p.string());
    }
}

inline void finish(Manifest& m, const RunConfig& cfg, const std::string& stage) {
    m.write(fs::path(cfg.output_dir) / ("manifest_" + stage + ".json"));
}

inline int run_cli(int argc, char** argv) {
    init_logging();
    CLI::App app{"busghg: bus fleet CO2e estimation from low-resolution GPS records"};
    app.set_version_flag("--version", std::string("busghg ") + kVersion);
    app.require_subcommand(1);

    CommonOptions run_opts, ingest_opts, sin_opts, em_opts, gap_opts, an_opts;
    std::optional<std::string> sin_segments, em_segments, em_report, gap_daily, an_emissions, an_daily, an_monthly;
    std::string scenario_path, synth_out;

    auto* run = app.add_subcommand("run", "full pipeline: ingest through analytics");
    run_opts.attach(*run);
    run->add_option("--mean-s", run_opts.mean_s, "skip sinuosity estimation and use this factor");

    auto* ingest = app.add_subcommand("ingest", "GPS file -> segments.csv");
    ingest_opts.attach(*ingest);

    auto* sinuosity = app.add_subcommand("sinuosity", "segments.csv -> sinuosity_report.csv");
    sin_opts.attach(*sinuosity);
    sinuosity->add_option("--segments", sin_segments, "segments file (default <out>/segments.csv)");

    auto* emissions = app.add_subcommand("emissions", "segments + sinuosity report -> emissions.csv, daily.csv");
    em_opts.attach(*emissions);
    emissions->add_option("--segments", em_segments, "segments file (default <out>/segments.csv)");
    emissions->add_option("--sinuosity", em_report, "sinuosity report (default <out>/sinuosity_report.csv)");
    emissions->add_option("--mean-s", em_opts.mean_s, "use this factor instead of the report's mean_s");

    auto* gapfill = app.add_subcommand("gapfill", "daily.csv -> expected ranges, filled days, monthly totals");
    gap_opts.attach(*gapfill);
    gapfill->add_option("--daily", gap_daily, "daily counts (default <out>/daily.csv)");

    auto* analyze = app.add_subcommand("analyze", "emissions + gap-fill outputs -> analytics products");
    an_opts.attach(*analyze);
    analyze->add_option("--emissions", an_emissions, "emissions file (default <out>/emissions.csv)");
    analyze->add_option("--daily", an_daily, "daily counts (default <out>/daily.csv)");
    analyze->add_option("--monthly", an_monthly, "monthly totals (default <out>/monthly_totals.csv)");
    analyze->add_option("--mean-s", an_opts.mean_s, "recompute emissions with this factor before analysis");

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus from a scenario file");
    synth->add_option("scenario", scenario_path, "scenario JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("-o,--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            const auto cfg = run_opts.load();
            const auto m = run_pipeline(cfg, "run");
            std::cout << "wrote " << m.json()["outputs"].size() << " files to " << cfg.output_dir << "\n";
        } else if (*ingest) {
            const auto cfg = ingest_opts.load();
            require_file("gps.path", cfg.gps_path);
            Manifest m(cfg, "ingest");
            stage_ingest(cfg, m);
            finish(m, cfg, "ingest");
        } else if (*sinuosity) {
            const auto cfg = sin_opts.load();
            const auto path = input_or_default(sin_segments, cfg, files::segments);
            require_input(path, "segments");
            Manifest m(cfg, "sinuosity");
            const auto segments = run_stage("sinuosity", [&] { return io::read_segments(path, cfg.utc_offset); });
            stage_sinuosity(cfg, segments, m);
            finish(m, cfg, "sinuosity");
        } else if (*emissions) {
            const auto cfg = em_opts.load();
            const auto seg_path = input_or_default(em_segments, cfg, files::segments);
            require_input(seg_path, "segments");
            Manifest m(cfg, "emissions");
            double mean_s = 0.0;
            if (cfg.mean_s_override) {
                mean_s = *cfg.mean_s_override;
                m["mean_s_source"] = "override";
            } else {
                const auto report = input_or_default(em_report, cfg, files::sinuosity);
                require_input(report, "sinuosity report");
                mean_s = run_stage("emissions", [&] { return io::read_mean_s(report.string()); });
                m["mean_s_source"] = report.string();
            }
            m["mean_s"] = mean_s;
            auto segments = run_stage("emissions", [&] { return io::read_segments(seg_path, cfg.utc_offset); });
            stage_emissions(cfg, std::move(segments), mean_s, m);
            finish(m, cfg, "emissions");
        } else if (*gapfill) {
            const auto cfg = gap_opts.load();
            const auto path = input_or_default(gap_daily, cfg, files::daily);
            require_input(path, "daily counts");
            Manifest m(cfg, "gapfill");
            const auto daily = run_stage("gapfill", [&] { return io::read_daily(path.string()); });
            stage_gapfill(cfg, daily, m);
            finish(m, cfg, "gapfill");
        } else if (*analyze) {
            const auto cfg = an_opts.load();
            const auto em_path = input_or_default(an_emissions, cfg, files::emissions);
            require_input(em_path, "emissions");
            Manifest m(cfg, "analyze");
            auto data = run_stage("analyze", [&] { return io::read_emissions(em_path.string(), cfg.utc_offset); });
            std::vector<DailyCount> daily;
            std::vector<MonthlyTotals> monthly;
            if (cfg.mean_s_override) {
                // Stale-factor rerun: recompute everything downstream of the factor.
                m["mean_s"] = *cfg.mean_s_override;
                m["mean_s_source"] = "override";
                m.warn("analyze: emissions recomputed with mean_s override " +
                       csv::format_double(*cfg.mean_s_override));
                auto recomputed = run_stage("analyze", [&] {
                    return compute_emission_products(cfg, std::move(data.segments), *cfg.mean_s_override);
                });
                data = std::move(recomputed.data);
                daily = std::move(recomputed.daily);
                monthly = run_stage("analyze", [&] { return compute_gapfill(cfg, daily).monthly; });
            } else {
                const auto daily_path = input_or_default(an_daily, cfg, files::daily);
                const auto monthly_path = input_or_default(an_monthly, cfg, files::monthly);
                require_input(daily_path, "daily counts");
                require_input(monthly_path, "monthly totals");
                daily = run_stage("analyze", [&] { return io::read_daily(daily_path.string()); });
                monthly = run_stage("analyze", [&] { return io::read_monthly_totals(monthly_path.string()); });
            }
            stage_analyze(cfg, data, daily, monthly, m);
            finish(m, cfg, "analyze");
        } else if (*synth) {
            const auto scenario = synth::load_scenario(scenario_path);
            const auto corpus = run_stage("synth", [&] { return synth::generate(scenario); });
            run_stage("synth", [&] {
                synth::write_corpus(corpus, scenario, synth_out);
                return 0;
            });
            std::cout << "wrote " << corpus.pings.size() << " GPS records (" << corpus.pings_generated
                      << " generated) to " << synth_out << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
    return kOk;
}

}  // namespace busghg::cli
