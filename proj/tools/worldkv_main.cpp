// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "worldkv/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"worldkv: tiered KV-cache memory manager for sliding-window world rollouts"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string mode_filter;
    std::int64_t seed_override = -1;

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        auto* opt = cmd->add_option("--config", config_path, "run configuration JSON");
        if (need_config) {
            opt->required();
        }
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--seed", seed_override, "scene seed override");
        cmd->add_option("--mode", mode_filter, "run only this mode from the config");
    };

    CLI::App* run = app.add_subcommand("run", "replay the configured trajectory across modes");
    add_common(run, true);

    std::string axis;
    CLI::App* ablate = app.add_subcommand("ablate", "sweep one ablation axis");
    add_common(ablate, true);
    ablate->add_option("--axis", axis, "sweep axis: intra, inter, k, strategy")->required();

    std::string report_dir;
    worldkv::cli::PlotOptions plot_opts;
    std::string plot_out;
    CLI::App* plot = app.add_subcommand("plot-data", "emit plot-ready CSV from a report");
    plot->add_option("--report", report_dir, "report directory from a run")->required();
    plot->add_option("--kind", plot_opts.kind, "memory_curve, fps_curve, attention_map, mask")
        ->required();
    plot->add_option("--config", config_path, "run configuration (mask kind)");
    plot->add_option("--step", plot_opts.step, "step filter / mask chunk step");
    plot->add_option("--layer", plot_opts.layer, "layer for mask scoring");
    plot->add_option("--grid-h", plot_opts.grid_h, "mask grid height");
    plot->add_option("--grid-w", plot_opts.grid_w, "mask grid width");
    plot->add_option("--fraction", plot_opts.fraction, "mask bottom fraction");
    plot->add_option("--out", plot_out, "write CSV here instead of stdout");

    CLI::App* validate = app.add_subcommand("validate-config", "parse and validate a config");
    validate->add_option("--config", config_path, "run configuration JSON")->required();

    CLI11_PARSE(app, argc, argv);

    worldkv::cli::RunOverrides overrides;
    if (!out_dir.empty()) {
        overrides.output_dir = out_dir;
    }
    if (seed_override >= 0) {
        overrides.seed = static_cast<std::uint64_t>(seed_override);
    }
    if (!mode_filter.empty()) {
        overrides.mode = mode_filter;
    }

    try {
        if (run->parsed()) {
            return worldkv::cli::cmd_run(config_path, overrides);
        }
        if (ablate->parsed()) {
            return worldkv::cli::cmd_ablate(config_path, axis, overrides);
        }
        if (plot->parsed()) {
            if (!config_path.empty()) {
                plot_opts.config_path = config_path;
            }
            if (!plot_out.empty()) {
                std::ofstream os(plot_out);
                if (!os) {
                    throw std::runtime_error("plot-data: cannot open " + plot_out);
                }
                return worldkv::cli::cmd_plot_data(report_dir, plot_opts, os);
            }
            return worldkv::cli::cmd_plot_data(report_dir, plot_opts, std::cout);
        }
        if (validate->parsed()) {
            return worldkv::cli::cmd_validate_config(config_path, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
