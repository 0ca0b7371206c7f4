// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "worldkv/report_io.hpp"
#include "worldkv/store_io.hpp"

namespace worldkv::cli {

struct RunOverrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
};

struct EntryReports {
    std::string entry;  // zero-padded index + trajectory name
    std::vector<RolloutReport> reports;  // one per configured mode
};

namespace detail {

inline std::string entry_label(std::size_t index, const std::string& name) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", index);
    return std::string(buf) + "_" + (name.empty() ? "trajectory" : name);
}

}  // namespace detail

inline RunConfig apply_overrides(RunConfig cfg, const RunOverrides& overrides) {
    if (overrides.output_dir) {
        cfg.output_dir = *overrides.output_dir;
    }
    if (overrides.seed) {
        cfg.scene_seed = *overrides.seed;
    }
    if (overrides.mode) {
        const RolloutMode wanted = mode_from_name(*overrides.mode);
        if (std::find(cfg.modes.begin(), cfg.modes.end(), wanted) == cfg.modes.end()) {
            throw std::invalid_argument("--mode " + *overrides.mode +
                                        " is not listed in the config's modes");
        }
        cfg.modes = {wanted};
    }
    cfg.echo = normalized_config_json(cfg);
    return cfg;
}

/// Runs every configured mode over every suite entry (a bare trajectory is a
/// one-entry suite seeded from the scene seed).
inline std::vector<EntryReports> execute_run(const RunConfig& cfg) {
    const Suite suite = load_suite_or_trajectory(cfg.trajectory_path, cfg.scene_seed, cfg.params.steps);
    std::vector<EntryReports> out;
    for (std::size_t e = 0; e < suite.entries.size(); ++e) {
        const SuiteEntry& entry = suite.entries[e];
        EntryReports reports;
        reports.entry = detail::entry_label(e, entry.trajectory.name);
        const Scene scene = generate_scene(entry.scene_seed, cfg.grid_h, cfg.grid_w, cfg.dim);
        RolloutParams params = cfg.params;
        params.start_pose = entry.trajectory.start;
        for (RolloutMode mode : cfg.modes) {
            reports.reports.push_back(run_rollout(mode, entry.trajectory.actions, scene, params));
        }
        out.push_back(std::move(reports));
    }
    return out;
}

inline void write_run_outputs(const RunConfig& cfg, const std::vector<EntryReports>& entries) {
    std::filesystem::create_directories(cfg.output_dir);

    std::map<std::string, std::vector<RolloutReport>> by_entry;
    std::vector<RolloutReport> flat;
    bool any_attention = false;
    for (const EntryReports& e : entries) {
        by_entry[e.entry] = e.reports;
        for (const RolloutReport& r : e.reports) {
            flat.push_back(r);
            for (const StepStats& s : r.steps) {
                any_attention |= !s.attention.empty();
            }
        }
    }

    worldkv::detail::write_file_atomic(cfg.output_dir / "summary.json",
                                       summary_json(cfg, by_entry).dump(2) + "\n");
    worldkv::detail::write_file_atomic(cfg.output_dir / "steps.csv", steps_csv(flat));

    std::string retrieval_out;
    for (const EntryReports& e : entries) {
        for (const RolloutReport& r : e.reports) {
            if (r.mode == RolloutMode::WorldKV) {
                retrieval_out += retrieval_csv(r, cfg.strategy_name, cfg.params.effective_k());
            }
        }
    }
    if (!retrieval_out.empty()) {
        worldkv::detail::write_file_atomic(cfg.output_dir / "retrieval.csv", retrieval_out);
    }
    if (any_attention) {
        worldkv::detail::write_file_atomic(cfg.output_dir / "attention.csv", attention_csv(flat));
    }
}

inline int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides = {}) {
    const RunConfig cfg = apply_overrides(load_run_config(config_path), overrides);
    write_run_outputs(cfg, execute_run(cfg));
    return 0;
}

inline int cmd_validate_config(const std::filesystem::path& config_path, std::ostream& os) {
    load_run_config(config_path);
    os << "ok: " << config_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string point;
    double fidelity = 0.0;
    std::uint64_t context_tokens = 0;
    std::uint64_t store_bytes = 0;
    double fps = 0.0;
    std::string realized;
};

namespace detail {

struct SweepStats {
    double fidelity = 0.0;
    std::uint64_t context_tokens = 0;
    std::uint64_t store_bytes = 0;
    double fps = 0.0;
};

inline SweepStats run_sweep_point(const RunConfig& cfg, const RolloutParams& params) {
    const Suite suite = load_suite_or_trajectory(cfg.trajectory_path, cfg.scene_seed, cfg.params.steps);
    SweepStats stats;
    for (const SuiteEntry& entry : suite.entries) {
        const Scene scene = generate_scene(entry.scene_seed, cfg.grid_h, cfg.grid_w, cfg.dim);
        RolloutParams p = params;
        p.start_pose = entry.trajectory.start;
        const RolloutReport report =
            run_rollout(RolloutMode::WorldKV, entry.trajectory.actions, scene, p);
        stats.fidelity += report.mean_fidelity;
        stats.context_tokens = std::max(stats.context_tokens, report.final_context_tokens);
        stats.store_bytes += report.final_hot_bytes + report.final_cold_bytes;
        stats.fps += report.final_fps;
    }
    const double n = static_cast<double>(suite.entries.size());
    stats.fidelity /= n;
    stats.fps /= n;
    return stats;
}

inline std::string fmt_frame_equiv(double fe) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", fe);
    return buf;
}

}  // namespace detail

/// Retention fraction hitting a target frame-equivalent count per stored
/// chunk; the anchor-only point uses the minimum retention of one token.
inline double retention_for_frame_equiv(double frame_equiv, std::uint32_t frames,
                                        std::uint32_t tokens_per_frame) {
    const double r_target = (frame_equiv - 1.0) * tokens_per_frame;
    if (r_target < 1.0) {
        return 1.0 / (static_cast<double>(frames - 1) * tokens_per_frame);  // minimum: one token
    }
    return r_target / (static_cast<double>(frames - 1) * tokens_per_frame);
}

inline std::vector<AblationRow> ablate_axis(const RunConfig& cfg, const std::string& axis) {
    std::vector<AblationRow> rows;
    const std::uint32_t T = cfg.params.window.tokens_per_frame;
    const std::uint32_t F = cfg.params.window.chunk_frames;

    if (axis == "intra") {
        for (double fe : {1.0, 1.25, 1.5, 2.0, 2.5, 3.0}) {
            RolloutParams params = cfg.params;
            params.compression.enabled = true;
            params.compression.retention_fraction = retention_for_frame_equiv(fe, F, T);
            params.retrieval_k = 0;  // region capacity follows the chunk size
            const auto stats = detail::run_sweep_point(cfg, params);
            const std::uint64_t tokens = params.stored_chunk_tokens();
            rows.push_back({"3->" + detail::fmt_frame_equiv(fe), stats.fidelity, stats.context_tokens,
                            stats.store_bytes, stats.fps,
                            "P=" + worldkv::detail::fmt_double(params.compression.retention_fraction) +
                                ";chunk_tokens=" + std::to_string(tokens) +
                                ";k=" + std::to_string(params.effective_k())});
        }
    } else if (axis == "inter") {
        struct Point {
            const char* label;
            double fe;  // frame-equivalents per stored chunk: budget/chunks
            bool compress;
        };
        // n chunks squeezed into the 3-uncompressed-chunk retrieved budget.
        for (const Point& pt : {Point{"3->3", 3.0, false}, Point{"6->3", 1.5, true},
                                Point{"9->3", 1.0, true}}) {
            RolloutParams params = cfg.params;
            params.compression.enabled = pt.compress;
            if (pt.compress) {
                params.compression.retention_fraction = retention_for_frame_equiv(pt.fe, F, T);
            }
            params.retrieval_k = 0;
            const auto stats = detail::run_sweep_point(cfg, params);
            rows.push_back({pt.label, stats.fidelity, stats.context_tokens, stats.store_bytes,
                            stats.fps,
                            "chunk_tokens=" + std::to_string(params.stored_chunk_tokens()) +
                                ";k=" + std::to_string(params.effective_k())});
        }
    } else if (axis == "k") {
        for (std::uint32_t k = 1; k <= 6; ++k) {
            RolloutParams params = cfg.params;
            params.retrieval_k = k;
            const auto stats = detail::run_sweep_point(cfg, params);
            rows.push_back({"k=" + std::to_string(k), stats.fidelity, stats.context_tokens,
                            stats.store_bytes, stats.fps,
                            "k=" + std::to_string(params.effective_k())});
        }
    } else if (axis == "strategy") {
        for (const char* kind : {"pose", "query"}) {
            RolloutParams params = cfg.params;
            params.strategy = select_strategy(kind, params.strategy.query_layer,
                                              params.strategy.distance.yaw_only);
            const auto stats = detail::run_sweep_point(cfg, params);
            rows.push_back({kind, stats.fidelity, stats.context_tokens, stats.store_bytes, stats.fps,
                            "k=" + std::to_string(params.effective_k())});
        }
    } else {
        throw std::invalid_argument("ablate: unknown axis '" + axis +
                                    "' (valid axes: intra, inter, k, strategy)");
    }
    return rows;
}

inline int cmd_ablate(const std::filesystem::path& config_path, const std::string& axis,
                      const RunOverrides& overrides = {}) {
    const RunConfig cfg = apply_overrides(load_run_config(config_path), overrides);
    const std::vector<AblationRow> rows = ablate_axis(cfg, axis);

    std::string out = kAblationCsvHeader;
    for (const AblationRow& row : rows) {
        out += axis;
        out += ',';
        out += row.point;
        out += ',';
        out += worldkv::detail::fmt_double(row.fidelity);
        out += ',';
        out += std::to_string(row.context_tokens);
        out += ',';
        out += std::to_string(row.store_bytes);
        out += ',';
        out += worldkv::detail::fmt_double(row.fps);
        out += ',';
        out += row.realized;
        out += '\n';
    }
    std::filesystem::create_directories(cfg.output_dir);
    worldkv::detail::write_file_atomic(cfg.output_dir / ("ablation_" + axis + ".csv"), out);
    return 0;
}

// ---------------------------------------------------------------------------
// Plot data emission
// ---------------------------------------------------------------------------

struct PlotOptions {
    std::string kind;
    std::optional<std::filesystem::path> config_path;  // mask kind only
    std::int64_t step = -1;                            // attention/mask chunk step filter
    std::uint32_t layer = 0;
    std::uint32_t grid_h = 8;
    std::uint32_t grid_w = 8;
    double fraction = 0.125;
};

namespace detail {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("plot-data: cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (line.back() == ',') {
            fields.push_back("");
        }
        if (!have_header) {
            table.columns = std::move(fields);
            have_header = true;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

inline std::size_t column_index(const CsvTable& table, const std::string& name) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (table.columns[i] == name) {
            return i;
        }
    }
    throw std::runtime_error("plot-data: column '" + name + "' missing");
}

}  // namespace detail

inline std::string plot_data(const std::filesystem::path& report_dir, const PlotOptions& opts) {
    if (opts.kind == "memory_curve" || opts.kind == "fps_curve") {
        std::ifstream is(report_dir / "summary.json");
        if (!is) {
            throw std::runtime_error("plot-data: missing summary.json in " + report_dir.string());
        }
        const nlohmann::json summary = nlohmann::json::parse(is);
        const nlohmann::json& scene = summary.at("config").at("scene");
        const std::uint64_t layers = scene.at("layers").get<std::uint64_t>();
        const std::uint64_t dim = scene.at("dim").get<std::uint64_t>();
        const std::uint64_t dtype =
            summary.at("config").at("store").at("dtype_bytes").get<std::uint64_t>();

        const auto table = detail::read_csv(report_dir / "steps.csv");
        const std::size_t c_step = detail::column_index(table, "step");
        const std::size_t c_mode = detail::column_index(table, "mode");
        std::string out;
        if (opts.kind == "memory_curve") {
            const std::size_t c_ctx = detail::column_index(table, "context_tokens");
            const std::size_t c_hot = detail::column_index(table, "hot_bytes");
            const std::size_t c_cold = detail::column_index(table, "cold_bytes");
            out = "# worldkv-csv v1 memory_curve\nstep,mode,context_kv_bytes,hot_bytes,cold_bytes,total_bytes\n";
            for (const auto& row : table.rows) {
                const std::uint64_t ctx = std::stoull(row[c_ctx]);
                const std::uint64_t ctx_bytes = ctx * layers * 2 * dim * dtype;
                const std::uint64_t hot = std::stoull(row[c_hot]);
                const std::uint64_t cold = std::stoull(row[c_cold]);
                out += row[c_step] + "," + row[c_mode] + "," + std::to_string(ctx_bytes) + "," +
                       row[c_hot] + "," + row[c_cold] + "," +
                       std::to_string(ctx_bytes + hot + cold) + "\n";
            }
        } else {
            const std::size_t c_fps = detail::column_index(table, "modeled_fps");
            out = "# worldkv-csv v1 fps_curve\nstep,mode,modeled_fps\n";
            for (const auto& row : table.rows) {
                out += row[c_step] + "," + row[c_mode] + "," + row[c_fps] + "\n";
            }
        }
        return out;
    }

    if (opts.kind == "attention_map") {
        const auto table = detail::read_csv(report_dir / "attention.csv");
        const std::size_t c_step = detail::column_index(table, "step");
        const std::size_t c_chunk = detail::column_index(table, "chunk_id");
        const std::size_t c_mass = detail::column_index(table, "mass");
        std::map<std::uint64_t, std::map<std::uint64_t, double>> by_step;
        std::vector<std::uint64_t> chunk_ids;
        for (const auto& row : table.rows) {
            const std::uint64_t step = std::stoull(row[c_step]);
            if (opts.step >= 0 && step != static_cast<std::uint64_t>(opts.step)) {
                continue;
            }
            const std::uint64_t chunk = std::stoull(row[c_chunk]);
            by_step[step][chunk] = std::stod(row[c_mass]);
            if (std::find(chunk_ids.begin(), chunk_ids.end(), chunk) == chunk_ids.end()) {
                chunk_ids.push_back(chunk);
            }
        }
        std::sort(chunk_ids.begin(), chunk_ids.end());
        std::string out = "# worldkv-csv v1 attention_map\nstep";
        for (std::uint64_t id : chunk_ids) {
            out += ",chunk_" + std::to_string(id);
        }
        out += "\n";
        for (const auto& [step, masses] : by_step) {
            out += std::to_string(step);
            for (std::uint64_t id : chunk_ids) {
                const auto it = masses.find(id);
                out += "," + worldkv::detail::fmt_double(it == masses.end() ? 0.0 : it->second);
            }
            out += "\n";
        }
        return out;
    }

    if (opts.kind == "mask") {
        if (!opts.config_path) {
            throw std::invalid_argument("plot-data: kind 'mask' requires --config");
        }
        if (opts.step < 0) {
            throw std::invalid_argument("plot-data: kind 'mask' requires --step");
        }
        const RunConfig cfg = load_run_config(*opts.config_path);
        const Suite suite = load_suite_or_trajectory(cfg.trajectory_path, cfg.scene_seed, cfg.params.steps);
        const SuiteEntry& entry = suite.entries.front();
        if (static_cast<std::size_t>(opts.step) >= entry.trajectory.actions.size()) {
            throw std::invalid_argument("plot-data: step beyond trajectory length");
        }
        const Scene scene = generate_scene(entry.scene_seed, cfg.grid_h, cfg.grid_w, cfg.dim);
        PoseState pose = entry.trajectory.start;
        for (std::int64_t i = 1; i <= opts.step; ++i) {
            pose = accumulate_action(pose, entry.trajectory.actions[i - 1], cfg.params.steps);
        }
        const KVChunk chunk =
            observe(scene, pose, cfg.params.observe, static_cast<std::uint64_t>(opts.step));
        const auto masks = retained_mask(chunk, opts.layer, opts.fraction, opts.grid_h, opts.grid_w);
        std::string out = "# worldkv-csv v1 mask\nframe,row,col,marked\n";
        for (std::size_t f = 0; f < masks.size(); ++f) {
            for (std::uint32_t r = 0; r < opts.grid_h; ++r) {
                for (std::uint32_t c = 0; c < opts.grid_w; ++c) {
                    out += std::to_string(f + 1) + "," + std::to_string(r) + "," +
                           std::to_string(c) + "," +
                           std::to_string(static_cast<int>(masks[f][r * opts.grid_w + c])) + "\n";
                }
            }
        }
        return out;
    }

    throw std::invalid_argument("plot-data: unknown kind '" + opts.kind +
                                "' (valid: memory_curve, fps_curve, attention_map, mask)");
}

inline int cmd_plot_data(const std::filesystem::path& report_dir, const PlotOptions& opts,
                         std::ostream& os) {
    os << plot_data(report_dir, opts);
    return 0;
}

}  // namespace worldkv::cli
