// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "worldkv/rollout.hpp"
#include "worldkv/trajectory.hpp"

namespace worldkv {

/// Fully validated run configuration. Unknown keys anywhere in the JSON are
/// rejected with the offending path named.
struct RunConfig {
    std::vector<RolloutMode> modes{RolloutMode::WorldKV};
    std::uint64_t scene_seed = 0;
    std::uint32_t grid_h = 24;
    std::uint32_t grid_w = 24;
    std::uint32_t dim = 64;
    RolloutParams params{};
    std::string strategy_name = "pose";
    std::filesystem::path trajectory_path;
    std::filesystem::path output_dir = "out";

    nlohmann::json echo;  // normalized config as loaded, for reproducibility
};

namespace cfgdetail {

using nlohmann::json;

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!obj.is_object()) {
        throw std::invalid_argument("config: '" + where + "' must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config: bad value for '" + where + "." + key + "'");
    }
}

}  // namespace cfgdetail

/// Rebuilds the configuration as JSON with every default materialized, so a
/// written summary fully pins the run.
inline nlohmann::json normalized_config_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["modes"] = nlohmann::json::array();
    for (RolloutMode mode : cfg.modes) {
        j["modes"].push_back(mode_name(mode));
    }
    j["scene"] = {{"seed", cfg.scene_seed},
                  {"grid", {cfg.grid_h, cfg.grid_w}},
                  {"dim", cfg.dim},
                  {"layers", cfg.params.observe.layers}};
    j["frustum"] = {{"half_angle_rad", cfg.params.observe.frustum.half_angle_rad},
                    {"range", cfg.params.observe.frustum.range}};
    const WindowConfig& w = cfg.params.window;
    j["window"] = {{"sink_frames", w.sink_frames},
                   {"retrieved_frames", w.retrieved_frames},
                   {"recent_frames", w.recent_frames},
                   {"denoising_frames", w.denoising_frames},
                   {"tokens_per_frame", w.tokens_per_frame},
                   {"chunk_frames", w.chunk_frames}};
    j["compression"] = {{"enabled", cfg.params.compression.enabled},
                        {"retention_fraction", cfg.params.compression.retention_fraction},
                        {"tie_break", "ascending_position"},
                        {"heads", cfg.params.compression.heads}};
    j["retrieval"] = {{"kind", cfg.strategy_name},
                      {"k", cfg.params.retrieval_k},
                      {"stride", cfg.params.retrieval_stride},
                      {"query_layer", cfg.params.strategy.query_layer},
                      {"yaw_only", cfg.params.strategy.distance.yaw_only}};
    j["store"] = {{"hot_budget_bytes",
                   cfg.params.hot_budget_bytes == kUnlimitedBytes
                       ? nlohmann::json(nullptr)
                       : nlohmann::json(cfg.params.hot_budget_bytes)},
                  {"fixed_latency_s", cfg.params.transfer.fixed_latency},
                  {"latency_per_byte_s", cfg.params.transfer.latency_per_byte},
                  {"dtype_bytes", cfg.params.observe.dtype_bytes}};
    j["cost"] = {{"fixed_step_s", cfg.params.cost.fixed_step_s},
                 {"per_token_attention_s", cfg.params.cost.per_token_attention_s},
                 {"frames_per_step", cfg.params.cost.frames_per_step}};
    j["observe"] = {{"noise", cfg.params.observe.noise},
                    {"drift_yaw_rad", cfg.params.observe.drift_yaw_rad},
                    {"drift_translation", cfg.params.observe.drift_translation},
                    {"layer_jitter", cfg.params.observe.layer_jitter}};
    j["steps"] = {{"translation_step", cfg.params.steps.translation_step},
                  {"yaw_step_rad", cfg.params.steps.yaw_step_rad},
                  {"pitch_step_rad", cfg.params.steps.pitch_step_rad},
                  {"pitch_clamp_rad", cfg.params.steps.pitch_clamp_rad},
                  {"max_step_magnitude", cfg.params.steps.max_step_magnitude}};
    j["fidelity"] = {{"threshold", cfg.params.fidelity_threshold},
                     {"layer", cfg.params.fidelity_layer}};
    j["attention"] = {{"record", cfg.params.record_attention},
                      {"temperature", cfg.params.attention_temperature},
                      {"layer", cfg.params.attention_layer}};
    j["trajectory"] = cfg.trajectory_path.string();
    j["output_dir"] = cfg.output_dir.string();
    return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using cfgdetail::check_keys;
    using cfgdetail::get_or;

    check_keys(j, {"modes", "scene", "frustum", "window", "compression", "retrieval", "store",
                   "cost", "observe", "steps", "fidelity", "attention", "trajectory", "output_dir"},
               "config");

    RunConfig cfg;

    if (j.contains("modes")) {
        if (!j.at("modes").is_array() || j.at("modes").empty()) {
            throw std::invalid_argument("config: 'modes' must be a non-empty array");
        }
        cfg.modes.clear();
        for (const auto& m : j.at("modes")) {
            cfg.modes.push_back(mode_from_name(m.get<std::string>()));
        }
    }

    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        check_keys(s, {"seed", "grid", "dim", "layers"}, "scene");
        cfg.scene_seed = get_or<std::uint64_t>(s, "seed", cfg.scene_seed, "scene");
        if (s.contains("grid")) {
            const auto& g = s.at("grid");
            if (!g.is_array() || g.size() != 2) {
                throw std::invalid_argument("config: 'scene.grid' must be [height, width]");
            }
            cfg.grid_h = g[0].get<std::uint32_t>();
            cfg.grid_w = g[1].get<std::uint32_t>();
        }
        cfg.dim = get_or<std::uint32_t>(s, "dim", cfg.dim, "scene");
        cfg.params.observe.layers = get_or<std::uint32_t>(s, "layers", cfg.params.observe.layers, "scene");
    }

    if (j.contains("frustum")) {
        const auto& f = j.at("frustum");
        check_keys(f, {"half_angle_rad", "range"}, "frustum");
        cfg.params.observe.frustum.half_angle_rad =
            get_or<double>(f, "half_angle_rad", cfg.params.observe.frustum.half_angle_rad, "frustum");
        cfg.params.observe.frustum.range =
            get_or<double>(f, "range", cfg.params.observe.frustum.range, "frustum");
    }

    if (j.contains("window")) {
        const auto& w = j.at("window");
        check_keys(w, {"sink_frames", "retrieved_frames", "recent_frames", "denoising_frames",
                       "tokens_per_frame", "chunk_frames"},
                   "window");
        WindowConfig& wc = cfg.params.window;
        wc.sink_frames = get_or<std::uint32_t>(w, "sink_frames", wc.sink_frames, "window");
        wc.retrieved_frames = get_or<std::uint32_t>(w, "retrieved_frames", wc.retrieved_frames, "window");
        wc.recent_frames = get_or<std::uint32_t>(w, "recent_frames", wc.recent_frames, "window");
        wc.denoising_frames = get_or<std::uint32_t>(w, "denoising_frames", wc.denoising_frames, "window");
        wc.tokens_per_frame = get_or<std::uint32_t>(w, "tokens_per_frame", wc.tokens_per_frame, "window");
        wc.chunk_frames = get_or<std::uint32_t>(w, "chunk_frames", wc.chunk_frames, "window");
    }
    cfg.params.observe.frames = cfg.params.window.chunk_frames;
    cfg.params.observe.tokens_per_frame = cfg.params.window.tokens_per_frame;

    if (j.contains("compression")) {
        const auto& c = j.at("compression");
        check_keys(c, {"enabled", "retention_fraction", "tie_break", "heads"}, "compression");
        CompressionConfig& cc = cfg.params.compression;
        cc.enabled = get_or<bool>(c, "enabled", cc.enabled, "compression");
        cc.retention_fraction =
            get_or<double>(c, "retention_fraction", cc.retention_fraction, "compression");
        cc.heads = get_or<std::uint32_t>(c, "heads", cc.heads, "compression");
        const std::string tie = get_or<std::string>(c, "tie_break", "ascending_position", "compression");
        if (tie != "ascending_position") {
            throw std::invalid_argument(
                "config: unknown compression.tie_break '" + tie + "' (valid: ascending_position)");
        }
    }

    if (j.contains("retrieval")) {
        const auto& r = j.at("retrieval");
        check_keys(r, {"kind", "k", "stride", "query_layer", "yaw_only"}, "retrieval");
        cfg.strategy_name = get_or<std::string>(r, "kind", cfg.strategy_name, "retrieval");
        cfg.params.strategy = select_strategy(
            cfg.strategy_name, get_or<std::uint32_t>(r, "query_layer", 0, "retrieval"),
            get_or<bool>(r, "yaw_only", false, "retrieval"));
        cfg.params.retrieval_k = get_or<std::uint32_t>(r, "k", cfg.params.retrieval_k, "retrieval");
        cfg.params.retrieval_stride =
            get_or<std::uint32_t>(r, "stride", cfg.params.retrieval_stride, "retrieval");
    }

    if (j.contains("store")) {
        const auto& s = j.at("store");
        check_keys(s, {"hot_budget_bytes", "fixed_latency_s", "latency_per_byte_s", "dtype_bytes"},
                   "store");
        if (s.contains("hot_budget_bytes")) {
            if (s.at("hot_budget_bytes").is_null()) {
                cfg.params.hot_budget_bytes = kUnlimitedBytes;
            } else {
                cfg.params.hot_budget_bytes = s.at("hot_budget_bytes").get<std::uint64_t>();
            }
        }
        cfg.params.transfer.fixed_latency =
            get_or<double>(s, "fixed_latency_s", cfg.params.transfer.fixed_latency, "store");
        cfg.params.transfer.latency_per_byte =
            get_or<double>(s, "latency_per_byte_s", cfg.params.transfer.latency_per_byte, "store");
        // dtype_bytes threads into generated chunks via ObserveParams; chunks
        // default to half precision.
        const std::uint32_t dtype = get_or<std::uint32_t>(s, "dtype_bytes", 2, "store");
        if (dtype < 1 || dtype > 8) {
            throw std::invalid_argument("config: store.dtype_bytes must be in [1, 8]");
        }
        cfg.params.observe.dtype_bytes = dtype;
    }

    cfg.params.cost = default_cost_model();
    cfg.params.cost.tokens_per_frame = cfg.params.window.tokens_per_frame;
    if (j.contains("cost")) {
        const auto& c = j.at("cost");
        check_keys(c, {"fixed_step_s", "per_token_attention_s", "frames_per_step"}, "cost");
        cfg.params.cost.fixed_step_s =
            get_or<double>(c, "fixed_step_s", cfg.params.cost.fixed_step_s, "cost");
        cfg.params.cost.per_token_attention_s =
            get_or<double>(c, "per_token_attention_s", cfg.params.cost.per_token_attention_s, "cost");
        cfg.params.cost.frames_per_step =
            get_or<std::uint32_t>(c, "frames_per_step", cfg.params.cost.frames_per_step, "cost");
    }

    if (j.contains("observe")) {
        const auto& o = j.at("observe");
        check_keys(o, {"noise", "drift_yaw_rad", "drift_translation", "layer_jitter"}, "observe");
        cfg.params.observe.noise = get_or<double>(o, "noise", cfg.params.observe.noise, "observe");
        cfg.params.observe.drift_yaw_rad =
            get_or<double>(o, "drift_yaw_rad", cfg.params.observe.drift_yaw_rad, "observe");
        cfg.params.observe.drift_translation =
            get_or<double>(o, "drift_translation", cfg.params.observe.drift_translation, "observe");
        cfg.params.observe.layer_jitter =
            get_or<double>(o, "layer_jitter", cfg.params.observe.layer_jitter, "observe");
    }

    if (j.contains("steps")) {
        const auto& s = j.at("steps");
        check_keys(s, {"translation_step", "yaw_step_rad", "pitch_step_rad", "pitch_clamp_rad",
                       "max_step_magnitude"},
                   "steps");
        StepConfig& sc = cfg.params.steps;
        sc.translation_step = get_or<double>(s, "translation_step", sc.translation_step, "steps");
        sc.yaw_step_rad = get_or<double>(s, "yaw_step_rad", sc.yaw_step_rad, "steps");
        sc.pitch_step_rad = get_or<double>(s, "pitch_step_rad", sc.pitch_step_rad, "steps");
        sc.pitch_clamp_rad = get_or<double>(s, "pitch_clamp_rad", sc.pitch_clamp_rad, "steps");
        sc.max_step_magnitude = get_or<int>(s, "max_step_magnitude", sc.max_step_magnitude, "steps");
    }

    if (j.contains("fidelity")) {
        const auto& f = j.at("fidelity");
        check_keys(f, {"threshold", "layer"}, "fidelity");
        cfg.params.fidelity_threshold =
            get_or<double>(f, "threshold", cfg.params.fidelity_threshold, "fidelity");
        cfg.params.fidelity_layer =
            get_or<std::uint32_t>(f, "layer", cfg.params.fidelity_layer, "fidelity");
    }

    if (j.contains("attention")) {
        const auto& a = j.at("attention");
        check_keys(a, {"record", "temperature", "layer"}, "attention");
        cfg.params.record_attention = get_or<bool>(a, "record", cfg.params.record_attention, "attention");
        cfg.params.attention_temperature =
            get_or<double>(a, "temperature", cfg.params.attention_temperature, "attention");
        cfg.params.attention_layer =
            get_or<std::uint32_t>(a, "layer", cfg.params.attention_layer, "attention");
    }

    if (!j.contains("trajectory")) {
        throw std::invalid_argument("config: missing required key 'trajectory'");
    }
    cfg.trajectory_path = j.at("trajectory").get<std::string>();
    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir.string(), "config");

    cfg.params.validate();
    if (cfg.dim < 8) {
        throw std::invalid_argument("config: scene.dim must be >= 8");
    }
    cfg.echo = normalized_config_json(cfg);
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("config: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config: parse error in " + path.string() + ": " + e.what());
    }
    RunConfig cfg = parse_run_config(j);
    if (cfg.trajectory_path.is_relative()) {
        cfg.trajectory_path = path.parent_path() / cfg.trajectory_path;
    }
    return cfg;
}

}  // namespace worldkv
