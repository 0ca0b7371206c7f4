// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "worldkv/config.hpp"
#include "worldkv/rollout.hpp"

namespace worldkv {

// CSV schemas are versioned through a leading comment line; tests pin them.
inline constexpr const char* kStepsCsvHeader =
    "# worldkv-csv v1 steps\n"
    "step,mode,context_tokens,hot_bytes,cold_bytes,transfer_s,fidelity,modeled_fps,"
    "retrieved_ids,padded\n";
inline constexpr const char* kRetrievalCsvHeader =
    "# worldkv-csv v1 retrieval\n"
    "step,strategy,k,returned_ids,scores,transfer_s\n";
inline constexpr const char* kAttentionCsvHeader =
    "# worldkv-csv v1 attention\n"
    "step,mode,chunk_id,mass\n";
inline constexpr const char* kAblationCsvHeader =
    "# worldkv-csv v1 ablation\n"
    "axis,point,fidelity,context_tokens,store_bytes,modeled_fps,realized\n";

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string join_ids(const std::vector<std::uint64_t>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) {
            out += ';';
        }
        out += std::to_string(ids[i]);
    }
    return out;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) {
            throw std::runtime_error("write_file_atomic: cannot open " + tmp.string());
        }
        os << content;
        if (!os) {
            throw std::runtime_error("write_file_atomic: write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string steps_csv(const std::vector<RolloutReport>& reports) {
    std::string out = kStepsCsvHeader;
    for (const RolloutReport& report : reports) {
        const std::string mode = mode_name(report.mode);
        for (const StepStats& s : report.steps) {
            out += std::to_string(s.step);
            out += ',';
            out += mode;
            out += ',';
            out += std::to_string(s.context_tokens);
            out += ',';
            out += std::to_string(s.hot_bytes);
            out += ',';
            out += std::to_string(s.cold_bytes);
            out += ',';
            out += detail::fmt_double(s.transfer_seconds);
            out += ',';
            out += detail::fmt_double(s.fidelity);
            out += ',';
            out += detail::fmt_double(s.modeled_fps);
            out += ',';
            out += detail::join_ids(s.retrieved_ids);
            out += ',';
            out += std::to_string(s.padded_count);
            out += '\n';
        }
    }
    return out;
}

inline std::string retrieval_csv(const RolloutReport& report, const std::string& strategy,
                                 std::size_t k) {
    std::string out = kRetrievalCsvHeader;
    for (const StepStats& s : report.steps) {
        if (s.step == 0) {
            continue;
        }
        std::string scores;
        for (std::size_t i = 0; i < s.ranked_scores.size(); ++i) {
            if (i) {
                scores += ';';
            }
            scores += detail::fmt_double(s.ranked_scores[i]);
        }
        out += std::to_string(s.step);
        out += ',';
        out += strategy;
        out += ',';
        out += std::to_string(k);
        out += ',';
        out += detail::join_ids(s.ranked_ids);
        out += ',';
        out += scores;
        out += ',';
        out += detail::fmt_double(s.transfer_seconds);
        out += '\n';
    }
    return out;
}

inline std::string attention_csv(const std::vector<RolloutReport>& reports) {
    std::string out = kAttentionCsvHeader;
    for (const RolloutReport& report : reports) {
        const std::string mode = mode_name(report.mode);
        for (const StepStats& s : report.steps) {
            for (const auto& [chunk_id, mass] : s.attention) {
                out += std::to_string(s.step);
                out += ',';
                out += mode;
                out += ',';
                out += std::to_string(chunk_id);
                out += ',';
                out += detail::fmt_double(mass);
                out += '\n';
            }
        }
    }
    return out;
}

inline nlohmann::json summary_json(const RunConfig& cfg,
                                   const std::map<std::string, std::vector<RolloutReport>>& by_entry) {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = cfg.echo;
    nlohmann::json modes = nlohmann::json::object();
    for (const auto& [entry, reports] : by_entry) {
        for (const RolloutReport& report : reports) {
            nlohmann::json r;
            r["mean_fidelity"] = report.mean_fidelity;
            r["final_context_tokens"] = report.final_context_tokens;
            r["final_fps"] = report.final_fps;
            r["total_transfer_seconds"] = report.total_transfer_seconds;
            r["hot_bytes"] = report.final_hot_bytes;
            r["cold_bytes"] = report.final_cold_bytes;
            r["store_chunks"] = report.final_store_chunks;
            r["stored_bytes_total"] = report.stored_bytes_total;
            r["evicted_chunks"] = report.evicted_chunk_count;
            r["steps"] = report.steps.size();
            modes[mode_name(report.mode)][entry] = std::move(r);
        }
    }
    j["modes"] = std::move(modes);

    // Cross-entry means per mode, the headline numbers.
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [mode, entries] : j.at("modes").items()) {
        double fidelity = 0.0;
        double fps = 0.0;
        std::size_t n = 0;
        for (const auto& [entry, r] : entries.items()) {
            fidelity += r.at("mean_fidelity").get<double>();
            fps += r.at("final_fps").get<double>();
            ++n;
        }
        agg[mode] = {{"mean_fidelity", fidelity / n}, {"mean_final_fps", fps / n}};
    }
    j["aggregate"] = std::move(agg);
    return j;
}

}  // namespace worldkv
