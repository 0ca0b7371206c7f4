// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "worldkv/window.hpp"

namespace worldkv {

enum class RolloutMode : std::uint8_t { SlidingWindow, FullKV, WorldKV };

inline std::string mode_name(RolloutMode mode) {
    switch (mode) {
        case RolloutMode::SlidingWindow: return "sliding_window";
        case RolloutMode::FullKV: return "full_kv";
        case RolloutMode::WorldKV: return "world_kv";
    }
    throw std::invalid_argument("mode_name: invalid mode");
}

inline RolloutMode mode_from_name(const std::string& name) {
    if (name == "sliding_window") return RolloutMode::SlidingWindow;
    if (name == "full_kv") return RolloutMode::FullKV;
    if (name == "world_kv") return RolloutMode::WorldKV;
    throw std::invalid_argument("rollout: unknown mode '" + name +
                                "' (valid: sliding_window, full_kv, world_kv)");
}

struct RolloutParams {
    WindowConfig window{};
    CompressionConfig compression{};
    RetrievalStrategy strategy{};
    std::uint32_t retrieval_k = 0;      // 0 derives k from retrieved-region capacity
    std::uint32_t retrieval_stride = 1; // refresh cadence in steps
    StepConfig steps{};
    ObserveParams observe{};
    CostModel cost{};
    TransferModel transfer{};
    std::uint64_t hot_budget_bytes = kUnlimitedBytes;
    double fidelity_threshold = 0.8;
    std::uint32_t fidelity_layer = 0;
    bool record_attention = false;
    double attention_temperature = 0.01;
    std::uint32_t attention_layer = 0;
    PoseState start_pose = PoseState::identity(PoseMode::Pseudo);

    void validate() const {
        window.validate();
        compression.validate();
        steps.validate();
        observe.validate();
        cost.validate();
        transfer.validate();
        if (retrieval_stride < 1) {
            throw std::invalid_argument("RolloutParams: retrieval_stride must be >= 1");
        }
        if (observe.frames != window.chunk_frames ||
            observe.tokens_per_frame != window.tokens_per_frame) {
            throw std::invalid_argument("RolloutParams: observe shape must match window chunk shape");
        }
        if (!(fidelity_threshold > 0.0 && fidelity_threshold < 1.0)) {
            throw std::invalid_argument("RolloutParams: fidelity_threshold must be in (0, 1)");
        }
    }

    /// Token count per stored chunk under the active compression setting.
    std::uint64_t stored_chunk_tokens() const {
        const std::uint64_t full =
            static_cast<std::uint64_t>(window.chunk_frames) * window.tokens_per_frame;
        if (!compression.enabled) {
            return full;
        }
        return window.tokens_per_frame +
               retention_count(compression.retention_fraction, window.chunk_frames,
                               window.tokens_per_frame);
    }

    /// Effective retrieval budget: configured k clamped to region capacity,
    /// or the full capacity when k is left at 0.
    std::uint32_t effective_k() const {
        const std::uint32_t capacity = window.retrieved_capacity_chunks(stored_chunk_tokens());
        if (retrieval_k == 0) {
            return capacity;
        }
        return std::min(retrieval_k, capacity);
    }
};

struct StepStats {
    std::uint32_t step = 0;
    PoseState pose;
    std::uint64_t context_tokens = 0;  // attended tokens incl. the denoising chunk
    std::uint64_t hot_bytes = 0;
    std::uint64_t cold_bytes = 0;
    std::uint64_t store_chunks = 0;
    double transfer_seconds = 0.0;
    double fidelity = 0.0;
    double modeled_fps = 0.0;
    std::vector<std::uint64_t> retrieved_ids;       // spliced region, temporal order
    std::vector<std::uint64_t> ranked_ids;          // retrieval result, best first
    std::vector<double> ranked_scores;
    std::uint32_t padded_count = 0;
    std::vector<std::pair<std::uint64_t, double>> attention;  // chunk-level mass
};

struct RolloutReport {
    RolloutMode mode = RolloutMode::WorldKV;
    std::vector<StepStats> steps;
    double mean_fidelity = 0.0;  // over generation steps (step >= 1)
    double total_transfer_seconds = 0.0;
    std::uint64_t final_context_tokens = 0;
    std::uint64_t final_hot_bytes = 0;
    std::uint64_t final_cold_bytes = 0;
    std::uint64_t final_store_chunks = 0;
    std::uint64_t stored_bytes_total = 0;    // bytes pushed into the store over the run
    std::uint64_t evicted_chunk_count = 0;
    double final_fps = 0.0;
};

/// Executes one trajectory under the given mode. Chunk i is generated at the
/// pose reached before its action plays out; actions[i] advances the camera
/// to chunk i+1. Fidelity and attention are measured against the memory
/// context assembled for the step, before the new chunk joins it.
inline RolloutReport run_rollout(RolloutMode mode, const std::vector<DiscreteAction>& trajectory,
                                 const Scene& scene, const RolloutParams& params) {
    params.validate();
    if (trajectory.empty()) {
        throw std::invalid_argument("run_rollout: empty trajectory");
    }
    const WindowConfig& wcfg = params.window;
    const std::uint64_t chunk_tokens =
        static_cast<std::uint64_t>(wcfg.chunk_frames) * wcfg.tokens_per_frame;
    const std::uint32_t k = params.effective_k();
    if (mode == RolloutMode::WorldKV && k == 0) {
        throw std::invalid_argument("run_rollout: retrieved region cannot hold a single chunk");
    }
    // The sliding baseline spends the retrieved-region budget on extra recent
    // chunks, so its steady-state window matches the retrieval mode's.
    const std::uint32_t recent_capacity =
        mode == RolloutMode::SlidingWindow
            ? (wcfg.retrieved_frames + wcfg.recent_frames) / wcfg.chunk_frames
            : wcfg.recent_capacity_chunks();

    ChunkStore store(params.hot_budget_bytes, params.transfer);
    RolloutReport report;
    report.mode = mode;
    report.steps.reserve(trajectory.size());

    PoseState pose = params.start_pose;
    WindowLayout window = init_window(wcfg, observe(scene, pose, params.observe, 0));

    {
        StepStats s0;
        s0.step = 0;
        s0.pose = pose;
        s0.context_tokens = window.context_token_count();  // the sink attends itself
        s0.fidelity = 1.0;  // conditioning step; excluded from mean_fidelity
        s0.modeled_fps = modeled_fps(s0.context_tokens, params.cost);
        report.steps.push_back(std::move(s0));
    }

    std::shared_ptr<const KVChunk> previous;  // completed chunk awaiting admission
    double fidelity_sum = 0.0;
    for (std::uint32_t i = 1; i < trajectory.size(); ++i) {
        pose = accumulate_action(pose, trajectory[i - 1], params.steps);
        KVChunk generated = observe(scene, pose, params.observe, i);
        auto current = std::make_shared<const KVChunk>(std::move(generated));

        StepStats stats;
        stats.step = i;
        stats.pose = pose;

        // Slide the window past the chunk completed last step.
        if (previous) {
            const std::uint32_t cap =
                mode == RolloutMode::FullKV ? static_cast<std::uint32_t>(i + 1) : recent_capacity;
            EvictionReport evicted = admit_chunk(
                window, mode == RolloutMode::WorldKV ? &store : nullptr, params.compression,
                previous, cap);
            report.evicted_chunk_count += evicted.evicted_ids.size();
            report.stored_bytes_total += evicted.stored_bytes;
        }

        if (mode == RolloutMode::WorldKV &&
            (i == 1 || params.retrieval_stride == 1 || i % params.retrieval_stride == 0)) {
            window.set_denoising(current);
            Matrix queries;
            const Matrix* queries_ptr = nullptr;
            if (params.strategy.kind == StrategyKind::QueryBased) {
                queries = Matrix(wcfg.tokens_per_frame, current->dim());
                const Matrix& src = current->layers[params.strategy.query_layer].keys;
                std::copy(src.data().begin(),
                          src.data().begin() + static_cast<std::size_t>(wcfg.tokens_per_frame) * current->dim(),
                          queries.data().begin());
                queries_ptr = &queries;
            }
            RetrievalTrace trace =
                refresh_retrieval(window, store, params.strategy, pose, k, queries_ptr);
            stats.transfer_seconds = trace.transfer_seconds;
            stats.retrieved_ids = trace.final_ids;
            stats.ranked_ids = std::move(trace.requested_ids);
            stats.ranked_scores = std::move(trace.scores);
            stats.padded_count = trace.padded_count;
            window.set_denoising(nullptr);
        } else if (mode == RolloutMode::WorldKV) {
            for (const auto& c : window.retrieved()) {
                stats.retrieved_ids.push_back(c->chunk_id);
            }
        }

        const AssembledContext memory = assemble_context(window);
        stats.fidelity = revisit_fidelity(memory, scene, pose, params.observe.frustum,
                                          params.fidelity_threshold, params.fidelity_layer);
        if (params.record_attention && memory.token_count() > 0) {
            Matrix queries(wcfg.tokens_per_frame, current->dim());
            const Matrix& src = current->layers[params.attention_layer].keys;
            std::copy(src.data().begin(),
                      src.data().begin() + static_cast<std::size_t>(wcfg.tokens_per_frame) * current->dim(),
                      queries.data().begin());
            stats.attention =
                attention_map(memory, queries, params.attention_temperature, params.attention_layer)
                    .per_chunk;
        }

        stats.context_tokens = window.context_token_count() + chunk_tokens;
        stats.modeled_fps = modeled_fps(stats.context_tokens, params.cost);
        const auto fp = store.footprint();
        stats.hot_bytes = fp.hot_bytes;
        stats.cold_bytes = fp.cold_bytes;
        stats.store_chunks = fp.chunk_count;

        fidelity_sum += stats.fidelity;
        report.total_transfer_seconds += stats.transfer_seconds;
        report.steps.push_back(std::move(stats));
        previous = std::move(current);
    }

    const StepStats& last = report.steps.back();
    report.mean_fidelity =
        trajectory.size() > 1 ? fidelity_sum / static_cast<double>(trajectory.size() - 1) : 1.0;
    report.final_context_tokens = last.context_tokens;
    report.final_hot_bytes = last.hot_bytes;
    report.final_cold_bytes = last.cold_bytes;
    report.final_store_chunks = last.store_chunks;
    report.final_fps = last.modeled_fps;
    return report;
}

}  // namespace worldkv
