// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "worldkv/chunk_store.hpp"
#include "worldkv/compression.hpp"
#include "worldkv/retrieval.hpp"
#include "worldkv/worldsim.hpp"

namespace worldkv {

struct WindowConfig {
    std::uint32_t sink_frames = 3;
    std::uint32_t retrieved_frames = 9;
    std::uint32_t recent_frames = 3;
    std::uint32_t denoising_frames = 3;
    std::uint32_t tokens_per_frame = 64;  // T
    std::uint32_t chunk_frames = 3;       // F

    void validate() const {
        if (sink_frames == 0 || retrieved_frames == 0 || recent_frames == 0 ||
            denoising_frames == 0 || tokens_per_frame == 0 || chunk_frames == 0) {
            throw std::invalid_argument("WindowConfig: all counts must be > 0");
        }
        if (recent_frames % chunk_frames != 0) {
            throw std::invalid_argument("WindowConfig: recent_frames must be a multiple of chunk_frames");
        }
    }

    std::uint32_t recent_capacity_chunks() const { return recent_frames / chunk_frames; }

    /// How many chunks of `tokens_per_chunk` tokens fit the retrieved region.
    std::uint32_t retrieved_capacity_chunks(std::uint64_t tokens_per_chunk) const {
        if (tokens_per_chunk == 0) {
            return 0;
        }
        const std::uint64_t budget = static_cast<std::uint64_t>(retrieved_frames) * tokens_per_frame;
        return static_cast<std::uint32_t>(budget / tokens_per_chunk);
    }

    std::uint64_t window_token_bound() const {
        return static_cast<std::uint64_t>(sink_frames + retrieved_frames + recent_frames +
                                          denoising_frames) *
               tokens_per_frame;
    }
};

/// The four-region attention window. The sink is frozen at initialization;
/// the retrieved region is refilled from the store; recent holds the last
/// uncompressed chunks; the denoising slot tracks the in-flight chunk and is
/// excluded from the assembled context.
class WindowLayout {
public:
    WindowLayout(WindowConfig cfg, std::shared_ptr<const KVChunk> sink)
        : cfg_(cfg), sink_(std::move(sink)) {}

    const WindowConfig& config() const { return cfg_; }
    const KVChunk& sink() const { return *sink_; }
    const std::vector<std::shared_ptr<const KVChunk>>& retrieved() const { return retrieved_; }
    const std::deque<std::shared_ptr<const KVChunk>>& recent() const { return recent_; }
    std::shared_ptr<const KVChunk> denoising() const { return denoising_; }

    void set_denoising(std::shared_ptr<const KVChunk> chunk) { denoising_ = std::move(chunk); }

    /// Replaces the retrieved region; chunks are reordered temporally
    /// (by chunk_id) regardless of retrieval score order.
    void set_retrieved(std::vector<std::shared_ptr<const KVChunk>> chunks) {
        std::sort(chunks.begin(), chunks.end(),
                  [](const auto& a, const auto& b) { return a->chunk_id < b->chunk_id; });
        retrieved_ = std::move(chunks);
    }

    void push_recent(std::shared_ptr<const KVChunk> chunk) { recent_.push_back(std::move(chunk)); }

    std::shared_ptr<const KVChunk> pop_oldest_recent() {
        auto chunk = recent_.front();
        recent_.pop_front();
        return chunk;
    }

    /// Ids currently pinned in the window outside the retrieved region.
    std::unordered_set<std::uint64_t> resident_ids() const {
        std::unordered_set<std::uint64_t> ids{sink_->chunk_id};
        for (const auto& c : recent_) {
            ids.insert(c->chunk_id);
        }
        if (denoising_) {
            ids.insert(denoising_->chunk_id);
        }
        return ids;
    }

    std::uint64_t context_token_count() const {
        std::uint64_t tokens = sink_->tokens_per_layer();
        for (const auto& c : retrieved_) {
            tokens += c->tokens_per_layer();
        }
        for (const auto& c : recent_) {
            tokens += c->tokens_per_layer();
        }
        return tokens;
    }

private:
    WindowConfig cfg_;
    std::shared_ptr<const KVChunk> sink_;
    std::vector<std::shared_ptr<const KVChunk>> retrieved_;
    std::deque<std::shared_ptr<const KVChunk>> recent_;
    std::shared_ptr<const KVChunk> denoising_;
};

inline WindowLayout init_window(const WindowConfig& cfg, KVChunk first_chunk) {
    cfg.validate();
    if (first_chunk.frames != cfg.sink_frames) {
        throw std::invalid_argument("init_window: sink expects " + std::to_string(cfg.sink_frames) +
                                    " frames, first chunk has " + std::to_string(first_chunk.frames));
    }
    if (first_chunk.tokens_per_frame != cfg.tokens_per_frame) {
        throw std::invalid_argument("init_window: tokens_per_frame mismatch");
    }
    first_chunk.validate();
    return WindowLayout(cfg, std::make_shared<const KVChunk>(std::move(first_chunk)));
}

struct EvictionReport {
    std::vector<std::uint64_t> evicted_ids;
    std::uint64_t stored_bytes = 0;
};

struct RetrievalTrace {
    std::vector<std::uint64_t> requested_ids;  // retrieval ranking order
    std::vector<double> scores;
    std::vector<std::uint64_t> final_ids;      // spliced region, temporal order
    std::uint32_t padded_count = 0;
    double transfer_seconds = 0.0;
    std::size_t k = 0;
};

/// Admits a freshly generated chunk into the recent region, compressing and
/// storing overflow. With a null store (discard mode) overflow is dropped.
inline EvictionReport admit_chunk(WindowLayout& window, ChunkStore* store,
                                  const CompressionConfig& compression,
                                  std::shared_ptr<const KVChunk> chunk,
                                  std::uint32_t recent_capacity_override = 0) {
    if (chunk->compressed) {
        throw std::invalid_argument("admit_chunk: new chunk must be uncompressed");
    }
    if (chunk->frames != window.config().chunk_frames) {
        throw std::invalid_argument("admit_chunk: chunk frame count mismatch");
    }
    EvictionReport report;
    window.push_recent(std::move(chunk));
    const std::uint32_t capacity = recent_capacity_override > 0
                                       ? recent_capacity_override
                                       : window.config().recent_capacity_chunks();
    while (window.recent().size() > capacity) {
        auto evicted = window.pop_oldest_recent();
        report.evicted_ids.push_back(evicted->chunk_id);
        if (store != nullptr) {
            if (compression.enabled) {
                KVChunk stored = compress_chunk(*evicted, compression);
                report.stored_bytes += byte_size(stored);
                store->put(std::move(stored));
            } else {
                report.stored_bytes += byte_size(*evicted);
                store->put(*evicted);
            }
        }
    }
    return report;
}

/// Refills the retrieved region for the current generation step: top-k by the
/// configured strategy over non-resident stored chunks, padded up to k with
/// the most recent evicted chunks when retrieval returns fewer.
inline RetrievalTrace refresh_retrieval(WindowLayout& window, ChunkStore& store,
                                        const RetrievalStrategy& strategy,
                                        const PoseState& current_pose, std::size_t k,
                                        const Matrix* queries = nullptr) {
    RetrievalTrace trace;
    trace.k = k;
    if (k == 0 || store.size() == 0) {
        window.set_retrieved({});
        return trace;
    }
    const std::unordered_set<std::uint64_t> excluded = window.resident_ids();

    RetrievalResult result;
    if (strategy.kind == StrategyKind::PoseBased) {
        result = retrieve_pose(store, current_pose, k, excluded, strategy.distance);
    } else {
        if (queries == nullptr) {
            throw std::invalid_argument("refresh_retrieval: query strategy needs a query block");
        }
        result = retrieve_query(store, *queries, k, excluded, strategy.query_layer);
    }
    trace.requested_ids = result.chunk_ids;
    trace.scores = result.scores;
    trace.transfer_seconds = result.transfer_seconds;

    // Top up to k with the most recent evictions not already selected.
    if (result.chunk_ids.size() < k) {
        std::unordered_set<std::uint64_t> taken(result.chunk_ids.begin(), result.chunk_ids.end());
        const auto& index = store.index();
        for (auto it = index.rbegin(); it != index.rend() && result.chunk_ids.size() < k; ++it) {
            const std::uint64_t id = it->first;
            if (taken.count(id) || excluded.count(id)) {
                continue;
            }
            auto fetched = store.fetch(id);
            trace.transfer_seconds += fetched.transfer_seconds;
            result.chunk_ids.push_back(id);
            result.chunks.push_back(std::move(fetched.chunk));
            taken.insert(id);
            ++trace.padded_count;
        }
    }

    window.set_retrieved(std::move(result.chunks));
    for (const auto& c : window.retrieved()) {
        trace.final_ids.push_back(c->chunk_id);
    }
    return trace;
}

/// One full window transition: admit the completed chunk, evict overflow
/// through compression into the store, then refresh retrieval for the
/// current camera state.
inline std::pair<EvictionReport, RetrievalTrace> step(WindowLayout& window, ChunkStore& store,
                                                      const RetrievalStrategy& strategy,
                                                      const CompressionConfig& compression,
                                                      std::shared_ptr<const KVChunk> new_chunk,
                                                      const PoseState& current_pose, std::size_t k,
                                                      const Matrix* queries = nullptr) {
    EvictionReport eviction = admit_chunk(window, &store, compression, std::move(new_chunk));
    RetrievalTrace trace = refresh_retrieval(window, store, strategy, current_pose, k, queries);
    return {std::move(eviction), std::move(trace)};
}

/// Concatenates sink, retrieved and recent regions. Every emitted K/V row is
/// bit-identical to its stored source; nothing is re-encoded on this path.
inline AssembledContext assemble_context(const WindowLayout& window) {
    std::vector<std::pair<const KVChunk*, RegionTag>> parts;
    parts.emplace_back(&window.sink(), RegionTag::Sink);
    for (const auto& c : window.retrieved()) {
        parts.emplace_back(c.get(), RegionTag::Retrieved);
    }
    for (const auto& c : window.recent()) {
        parts.emplace_back(c.get(), RegionTag::Recent);
    }

    AssembledContext out;
    if (parts.empty()) {
        return out;
    }
    const std::size_t layers = parts.front().first->layers.size();
    const std::size_t d = parts.front().first->dim();
    std::size_t total = 0;
    for (const auto& [chunk, tag] : parts) {
        if (chunk->layers.size() != layers || chunk->dim() != d) {
            throw std::invalid_argument("assemble_context: layer/dim mismatch across chunks");
        }
        total += chunk->tokens_per_layer();
    }
    out.layers.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        out.layers[l].keys = Matrix(total, d);
        out.layers[l].values = Matrix(total, d);
    }
    out.token_chunk.reserve(total);
    out.token_region.reserve(total);

    std::size_t offset = 0;
    for (const auto& [chunk, tag] : parts) {
        const std::size_t rows = chunk->tokens_per_layer();
        for (std::size_t l = 0; l < layers; ++l) {
            const Matrix& k = chunk->layers[l].keys;
            const Matrix& v = chunk->layers[l].values;
            std::copy(k.data().begin(), k.data().end(),
                      out.layers[l].keys.data().begin() + offset * d);
            std::copy(v.data().begin(), v.data().end(),
                      out.layers[l].values.data().begin() + offset * d);
        }
        for (std::size_t i = 0; i < rows; ++i) {
            out.token_chunk.push_back(chunk->chunk_id);
            out.token_region.push_back(tag);
        }
        out.chunk_order.push_back(chunk->chunk_id);
        offset += rows;
    }
    return out;
}

inline std::uint64_t context_token_count(const WindowLayout& window) {
    return window.context_token_count();
}

}  // namespace worldkv
