// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "worldkv/chunk_store.hpp"
#include "worldkv/geometry.hpp"

namespace worldkv {

enum class StrategyKind : std::uint8_t { PoseBased, QueryBased };

struct RetrievalStrategy {
    StrategyKind kind = StrategyKind::PoseBased;
    std::uint32_t query_layer = 0;  // scoring layer for the query-based kind
    DistanceOptions distance{};
};

inline RetrievalStrategy select_strategy(const std::string& kind, std::uint32_t query_layer = 0,
                                         bool yaw_only = false) {
    RetrievalStrategy s;
    s.query_layer = query_layer;
    s.distance.yaw_only = yaw_only;
    if (kind == "pose") {
        s.kind = StrategyKind::PoseBased;
    } else if (kind == "query") {
        s.kind = StrategyKind::QueryBased;
    } else {
        throw std::invalid_argument("retrieval: unknown strategy '" + kind +
                                    "' (valid kinds: pose, query)");
    }
    return s;
}

/// Ordered best-first selection of at most k stored chunks, with the summed
/// cold-tier fetch cost. Fetched payloads ride along so callers splice them
/// into the window without a second store round trip.
struct RetrievalResult {
    std::vector<std::uint64_t> chunk_ids;
    std::vector<double> scores;
    double transfer_seconds = 0.0;
    std::vector<std::shared_ptr<const KVChunk>> chunks;
};

namespace detail {

inline RetrievalResult fetch_selected(ChunkStore& store,
                                      const std::vector<std::uint64_t>& ids,
                                      const std::vector<double>& scores) {
    RetrievalResult result;
    result.chunk_ids = ids;
    result.scores = scores;
    result.chunks.reserve(ids.size());
    for (std::uint64_t id : ids) {
        auto fetched = store.fetch(id);
        result.transfer_seconds += fetched.transfer_seconds;
        result.chunks.push_back(std::move(fetched.chunk));
    }
    return result;
}

}  // namespace detail

/// Pose-based retrieval: k smallest combined pose distances over the stored
/// index minus `excluded`, ties broken by older chunk_id. An empty candidate
/// set yields an empty result.
inline RetrievalResult retrieve_pose(ChunkStore& store, const PoseState& current, std::size_t k,
                                     const std::unordered_set<std::uint64_t>& excluded = {},
                                     const DistanceOptions& opts = {}) {
    if (k < 1) {
        throw std::invalid_argument("retrieve_pose: k must be >= 1");
    }
    std::vector<std::uint64_t> ids;
    std::vector<PoseState> poses;
    for (const auto& [id, pose] : store.index()) {
        if (!excluded.count(id)) {
            ids.push_back(id);
            poses.push_back(pose);
        }
    }
    if (ids.empty()) {
        return {};
    }
    const std::vector<double> dist = combined_distance(current, poses, opts);

    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0u);
    // Candidates enumerate in insertion (id) order, so stable sort keeps the
    // older chunk first on ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    order.resize(std::min(k, order.size()));

    std::vector<std::uint64_t> sel_ids;
    std::vector<double> sel_scores;
    for (std::size_t i : order) {
        sel_ids.push_back(ids[i]);
        sel_scores.push_back(dist[i]);
    }
    return detail::fetch_selected(store, sel_ids, sel_scores);
}

/// Relevance of one stored chunk to a query block: mean over queries of the
/// max scaled dot product against the chunk's stored keys at `layer`.
/// Compressed chunks are scored on their retained keys as stored.
inline double query_chunk_score(const Matrix& queries, const KVChunk& chunk, std::uint32_t layer) {
    if (layer >= chunk.layers.size()) {
        throw std::out_of_range("query_chunk_score: layer " + std::to_string(layer) +
                                " out of range for chunk " + std::to_string(chunk.chunk_id));
    }
    const Matrix& keys = chunk.layers[layer].keys;
    if (queries.cols() != keys.cols()) {
        throw std::invalid_argument("query_chunk_score: query dim " + std::to_string(queries.cols()) +
                                    " != key dim " + std::to_string(keys.cols()));
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(keys.cols()));
    double mean = 0.0;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            best = std::max(best, dot(queries.row(q), keys.row(i)) * scale);
        }
        mean += best;
    }
    return mean / static_cast<double>(queries.rows());
}

/// Query-based retrieval: k highest attention-style scores, ties to the
/// older chunk_id.
inline RetrievalResult retrieve_query(ChunkStore& store, const Matrix& queries, std::size_t k,
                                      const std::unordered_set<std::uint64_t>& excluded = {},
                                      std::uint32_t layer = 0) {
    if (k < 1) {
        throw std::invalid_argument("retrieve_query: k must be >= 1");
    }
    if (queries.rows() < 1) {
        throw std::invalid_argument("retrieve_query: need at least one query token");
    }
    std::vector<std::uint64_t> ids;
    std::vector<double> scores;
    for (const auto& [id, pose] : store.index()) {
        if (excluded.count(id)) {
            continue;
        }
        ids.push_back(id);
        scores.push_back(query_chunk_score(queries, *store.peek(id), layer));
    }
    if (ids.empty()) {
        return {};
    }
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(k, order.size()));

    std::vector<std::uint64_t> sel_ids;
    std::vector<double> sel_scores;
    for (std::size_t i : order) {
        sel_ids.push_back(ids[i]);
        sel_scores.push_back(scores[i]);
    }
    return detail::fetch_selected(store, sel_ids, sel_scores);
}

}  // namespace worldkv
