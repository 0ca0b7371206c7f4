// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "worldkv/chunk.hpp"

namespace worldkv {

enum class TieBreak : std::uint8_t { AscendingPosition };

struct CompressionConfig {
    double retention_fraction = 0.25;  // P, over the (F-1)*T non-anchor tokens
    bool enabled = true;
    TieBreak tie_break = TieBreak::AscendingPosition;
    std::uint32_t heads = 1;  // >1 scores per head slice of dim and averages

    void validate() const {
        if (!(retention_fraction > 0.0 && retention_fraction <= 1.0)) {
            throw std::invalid_argument("CompressionConfig: retention_fraction must be in (0, 1]");
        }
        if (heads < 1) {
            throw std::invalid_argument("CompressionConfig: heads must be >= 1");
        }
    }
};

/// Redundancy of each non-anchor token: mean cosine similarity of its key to
/// every anchor-frame key of the same layer. Frame index 0 is the anchor;
/// scores cover frames 1..F-1 in frame-major order.
struct RedundancyScores {
    std::uint32_t frames = 0;
    std::uint32_t tokens_per_frame = 0;
    std::vector<double> scores;  // (F-1)*T values

    double at(std::uint32_t frame, std::uint32_t token) const {
        if (frame == 0 || frame >= frames || token >= tokens_per_frame) {
            throw std::out_of_range("RedundancyScores::at: index out of range");
        }
        return scores[static_cast<std::size_t>(frame - 1) * tokens_per_frame + token];
    }
};

/// Retained non-anchor token count: ceil(P * (F-1) * T), never below 1.
/// The small slack absorbs binary-fraction noise in P (0.05 * N style).
inline std::uint64_t retention_count(double fraction, std::uint32_t frames,
                                     std::uint32_t tokens_per_frame) {
    const double pool = static_cast<double>(frames - 1) * static_cast<double>(tokens_per_frame);
    const double raw = fraction * pool;
    const std::uint64_t r = static_cast<std::uint64_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::max<std::uint64_t>(1, std::min<std::uint64_t>(r, static_cast<std::uint64_t>(pool)));
}

inline RedundancyScores redundancy_scores(const KVChunk& chunk, std::size_t layer,
                                          std::uint32_t heads = 1) {
    if (chunk.compressed) {
        throw std::invalid_argument("redundancy_scores: chunk already compressed");
    }
    if (chunk.frames < 2) {
        throw std::invalid_argument("redundancy_scores: need F >= 2");
    }
    if (layer >= chunk.layers.size()) {
        throw std::out_of_range("redundancy_scores: layer out of range");
    }
    const Matrix& keys = chunk.layers[layer].keys;
    const std::uint32_t T = chunk.tokens_per_frame;
    const std::uint32_t F = chunk.frames;
    const std::size_t d = keys.cols();
    if (heads < 1 || d % heads != 0) {
        throw std::invalid_argument("redundancy_scores: dim not divisible by heads");
    }
    const std::size_t head_dim = d / heads;

    auto head_slice = [&](std::size_t row, std::uint32_t h) {
        return keys.row(row).subspan(h * head_dim, head_dim);
    };

    // Precompute per-head norms; report the exact offending token on zeros.
    std::vector<double> norms(static_cast<std::size_t>(F) * T * heads);
    for (std::size_t tok = 0; tok < static_cast<std::size_t>(F) * T; ++tok) {
        for (std::uint32_t h = 0; h < heads; ++h) {
            const double n = vector_norm(head_slice(tok, h));
            if (n < 1e-12) {
                throw std::runtime_error(
                    "redundancy_scores: zero-norm key at layer " + std::to_string(layer) +
                    " frame " + std::to_string(tok / T) + " token " + std::to_string(tok % T));
            }
            norms[tok * heads + h] = n;
        }
    }

    RedundancyScores out;
    out.frames = F;
    out.tokens_per_frame = T;
    out.scores.resize(static_cast<std::size_t>(F - 1) * T);
    for (std::uint32_t f = 1; f < F; ++f) {
        for (std::uint32_t j = 0; j < T; ++j) {
            const std::size_t tok = static_cast<std::size_t>(f) * T + j;
            double acc = 0.0;
            for (std::uint32_t h = 0; h < heads; ++h) {
                const auto kj = head_slice(tok, h);
                double sum = 0.0;
                for (std::uint32_t i = 0; i < T; ++i) {
                    sum += dot(kj, head_slice(i, h)) / (norms[tok * heads + h] * norms[i * heads + h]);
                }
                acc += sum / static_cast<double>(T);
            }
            out.scores[static_cast<std::size_t>(f - 1) * T + j] = acc / heads;
        }
    }
    return out;
}

namespace detail {

/// Bottom-r non-anchor flat positions under (score, position) ascending order.
inline std::vector<std::uint32_t> select_bottom(const std::vector<double>& scores,
                                                std::uint64_t r) {
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] < scores[b];
    });
    order.resize(static_cast<std::size_t>(r));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace detail

/// Prunes redundant non-anchor tokens per layer: all T anchor tokens survive,
/// plus the ceil(P*(F-1)*T) non-anchor tokens least similar to the anchor
/// keys. K and V rows move together. Applied once, at storage time.
inline KVChunk compress_chunk(const KVChunk& chunk, const CompressionConfig& cfg) {
    cfg.validate();
    if (chunk.compressed) {
        throw std::invalid_argument("compress_chunk: chunk " + std::to_string(chunk.chunk_id) +
                                    " is already compressed");
    }
    if (chunk.frames < 2) {
        throw std::invalid_argument("compress_chunk: need F >= 2");
    }
    const std::uint32_t T = chunk.tokens_per_frame;
    const std::uint64_t r = retention_count(cfg.retention_fraction, chunk.frames, T);

    KVChunk out;
    out.chunk_id = chunk.chunk_id;
    out.pose = chunk.pose;
    out.frames = chunk.frames;
    out.tokens_per_frame = T;
    out.compressed = true;
    out.dtype_bytes = chunk.dtype_bytes;
    out.layers.resize(chunk.layers.size());

    for (std::size_t l = 0; l < chunk.layers.size(); ++l) {
        const RedundancyScores scores = redundancy_scores(chunk, l, cfg.heads);
        const std::vector<std::uint32_t> picked = detail::select_bottom(scores.scores, r);

        const Matrix& keys = chunk.layers[l].keys;
        const Matrix& values = chunk.layers[l].values;
        const std::size_t d = keys.cols();
        Matrix out_keys(T + picked.size(), d);
        Matrix out_values(T + picked.size(), d);
        for (std::uint32_t i = 0; i < T; ++i) {
            std::copy(keys.row(i).begin(), keys.row(i).end(), out_keys.row(i).begin());
            std::copy(values.row(i).begin(), values.row(i).end(), out_values.row(i).begin());
        }
        LayerKV& out_layer = out.layers[l];
        out_layer.retained_indices.reserve(picked.size());
        for (std::size_t p = 0; p < picked.size(); ++p) {
            const std::uint32_t global = T + picked[p];  // non-anchor flat -> global token index
            out_layer.retained_indices.push_back(global);
            std::copy(keys.row(global).begin(), keys.row(global).end(), out_keys.row(T + p).begin());
            std::copy(values.row(global).begin(), values.row(global).end(),
                      out_values.row(T + p).begin());
        }
        out_layer.keys = std::move(out_keys);
        out_layer.values = std::move(out_values);
    }
    out.validate();
    return out;
}

/// Per-non-anchor-frame binary grids marking the bottom-`fraction` scored
/// tokens on a row-major H x W layout; plot-ready.
inline std::vector<std::vector<std::uint8_t>> retained_mask(const KVChunk& chunk,
                                                            std::size_t layer, double fraction,
                                                            std::uint32_t grid_h,
                                                            std::uint32_t grid_w) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("retained_mask: fraction must be in (0, 1)");
    }
    if (static_cast<std::uint64_t>(grid_h) * grid_w != chunk.tokens_per_frame) {
        throw std::invalid_argument("retained_mask: grid " + std::to_string(grid_h) + "x" +
                                    std::to_string(grid_w) + " does not match tokens_per_frame " +
                                    std::to_string(chunk.tokens_per_frame));
    }
    const RedundancyScores scores = redundancy_scores(chunk, layer);
    const std::uint64_t r = retention_count(fraction, chunk.frames, chunk.tokens_per_frame);
    const std::vector<std::uint32_t> picked = detail::select_bottom(scores.scores, r);

    std::vector<std::vector<std::uint8_t>> masks(
        chunk.frames - 1, std::vector<std::uint8_t>(chunk.tokens_per_frame, 0));
    for (std::uint32_t flat : picked) {
        masks[flat / chunk.tokens_per_frame][flat % chunk.tokens_per_frame] = 1;
    }
    return masks;
}

}  // namespace worldkv
