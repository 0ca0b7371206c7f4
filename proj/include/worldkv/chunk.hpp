// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "worldkv/geometry.hpp"
#include "worldkv/matrix.hpp"

namespace worldkv {

/// Per-layer key/value blocks. For a compressed chunk, `retained_indices`
/// lists the surviving non-anchor token positions (global token index within
/// the chunk, strictly increasing, all >= tokens_per_frame); anchor-frame
/// tokens are always present and come first in `keys`/`values`.
struct LayerKV {
    Matrix keys;
    Matrix values;
    std::vector<std::uint32_t> retained_indices;
};

/// Key/value projections of F consecutive latent frames, plus the camera
/// state at generation time.
struct KVChunk {
    std::uint64_t chunk_id = 0;
    PoseState pose;
    std::uint32_t frames = 0;            // F
    std::uint32_t tokens_per_frame = 0;  // T
    bool compressed = false;
    std::uint32_t dtype_bytes = 2;       // simulated storage precision per scalar
    std::vector<LayerKV> layers;

    std::uint32_t dim() const {
        return layers.empty() ? 0 : static_cast<std::uint32_t>(layers.front().keys.cols());
    }

    /// Token count per layer: F*T uncompressed, T + retained otherwise.
    std::size_t tokens_per_layer() const {
        if (layers.empty()) {
            return compressed ? 0 : static_cast<std::size_t>(frames) * tokens_per_frame;
        }
        return layers.front().keys.rows();
    }

    void validate() const {
        const std::size_t full = static_cast<std::size_t>(frames) * tokens_per_frame;
        std::size_t expect_retained = 0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const LayerKV& layer = layers[l];
            const std::string where = "KVChunk " + std::to_string(chunk_id) + " layer " + std::to_string(l);
            if (layer.keys.rows() != layer.values.rows() || layer.keys.cols() != layer.values.cols()) {
                throw std::invalid_argument(where + ": key/value shape mismatch");
            }
            if (layer.keys.cols() != layers.front().keys.cols()) {
                throw std::invalid_argument(where + ": inconsistent dim across layers");
            }
            if (!compressed) {
                if (!layer.retained_indices.empty()) {
                    throw std::invalid_argument(where + ": uncompressed chunk with retained indices");
                }
                if (layer.keys.rows() != full) {
                    throw std::invalid_argument(where + ": uncompressed token count != F*T");
                }
            } else {
                if (l == 0) {
                    expect_retained = layer.retained_indices.size();
                } else if (layer.retained_indices.size() != expect_retained) {
                    throw std::invalid_argument(where + ": retained count differs across layers");
                }
                if (layer.keys.rows() != tokens_per_frame + layer.retained_indices.size()) {
                    throw std::invalid_argument(where + ": compressed token count mismatch");
                }
                std::uint32_t prev = 0;
                bool first = true;
                for (std::uint32_t idx : layer.retained_indices) {
                    if (idx < tokens_per_frame || idx >= full) {
                        throw std::invalid_argument(where + ": retained index outside non-anchor range");
                    }
                    if (!first && idx <= prev) {
                        throw std::invalid_argument(where + ": retained indices not strictly increasing");
                    }
                    prev = idx;
                    first = false;
                }
            }
        }
    }
};

/// Fixed per-chunk metadata overhead counted by the byte model.
inline constexpr std::uint64_t kChunkMetadataBytes = 256;

inline std::uint64_t payload_bytes_for(std::uint64_t layers, std::uint64_t tokens_per_layer,
                                       std::uint64_t dim, std::uint64_t dtype_bytes) {
    return layers * 2 * tokens_per_layer * dim * dtype_bytes;  // 2 = K and V
}

inline std::uint64_t byte_size_for(std::uint64_t layers, std::uint64_t tokens_per_layer,
                                   std::uint64_t dim, std::uint64_t dtype_bytes) {
    return payload_bytes_for(layers, tokens_per_layer, dim, dtype_bytes) + kChunkMetadataBytes;
}

/// Simulated storage footprint of a chunk at its configured precision.
inline std::uint64_t byte_size(const KVChunk& chunk) {
    return byte_size_for(chunk.layers.size(), chunk.tokens_per_layer(), chunk.dim(),
                         chunk.dtype_bytes);
}

inline std::uint64_t payload_bytes(const KVChunk& chunk) {
    return payload_bytes_for(chunk.layers.size(), chunk.tokens_per_layer(), chunk.dim(),
                             chunk.dtype_bytes);
}

}  // namespace worldkv
