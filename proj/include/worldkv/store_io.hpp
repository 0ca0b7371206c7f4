// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "worldkv/chunk_store.hpp"

namespace worldkv {

// Test-fixture persistence: one little-endian binary file per chunk plus a
// JSON manifest listing ids in insertion order. Tiers are not persisted;
// loading replays puts in insertion order against the target store's budget.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(buf[i], buf[sizeof(T) - 1 - i]);
        }
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) {
        throw std::runtime_error("chunk file: unexpected end of stream");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(buf[i], buf[sizeof(T) - 1 - i]);
        }
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
    for (float v : m.data()) {
        write_le<float>(os, v);
    }
}

inline Matrix read_matrix(std::istream& is, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (float& v : m.data()) {
        v = read_le<float>(is);
    }
    return m;
}

}  // namespace detail

inline void save_chunk(const KVChunk& chunk, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("save_chunk: cannot open " + path.string());
    }
    detail::write_le<std::uint64_t>(os, chunk.chunk_id);
    detail::write_le<std::uint32_t>(os, chunk.frames);
    detail::write_le<std::uint32_t>(os, chunk.tokens_per_frame);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(chunk.layers.size()));
    detail::write_le<std::uint32_t>(os, chunk.dim());
    detail::write_le<std::uint8_t>(os, chunk.compressed ? 1 : 0);
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(chunk.dtype_bytes));
    for (double v : pose_to_array(chunk.pose)) {
        detail::write_le<double>(os, v);
    }
    for (const LayerKV& layer : chunk.layers) {
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(layer.retained_indices.size()));
        for (std::uint32_t idx : layer.retained_indices) {
            detail::write_le<std::uint32_t>(os, idx);
        }
        detail::write_matrix(os, layer.keys);
        detail::write_matrix(os, layer.values);
    }
    if (!os) {
        throw std::runtime_error("save_chunk: write failed for " + path.string());
    }
}

inline KVChunk load_chunk(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("load_chunk: cannot open " + path.string());
    }
    KVChunk chunk;
    chunk.chunk_id = detail::read_le<std::uint64_t>(is);
    chunk.frames = detail::read_le<std::uint32_t>(is);
    chunk.tokens_per_frame = detail::read_le<std::uint32_t>(is);
    const std::uint32_t layers = detail::read_le<std::uint32_t>(is);
    const std::uint32_t dim = detail::read_le<std::uint32_t>(is);
    chunk.compressed = detail::read_le<std::uint8_t>(is) != 0;
    chunk.dtype_bytes = detail::read_le<std::uint8_t>(is);
    std::array<double, 7> pose{};
    for (double& v : pose) {
        v = detail::read_le<double>(is);
    }
    chunk.pose = pose_from_array(pose);
    chunk.layers.resize(layers);
    for (LayerKV& layer : chunk.layers) {
        const std::uint32_t retained = detail::read_le<std::uint32_t>(is);
        layer.retained_indices.resize(retained);
        for (std::uint32_t& idx : layer.retained_indices) {
            idx = detail::read_le<std::uint32_t>(is);
        }
        const std::size_t rows = chunk.compressed
                                     ? chunk.tokens_per_frame + retained
                                     : static_cast<std::size_t>(chunk.frames) * chunk.tokens_per_frame;
        layer.keys = detail::read_matrix(is, rows, dim);
        layer.values = detail::read_matrix(is, rows, dim);
    }
    chunk.validate();
    return chunk;
}

inline void save_store(const ChunkStore& store, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["ids"] = nlohmann::json::array();
    for (const auto& [id, pose] : store.index()) {
        manifest["ids"].push_back(id);
        save_chunk(*store.peek(id), dir / ("chunk_" + std::to_string(id) + ".bin"));
    }
    std::ofstream os(dir / "manifest.json");
    os << manifest.dump(2) << "\n";
    if (!os) {
        throw std::runtime_error("save_store: manifest write failed in " + dir.string());
    }
}

inline ChunkStore load_store(const std::filesystem::path& dir,
                             std::uint64_t hot_budget_bytes = kUnlimitedBytes,
                             TransferModel transfer = {}) {
    std::ifstream is(dir / "manifest.json");
    if (!is) {
        throw std::runtime_error("load_store: missing manifest in " + dir.string());
    }
    nlohmann::json manifest = nlohmann::json::parse(is);
    ChunkStore store(hot_budget_bytes, transfer);
    for (const auto& id : manifest.at("ids")) {
        store.put(load_chunk(dir / ("chunk_" + std::to_string(id.get<std::uint64_t>()) + ".bin")));
    }
    return store;
}

}  // namespace worldkv
