// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "worldkv/chunk.hpp"

namespace worldkv {

/// Cost of moving one chunk from the cold (host) tier to the hot (device)
/// tier. Hot hits are free.
struct TransferModel {
    double latency_per_byte = 0.0;  // seconds/byte
    double fixed_latency = 0.0;     // seconds per transfer

    void validate() const {
        if (latency_per_byte < 0.0 || fixed_latency < 0.0) {
            throw std::invalid_argument("TransferModel: latencies must be >= 0");
        }
    }
};

inline constexpr std::uint64_t kUnlimitedBytes = std::numeric_limits<std::uint64_t>::max();

/// Tiered associative store of evicted KV chunks. The hot tier is bounded by
/// a byte budget; overflowing chunks demote to cold in the order they entered
/// the hot tier. Fetching a cold chunk promotes it and charges the transfer
/// model. Chunks are immutable once stored.
class ChunkStore {
public:
    explicit ChunkStore(std::uint64_t hot_budget_bytes = kUnlimitedBytes,
                        TransferModel transfer = {})
        : hot_budget_bytes_(hot_budget_bytes), transfer_(transfer) {
        transfer_.validate();
    }

    struct FetchResult {
        std::shared_ptr<const KVChunk> chunk;
        double transfer_seconds = 0.0;
        bool was_cold = false;
    };

    struct Footprint {
        std::uint64_t hot_bytes = 0;
        std::uint64_t cold_bytes = 0;
        std::size_t chunk_count = 0;
    };

    std::uint64_t put(KVChunk chunk) {
        chunk.validate();
        const std::uint64_t id = chunk.chunk_id;
        if (hot_.count(id) || cold_.count(id)) {
            throw std::invalid_argument("ChunkStore::put: duplicate chunk_id " + std::to_string(id));
        }
        auto entry = std::make_shared<const KVChunk>(std::move(chunk));
        const std::uint64_t bytes = byte_size(*entry);
        bytes_.emplace(id, bytes);
        index_.emplace_back(id, entry->pose);
        hot_.emplace(id, std::move(entry));
        hot_bytes_ += bytes;
        hot_arrival_.push_back(id);
        demote_until_within_budget();
        return id;
    }

    FetchResult fetch(std::uint64_t id) {
        if (auto it = hot_.find(id); it != hot_.end()) {
            return {it->second, 0.0, false};
        }
        auto it = cold_.find(id);
        if (it == cold_.end()) {
            throw std::out_of_range("ChunkStore::fetch: unknown chunk_id " + std::to_string(id));
        }
        auto entry = it->second;
        const std::uint64_t bytes = bytes_.at(id);
        // Transfers move the K/V payload; the metadata header stays host-side.
        const double cost = transfer_.fixed_latency +
                            transfer_.latency_per_byte * static_cast<double>(payload_bytes(*entry));
        cold_.erase(it);
        cold_bytes_ -= bytes;
        hot_.emplace(id, entry);
        hot_bytes_ += bytes;
        hot_arrival_.push_back(id);
        demote_until_within_budget();
        return {entry, cost, true};
    }

    /// Read-only lookup without promotion or transfer cost; used by scoring.
    std::shared_ptr<const KVChunk> peek(std::uint64_t id) const {
        if (auto it = hot_.find(id); it != hot_.end()) {
            return it->second;
        }
        if (auto it = cold_.find(id); it != cold_.end()) {
            return it->second;
        }
        throw std::out_of_range("ChunkStore::peek: unknown chunk_id " + std::to_string(id));
    }

    bool contains(std::uint64_t id) const { return hot_.count(id) || cold_.count(id); }
    bool is_hot(std::uint64_t id) const { return hot_.count(id) > 0; }
    std::size_t size() const { return index_.size(); }

    Footprint footprint() const { return {hot_bytes_, cold_bytes_, index_.size()}; }

    /// Every stored chunk exactly once, in insertion order.
    const std::vector<std::pair<std::uint64_t, PoseState>>& index() const { return index_; }

    std::uint64_t hot_budget_bytes() const { return hot_budget_bytes_; }
    const TransferModel& transfer_model() const { return transfer_; }

private:
    void demote_until_within_budget() {
        while (hot_bytes_ > hot_budget_bytes_ && !hot_arrival_.empty()) {
            const std::uint64_t id = hot_arrival_.front();
            hot_arrival_.pop_front();
            auto it = hot_.find(id);
            if (it == hot_.end()) {
                continue;  // stale entry from an earlier promotion
            }
            const std::uint64_t bytes = bytes_.at(id);
            cold_.emplace(id, it->second);
            cold_bytes_ += bytes;
            hot_.erase(it);
            hot_bytes_ -= bytes;
        }
    }

    std::unordered_map<std::uint64_t, std::shared_ptr<const KVChunk>> hot_;
    std::unordered_map<std::uint64_t, std::shared_ptr<const KVChunk>> cold_;
    std::unordered_map<std::uint64_t, std::uint64_t> bytes_;
    std::deque<std::uint64_t> hot_arrival_;
    std::vector<std::pair<std::uint64_t, PoseState>> index_;
    std::uint64_t hot_budget_bytes_ = kUnlimitedBytes;
    std::uint64_t hot_bytes_ = 0;
    std::uint64_t cold_bytes_ = 0;
    TransferModel transfer_;
};

}  // namespace worldkv
