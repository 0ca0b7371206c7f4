// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used to cross-check the library.
// Everything here deliberately avoids the code paths it verifies.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "worldkv/chunk.hpp"
#include "worldkv/geometry.hpp"

namespace oracles {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 quat_to_matrix(const worldkv::Quaternion& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    return Mat3{{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                 {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                 {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    return c;
}

inline Mat3 transpose(const Mat3& a) {
    Mat3 t{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            t[i][j] = a[j][i];
        }
    }
    return t;
}

/// Geodesic angle between two rotations via the trace of R_a^T R_b.
inline double rotation_distance_matrix(const worldkv::Quaternion& a,
                                       const worldkv::Quaternion& b) {
    const Mat3 r = matmul(transpose(quat_to_matrix(a)), quat_to_matrix(b));
    const double tr = r[0][0] + r[1][1] + r[2][2];
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

inline Mat3 rotation_about_z(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

inline worldkv::Quaternion random_unit_quaternion(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (true) {
        worldkv::Quaternion q{u(rng), u(rng), u(rng), u(rng)};
        const double n = q.norm();
        if (n > 0.1) {
            return {q.w / n, q.x / n, q.y / n, q.z / n};
        }
    }
}

inline worldkv::PoseState random_pose(std::mt19937_64& rng, double extent = 10.0) {
    std::uniform_real_distribution<double> u(-extent, extent);
    worldkv::PoseState p;
    p.translation = {u(rng), u(rng), u(rng)};
    p.rotation = random_unit_quaternion(rng);
    return p;
}

/// Componentwise sum of squares, written without Vec3 helpers.
inline double translation_distance_elementwise(const worldkv::PoseState& a,
                                               const worldkv::PoseState& b) {
    const double dx = a.translation.x - b.translation.x;
    const double dy = a.translation.y - b.translation.y;
    const double dz = a.translation.z - b.translation.z;
    return dx * dx + dy * dy + dz * dz;
}

/// Brute-force mean-cosine redundancy score for one non-anchor token.
inline double redundancy_score_bruteforce(const worldkv::KVChunk& chunk, std::size_t layer,
                                          std::uint32_t frame, std::uint32_t token) {
    const worldkv::Matrix& keys = chunk.layers[layer].keys;
    const std::uint32_t T = chunk.tokens_per_frame;
    const auto kj = keys.row(static_cast<std::size_t>(frame) * T + token);
    double nj = 0.0;
    for (float v : kj) {
        nj += static_cast<double>(v) * v;
    }
    nj = std::sqrt(nj);
    double sum = 0.0;
    for (std::uint32_t i = 0; i < T; ++i) {
        const auto ki = keys.row(i);
        double dot = 0.0;
        double ni = 0.0;
        for (std::size_t c = 0; c < ki.size(); ++c) {
            dot += static_cast<double>(kj[c]) * ki[c];
            ni += static_cast<double>(ki[c]) * ki[c];
        }
        sum += dot / (nj * std::sqrt(ni));
    }
    return sum / T;
}

/// Bottom-r non-anchor selection by exhaustive sort on brute-force scores.
inline std::vector<std::uint32_t> bottom_r_bruteforce(const worldkv::KVChunk& chunk,
                                                      std::size_t layer, std::uint64_t r) {
    const std::uint32_t T = chunk.tokens_per_frame;
    std::vector<std::pair<double, std::uint32_t>> scored;
    for (std::uint32_t f = 1; f < chunk.frames; ++f) {
        for (std::uint32_t j = 0; j < T; ++j) {
            scored.emplace_back(redundancy_score_bruteforce(chunk, layer, f, j),
                                (f - 1) * T + j);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return a.second < b.second;
    });
    std::vector<std::uint32_t> picked;
    for (std::uint64_t i = 0; i < r && i < scored.size(); ++i) {
        picked.push_back(T + scored[i].second);  // global token index
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

/// Full-sort reference for top-k selection over (score, id) pairs.
/// `smallest` picks ascending scores (pose distances), otherwise descending.
inline std::vector<std::uint64_t> top_k_bruteforce(std::vector<std::pair<double, std::uint64_t>> scored,
                                                   std::size_t k, bool smallest) {
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return smallest ? a.first < b.first : a.first > b.first;
        }
        return a.second < b.second;  // older chunk wins ties
    });
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        ids.push_back(scored[i].second);
    }
    return ids;
}

}  // namespace oracles
