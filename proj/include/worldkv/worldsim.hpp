// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "worldkv/chunk.hpp"
#include "worldkv/geometry.hpp"

namespace worldkv {

namespace rng {

// Self-contained generator so fixture content never depends on the standard
// library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Generator {
public:
    explicit Generator(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    double next_unit() {  // uniform in [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        while (u1 <= 1e-300) {
            u1 = next_unit();
        }
        const double u2 = next_unit();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * kPi * u2);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t hash_doubles(std::uint64_t seed, std::span<const double> values) {
    std::uint64_t h = seed;
    for (double v : values) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h = mix(h, bits);
    }
    return h;
}

}  // namespace rng

struct GridCell {
    std::int32_t x = 0;
    std::int32_t y = 0;
};

struct Frustum {
    double half_angle_rad = 0.63;
    double range = 6.0;

    void validate() const {
        if (!(half_angle_rad > 0.0 && half_angle_rad < kPi) || range <= 0.0) {
            throw std::invalid_argument("Frustum: invalid half angle or range");
        }
    }
};

/// Deterministic synthetic world: a grid of near-orthogonal unit feature
/// embeddings, one per cell. The ground-truth oracle for fidelity metrics.
class Scene {
public:
    Scene(std::uint64_t seed, std::uint32_t grid_h, std::uint32_t grid_w, std::uint32_t dim)
        : seed_(seed), h_(grid_h), w_(grid_w), d_(dim) {
        if (grid_h < 1 || grid_w < 1 || dim < 8) {
            throw std::invalid_argument("Scene: grid must be >= 1x1 and dim >= 8");
        }
        embeddings_.resize(static_cast<std::size_t>(h_) * w_);
        for (std::uint32_t y = 0; y < h_; ++y) {
            for (std::uint32_t x = 0; x < w_; ++x) {
                embeddings_[static_cast<std::size_t>(y) * w_ + x] =
                    make_unit_vector(rng::mix(seed_, (static_cast<std::uint64_t>(y) << 32) | x));
            }
        }
        // Pad embedding for tokens beyond the visible set; outside the grid key space.
        pad_ = make_unit_vector(rng::mix(seed_, 0xFADEFADEFADEFADEull));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint32_t grid_h() const { return h_; }
    std::uint32_t grid_w() const { return w_; }
    std::uint32_t dim() const { return d_; }

    std::span<const float> cell_embedding(std::int32_t x, std::int32_t y) const {
        if (x < 0 || y < 0 || x >= static_cast<std::int32_t>(w_) || y >= static_cast<std::int32_t>(h_)) {
            throw std::out_of_range("Scene::cell_embedding: cell outside grid");
        }
        return embeddings_[static_cast<std::size_t>(y) * w_ + x];
    }

    std::span<const float> pad_embedding() const { return pad_; }

private:
    std::vector<float> make_unit_vector(std::uint64_t seed) const {
        rng::Generator gen(seed);
        std::vector<float> v(d_);
        double norm_sq = 0.0;
        for (float& c : v) {
            const double g = gen.next_gaussian();
            c = static_cast<float>(g);
            norm_sq += g * g;
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(std::max(norm_sq, 1e-30)));
        for (float& c : v) {
            c *= inv;
        }
        return v;
    }

    std::uint64_t seed_;
    std::uint32_t h_, w_, d_;
    std::vector<std::vector<float>> embeddings_;
    std::vector<float> pad_;
};

inline Scene generate_scene(std::uint64_t seed, std::uint32_t grid_h, std::uint32_t grid_w,
                            std::uint32_t dim) {
    return Scene(seed, grid_h, grid_w, dim);
}

/// Cells inside the camera frustum, scanned row-major for determinism. Cells
/// under the camera count as visible regardless of heading.
inline std::vector<GridCell> visible_cells(const Scene& scene, const PoseState& pose,
                                           const Frustum& frustum) {
    frustum.validate();
    const double px = pose.translation.x;
    const double py = pose.translation.y;
    const Vec3 f3 = pose.forward();
    double fx = f3.x;
    double fy = f3.y;
    const double fn = std::sqrt(fx * fx + fy * fy);
    const bool has_heading = fn > 1e-9;
    if (has_heading) {
        fx /= fn;
        fy /= fn;
    }
    const double cos_half = std::cos(frustum.half_angle_rad);

    std::vector<GridCell> cells;
    for (std::uint32_t y = 0; y < scene.grid_h(); ++y) {
        for (std::uint32_t x = 0; x < scene.grid_w(); ++x) {
            const double cx = x + 0.5;
            const double cy = y + 0.5;
            const double dx = cx - px;
            const double dy = cy - py;
            const double dist = std::sqrt(dx * dx + dy * dy);
            if (dist > frustum.range) {
                continue;
            }
            if (dist <= 0.75) {
                cells.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
                continue;
            }
            if (!has_heading) {
                continue;
            }
            const double along = (dx * fx + dy * fy) / dist;
            if (along >= cos_half) {
                cells.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
            }
        }
    }
    return cells;
}

struct ObserveParams {
    std::uint32_t frames = 3;            // F
    std::uint32_t tokens_per_frame = 64; // T
    std::uint32_t layers = 2;
    std::uint32_t dtype_bytes = 2;       // simulated storage precision of produced chunks
    double noise = 0.0;
    Frustum frustum{};
    double drift_yaw_rad = 0.065;   // per-frame heading advance within a chunk
    double drift_translation = 0.0; // per-frame forward advance within a chunk
    double layer_jitter = 0.05;     // content perturbation for layers >= 1

    void validate() const {
        if (frames < 1 || tokens_per_frame < 1 || layers < 1 || dtype_bytes < 1) {
            throw std::invalid_argument("ObserveParams: frames, tokens, layers, dtype must be >= 1");
        }
        if (noise < 0.0 || layer_jitter < 0.0) {
            throw std::invalid_argument("ObserveParams: noise terms must be >= 0");
        }
        frustum.validate();
    }
};

namespace detail {

inline PoseState advance_drift(const PoseState& pose, double yaw_rad, double translation) {
    PoseState out = pose;
    const double yaw = pose.yaw() - yaw_rad;
    out.rotation = worldkv::detail::yaw_pitch_quaternion(yaw, pose.pitch());
    out.translation = out.translation + out.forward() * translation;
    return out;
}

}  // namespace detail

/// Viewpoint-conditioned K/V generation: keys are the embeddings of
/// frustum-visible cells, tiled to T tokens per frame, with per-frame drift
/// so frames 2..F overlap heavily with frame 1. Values carry position tags
/// so mis-retrieval is distinguishable from key collisions.
inline KVChunk observe(const Scene& scene, const PoseState& pose, const ObserveParams& params,
                       std::uint64_t chunk_id = 0) {
    params.validate();
    const std::uint32_t T = params.tokens_per_frame;
    const std::uint32_t F = params.frames;
    const std::uint32_t d = scene.dim();

    KVChunk chunk;
    chunk.chunk_id = chunk_id;
    chunk.pose = pose;
    chunk.frames = F;
    chunk.tokens_per_frame = T;
    chunk.compressed = false;
    chunk.dtype_bytes = params.dtype_bytes;
    chunk.layers.resize(params.layers);
    for (LayerKV& layer : chunk.layers) {
        layer.keys = Matrix(static_cast<std::size_t>(F) * T, d);
        layer.values = Matrix(static_cast<std::size_t>(F) * T, d);
    }

    const std::array<double, 7> pose_bits = pose_to_array(pose);
    const std::uint64_t chunk_seed = rng::hash_doubles(scene.seed(), pose_bits);

    PoseState frame_pose = pose;
    for (std::uint32_t f = 0; f < F; ++f) {
        if (f > 0) {
            frame_pose = detail::advance_drift(frame_pose, params.drift_yaw_rad,
                                               params.drift_translation);
        }
        const std::vector<GridCell> cells = visible_cells(scene, frame_pose, params.frustum);
        if (cells.size() > T) {
            throw std::runtime_error("observe: " + std::to_string(cells.size()) +
                                     " visible features exceed tokens_per_frame " +
                                     std::to_string(T));
        }
        for (std::uint32_t t = 0; t < T; ++t) {
            const bool padded = cells.empty();
            const GridCell cell = padded ? GridCell{-1, -1} : cells[t % cells.size()];
            const std::span<const float> base =
                padded ? scene.pad_embedding() : scene.cell_embedding(cell.x, cell.y);
            for (std::uint32_t l = 0; l < params.layers; ++l) {
                auto key = chunk.layers[l].keys.row(static_cast<std::size_t>(f) * T + t);
                double norm_sq = 0.0;
                rng::Generator jitter(rng::mix(
                    scene.seed(), rng::mix((static_cast<std::uint64_t>(cell.y) << 32) ^
                                               static_cast<std::uint32_t>(cell.x),
                                           l)));
                rng::Generator noise_gen(
                    rng::mix(chunk_seed, (static_cast<std::uint64_t>(f) << 40) ^
                                             (static_cast<std::uint64_t>(t) << 8) ^ l));
                for (std::uint32_t c = 0; c < d; ++c) {
                    double v = base[c];
                    if (l > 0 && params.layer_jitter > 0.0) {
                        v += params.layer_jitter * jitter.next_gaussian();
                    }
                    if (params.noise > 0.0) {
                        v += params.noise * noise_gen.next_gaussian();
                    }
                    key[c] = static_cast<float>(v);
                    norm_sq += v * v;
                }
                const float inv = static_cast<float>(1.0 / std::sqrt(std::max(norm_sq, 1e-30)));
                for (std::uint32_t c = 0; c < d; ++c) {
                    key[c] *= inv;
                }

                auto value = chunk.layers[l].values.row(static_cast<std::size_t>(f) * T + t);
                value[0] = padded ? -1.0f : cell.x + 0.5f;
                value[1] = padded ? -1.0f : cell.y + 0.5f;
                value[2] = static_cast<float>(f);
                value[3] = padded ? 1.0f : 0.0f;
            }
        }
    }
    chunk.validate();
    return chunk;
}

enum class RegionTag : std::uint8_t { Sink = 0, Retrieved = 1, Recent = 2, Denoising = 3 };

/// Flattened attention context: stored K/V rows emitted verbatim, with the
/// source chunk and window region recorded per token.
struct AssembledContext {
    struct Layer {
        Matrix keys;
        Matrix values;
    };
    std::vector<Layer> layers;
    std::vector<std::uint64_t> token_chunk;
    std::vector<RegionTag> token_region;
    std::vector<std::uint64_t> chunk_order;  // distinct source chunks, context order

    std::size_t token_count() const { return token_chunk.size(); }
};

/// Chunk-level attention mass: softmax over all context keys of scaled dot
/// products, averaged over query rows, summed per source chunk and region.
struct AttentionMass {
    std::vector<std::pair<std::uint64_t, double>> per_chunk;  // context order
    std::array<double, 4> per_region{};
};

inline AttentionMass attention_map(const AssembledContext& context, const Matrix& queries,
                                   double temperature, std::uint32_t layer = 0) {
    if (layer >= context.layers.size()) {
        throw std::out_of_range("attention_map: layer out of range");
    }
    if (temperature <= 0.0) {
        throw std::invalid_argument("attention_map: temperature must be > 0");
    }
    const Matrix& keys = context.layers[layer].keys;
    if (queries.cols() != keys.cols()) {
        throw std::invalid_argument("attention_map: query dim " + std::to_string(queries.cols()) +
                                    " != key dim " + std::to_string(keys.cols()));
    }
    if (keys.rows() == 0 || queries.rows() == 0) {
        throw std::invalid_argument("attention_map: empty context or queries");
    }

    std::map<std::uint64_t, double> chunk_mass;
    std::array<double, 4> region_mass{};
    const double scale = 1.0 / (std::sqrt(static_cast<double>(keys.cols())) * temperature);

    std::vector<double> logits(keys.rows());
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            logits[i] = dot(queries.row(q), keys.row(i)) * scale;
            hi = std::max(hi, logits[i]);
        }
        double z = 0.0;
        for (double& v : logits) {
            v = std::exp(v - hi);
            z += v;
        }
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            const double w = logits[i] / (z * static_cast<double>(queries.rows()));
            chunk_mass[context.token_chunk[i]] += w;
            region_mass[static_cast<std::size_t>(context.token_region[i])] += w;
        }
    }

    AttentionMass out;
    out.per_region = region_mass;
    out.per_chunk.reserve(context.chunk_order.size());
    for (std::uint64_t id : context.chunk_order) {
        out.per_chunk.emplace_back(id, chunk_mass.count(id) ? chunk_mass.at(id) : 0.0);
    }
    return out;
}

/// Fraction of ground-truth visible features at `pose` recoverable from the
/// context: a feature counts if some context key matches it with cosine at
/// least `threshold`. An empty visible set is trivially recovered.
inline double revisit_fidelity(const AssembledContext& context, const Scene& scene,
                               const PoseState& pose, const Frustum& frustum,
                               double threshold = 0.8, std::uint32_t layer = 0) {
    const std::vector<GridCell> cells = visible_cells(scene, pose, frustum);
    if (cells.empty()) {
        return 1.0;
    }
    if (context.layers.empty() || context.layers.size() <= layer ||
        context.layers[layer].keys.rows() == 0) {
        return 0.0;
    }
    const Matrix& keys = context.layers[layer].keys;
    std::size_t hit = 0;
    for (const GridCell& cell : cells) {
        const std::span<const float> e = scene.cell_embedding(cell.x, cell.y);
        const double en = vector_norm(e);
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            const auto k = keys.row(i);
            const double kn = vector_norm(k);
            if (kn < 1e-12) {
                continue;
            }
            if (dot(e, k) / (en * kn) >= threshold) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(cells.size());
}

/// Affine attention-cost throughput model.
struct CostModel {
    double per_token_attention_s = 0.0;
    double fixed_step_s = 1.0;
    std::uint32_t tokens_per_frame = 64;
    std::uint32_t frames_per_step = 3;

    void validate() const {
        if (per_token_attention_s < 0.0 || fixed_step_s <= 0.0 || frames_per_step < 1) {
            throw std::invalid_argument("CostModel: invalid parameters");
        }
    }
};

inline double modeled_fps(std::uint64_t context_tokens, const CostModel& cost) {
    return static_cast<double>(cost.frames_per_step) /
           (cost.fixed_step_s + cost.per_token_attention_s * static_cast<double>(context_tokens));
}

/// Solves the two-point affine fit fps(c) = frames / (fixed + per_token * c).
inline CostModel fit_cost_model(std::uint64_t tokens_a, double fps_a, std::uint64_t tokens_b,
                                double fps_b, std::uint32_t frames_per_step,
                                std::uint32_t tokens_per_frame) {
    if (fps_a <= 0.0 || fps_b <= 0.0 || tokens_a == tokens_b) {
        throw std::invalid_argument("fit_cost_model: degenerate operating points");
    }
    const double frames = static_cast<double>(frames_per_step);
    const double pa = frames / fps_a;
    const double pb = frames / fps_b;
    const double per_token = (pb - pa) / (static_cast<double>(tokens_b) - static_cast<double>(tokens_a));
    const double fixed = pa - per_token * static_cast<double>(tokens_a);
    CostModel cost;
    cost.per_token_attention_s = per_token;
    cost.fixed_step_s = fixed;
    cost.frames_per_step = frames_per_step;
    cost.tokens_per_frame = tokens_per_frame;
    cost.validate();
    return cost;
}

/// Reference operating points: 14B-scale streaming generation slows from
/// 8.87 fps on the first chunk to 3.61 fps after a one-minute rollout
/// (16 fps video, 1560 tokens/frame, 3-frame chunks).
inline CostModel default_cost_model() {
    const std::uint64_t early = 3ull * 1560;           // first-chunk context
    const std::uint64_t late = 320ull * 3ull * 1560;   // 320 chunks after one minute
    return fit_cost_model(early, 8.87, late, 3.61, 3, 1560);
}

}  // namespace worldkv
