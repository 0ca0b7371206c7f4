// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace worldkv {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

/// Unit quaternion (w, x, y, z). Rotations act on vectors as q v q^-1.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

    static Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
        const double n = axis.norm();
        if (n < 1e-15) {
            throw std::invalid_argument("Quaternion::from_axis_angle: zero axis");
        }
        const double half = 0.5 * angle_rad;
        const double s = std::sin(half) / n;
        return {std::cos(half), axis.x * s, axis.y * s, axis.z * s};
    }

    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Quaternion normalized() const {
        const double n = norm();
        if (n < 1e-15) {
            throw std::invalid_argument("Quaternion::normalized: zero norm");
        }
        return {w / n, x / n, y / n, z / n};
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q^-1 expanded for unit quaternions.
        const Vec3 u{x, y, z};
        const double uv_x = u.y * v.z - u.z * v.y;
        const double uv_y = u.z * v.x - u.x * v.z;
        const double uv_z = u.x * v.y - u.y * v.x;
        const double uuv_x = u.y * uv_z - u.z * uv_y;
        const double uuv_y = u.z * uv_x - u.x * uv_z;
        const double uuv_z = u.x * uv_y - u.y * uv_x;
        return {v.x + 2.0 * (w * uv_x + uuv_x),
                v.y + 2.0 * (w * uv_y + uuv_y),
                v.z + 2.0 * (w * uv_z + uuv_z)};
    }
};

/// Records whether a pose came from an absolute camera track or was
/// accumulated from discrete actions. Both share the same representation.
enum class PoseMode : std::uint8_t { Absolute, Pseudo };

/// Camera state. World axes: +X right, +Y forward, +Z up at the identity
/// orientation. Orientation is maintained as yaw about +Z composed with
/// pitch about the camera-local right axis, which keeps it roll-free.
struct PoseState {
    Vec3 translation{};
    Quaternion rotation = Quaternion::identity();
    PoseMode mode = PoseMode::Pseudo;

    static PoseState identity(PoseMode m = PoseMode::Pseudo) {
        PoseState p;
        p.mode = m;
        return p;
    }

    Vec3 forward() const { return rotation.rotate({0.0, 1.0, 0.0}); }
    Vec3 right() const { return rotation.rotate({1.0, 0.0, 0.0}); }
    Vec3 up() const { return rotation.rotate({0.0, 0.0, 1.0}); }

    /// Heading about +Z. The right axis is unaffected by pitch, so this is
    /// stable at any pitch within the clamp range.
    double yaw() const {
        const Vec3 r = right();
        return std::atan2(r.y, r.x);
    }

    double pitch() const {
        const Vec3 f = forward();
        const double s = std::clamp(f.z, -1.0, 1.0);
        return std::asin(s);
    }
};

enum class Move : std::uint8_t { Forward, Back, StrafeLeft, StrafeRight, None };

struct DiscreteAction {
    Move move = Move::None;
    int yaw_delta = 0;    // positive turns right (clockwise from above)
    int pitch_delta = 0;  // positive looks up
};

struct StepConfig {
    double translation_step = 1.0;
    double yaw_step_rad = kPi / 8.0;
    double pitch_step_rad = kPi / 16.0;
    double pitch_clamp_rad = 1.2;
    int max_step_magnitude = 8;  // bound on |yaw_delta| and |pitch_delta|

    void validate() const {
        if (translation_step <= 0.0 || yaw_step_rad <= 0.0 || pitch_step_rad <= 0.0) {
            throw std::invalid_argument("StepConfig: step sizes must be > 0");
        }
        if (!(pitch_clamp_rad > 0.0 && pitch_clamp_rad <= kPi / 2.0)) {
            throw std::invalid_argument("StepConfig: pitch_clamp_rad must be in (0, pi/2]");
        }
        if (max_step_magnitude < 1) {
            throw std::invalid_argument("StepConfig: max_step_magnitude must be >= 1");
        }
    }
};

namespace detail {

inline Quaternion yaw_pitch_quaternion(double yaw_rad, double pitch_rad) {
    const Quaternion qz = Quaternion::from_axis_angle({0.0, 0.0, 1.0}, yaw_rad);
    const Quaternion qx = Quaternion::from_axis_angle({1.0, 0.0, 0.0}, pitch_rad);
    return (qz * qx).normalized();
}

}  // namespace detail

/// Applies one discrete action: yaw/pitch first, then the translation step
/// along the updated camera axes. Pitch accumulation is clamped; yaw wraps
/// through the quaternion composition.
inline PoseState accumulate_action(const PoseState& state, const DiscreteAction& action,
                                   const StepConfig& cfg) {
    PoseState out = state;

    const double yaw = state.yaw() - static_cast<double>(action.yaw_delta) * cfg.yaw_step_rad;
    double pitch = state.pitch() + static_cast<double>(action.pitch_delta) * cfg.pitch_step_rad;
    pitch = std::clamp(pitch, -cfg.pitch_clamp_rad, cfg.pitch_clamp_rad);
    out.rotation = detail::yaw_pitch_quaternion(yaw, pitch);

    switch (action.move) {
        case Move::Forward:
            out.translation = out.translation + out.forward() * cfg.translation_step;
            break;
        case Move::Back:
            out.translation = out.translation - out.forward() * cfg.translation_step;
            break;
        case Move::StrafeRight:
            out.translation = out.translation + out.right() * cfg.translation_step;
            break;
        case Move::StrafeLeft:
            out.translation = out.translation - out.right() * cfg.translation_step;
            break;
        case Move::None:
            break;
    }
    return out;
}

/// Squared L2 distance between translations.
inline double translation_distance(const PoseState& a, const PoseState& b) {
    const Vec3 d = a.translation - b.translation;
    return d.dot(d);
}

/// Geodesic angle between orientations on SO(3), in [0, pi]. Invariant
/// under quaternion sign flips.
inline double rotation_distance(const PoseState& a, const PoseState& b) {
    const double d = std::clamp(std::abs(a.rotation.dot(b.rotation)), 0.0, 1.0);
    return 2.0 * std::acos(d);
}

/// Absolute heading difference about +Z, wrapped to [0, pi].
inline double yaw_distance(const PoseState& a, const PoseState& b) {
    double d = std::abs(a.yaw() - b.yaw());
    d = std::fmod(d, 2.0 * kPi);
    return d > kPi ? 2.0 * kPi - d : d;
}

/// Min-max normalization over a retrieval candidate set. A constant set maps
/// to all zeros so a lone revisit candidate is never penalized.
inline std::vector<double> normalize_over_candidates(std::span<const double> raw) {
    if (raw.empty()) {
        throw std::invalid_argument("normalize_over_candidates: empty candidate set");
    }
    double lo = raw[0];
    double hi = raw[0];
    for (double v : raw) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("normalize_over_candidates: non-finite value");
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(raw.size(), 0.0);
    const double span = hi - lo;
    if (span > 0.0) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            out[i] = (raw[i] - lo) / span;
        }
    }
    return out;
}

struct DistanceOptions {
    bool yaw_only = false;  // heading-only rotation term instead of the full geodesic
};

/// Per-candidate retrieval distance: normalized squared translation distance
/// plus normalized rotation distance, each normalized across the candidate
/// set. Outputs lie in [0, 2].
inline std::vector<double> combined_distance(const PoseState& query,
                                             std::span<const PoseState> candidates,
                                             const DistanceOptions& opts = {}) {
    if (candidates.empty()) {
        throw std::invalid_argument("combined_distance: empty candidate set");
    }
    std::vector<double> trans(candidates.size());
    std::vector<double> rot(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        trans[i] = translation_distance(query, candidates[i]);
        rot[i] = opts.yaw_only ? yaw_distance(query, candidates[i])
                               : rotation_distance(query, candidates[i]);
    }
    const std::vector<double> nt = normalize_over_candidates(trans);
    const std::vector<double> nr = normalize_over_candidates(rot);
    std::vector<double> out(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out[i] = nt[i] + nr[i];
    }
    return out;
}

/// Wire layout used inside chunk metadata records: 7 little-endian f64.
inline std::array<double, 7> pose_to_array(const PoseState& p) {
    return {p.translation.x, p.translation.y, p.translation.z,
            p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z};
}

inline PoseState pose_from_array(const std::array<double, 7>& a,
                                 PoseMode mode = PoseMode::Absolute) {
    PoseState p;
    p.translation = {a[0], a[1], a[2]};
    p.rotation = Quaternion{a[3], a[4], a[5], a[6]}.normalized();
    p.mode = mode;
    return p;
}

}  // namespace worldkv
