// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "worldkv/geometry.hpp"

namespace worldkv {

struct Trajectory {
    std::string name;
    PoseState start = PoseState::identity(PoseMode::Pseudo);
    std::vector<DiscreteAction> actions;
};

namespace detail {

inline Move move_from_name(const std::string& name) {
    if (name == "forward") return Move::Forward;
    if (name == "back") return Move::Back;
    if (name == "strafe_left") return Move::StrafeLeft;
    if (name == "strafe_right") return Move::StrafeRight;
    if (name == "none") return Move::None;
    throw std::invalid_argument("trajectory: unknown move '" + name +
                                "' (valid: forward, back, strafe_left, strafe_right, none)");
}

inline std::string move_name(Move move) {
    switch (move) {
        case Move::Forward: return "forward";
        case Move::Back: return "back";
        case Move::StrafeLeft: return "strafe_left";
        case Move::StrafeRight: return "strafe_right";
        case Move::None: return "none";
    }
    throw std::invalid_argument("trajectory: invalid move enum");
}

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
        }
    }
}

}  // namespace detail

inline Trajectory trajectory_from_json(const nlohmann::json& j, const std::string& where,
                                       const StepConfig& limits = {}) {
    detail::check_keys(j, {"name", "start", "actions"}, where);
    Trajectory traj;
    traj.name = j.value("name", "");
    if (j.contains("start")) {
        const auto& s = j.at("start");
        detail::check_keys(s, {"tx", "ty", "tz", "qw", "qx", "qy", "qz"}, where + ".start");
        traj.start = pose_from_array({s.value("tx", 0.0), s.value("ty", 0.0), s.value("tz", 0.0),
                                      s.value("qw", 1.0), s.value("qx", 0.0), s.value("qy", 0.0),
                                      s.value("qz", 0.0)},
                                     PoseMode::Pseudo);
    }
    if (!j.contains("actions") || !j.at("actions").is_array() || j.at("actions").empty()) {
        throw std::invalid_argument(where + ": 'actions' must be a non-empty array");
    }
    for (const auto& a : j.at("actions")) {
        detail::check_keys(a, {"move", "yaw", "pitch", "repeat"}, where + ".actions");
        DiscreteAction action;
        action.move = detail::move_from_name(a.value("move", "none"));
        action.yaw_delta = a.value("yaw", 0);
        action.pitch_delta = a.value("pitch", 0);
        if (std::abs(action.yaw_delta) > limits.max_step_magnitude ||
            std::abs(action.pitch_delta) > limits.max_step_magnitude) {
            throw std::invalid_argument(where + ": action step count exceeds limit " +
                                        std::to_string(limits.max_step_magnitude));
        }
        const int repeat = a.value("repeat", 1);
        if (repeat < 1) {
            throw std::invalid_argument(where + ": repeat must be >= 1");
        }
        for (int r = 0; r < repeat; ++r) {
            traj.actions.push_back(action);
        }
    }
    return traj;
}

inline nlohmann::json trajectory_to_json(const Trajectory& traj) {
    nlohmann::json j;
    j["name"] = traj.name;
    const auto start = pose_to_array(traj.start);
    j["start"] = {{"tx", start[0]}, {"ty", start[1]}, {"tz", start[2]}, {"qw", start[3]},
                  {"qx", start[4]}, {"qy", start[5]}, {"qz", start[6]}};
    j["actions"] = nlohmann::json::array();
    for (const DiscreteAction& a : traj.actions) {
        j["actions"].push_back(
            {{"move", detail::move_name(a.move)}, {"yaw", a.yaw_delta}, {"pitch", a.pitch_delta}});
    }
    return j;
}

inline Trajectory load_trajectory(const std::filesystem::path& path,
                                  const StepConfig& limits = {}) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("load_trajectory: cannot open " + path.string());
    }
    return trajectory_from_json(nlohmann::json::parse(is), path.filename().string(), limits);
}

inline void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("save_trajectory: cannot open " + path.string());
    }
    os << trajectory_to_json(traj).dump(2) << "\n";
}

/// A suite pairs seeded scenes with trajectories; rollout metrics aggregate
/// over its entries.
struct SuiteEntry {
    std::uint64_t scene_seed = 0;
    Trajectory trajectory;
};

struct Suite {
    std::string name;
    std::vector<SuiteEntry> entries;
};

inline bool is_suite_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("is_suite_file: cannot open " + path.string());
    }
    const nlohmann::json j = nlohmann::json::parse(is);
    return j.contains("trajectories");
}

inline Suite load_suite(const std::filesystem::path& path, const StepConfig& limits = {}) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("load_suite: cannot open " + path.string());
    }
    const nlohmann::json j = nlohmann::json::parse(is);
    detail::check_keys(j, {"name", "trajectories"}, path.filename().string());
    Suite suite;
    suite.name = j.value("name", "");
    if (!j.contains("trajectories") || j.at("trajectories").empty()) {
        throw std::invalid_argument(path.string() + ": 'trajectories' must be a non-empty array");
    }
    for (const auto& entry : j.at("trajectories")) {
        detail::check_keys(entry, {"scene_seed", "path"}, path.filename().string() + ".trajectories");
        SuiteEntry e;
        e.scene_seed = entry.at("scene_seed").get<std::uint64_t>();
        const std::filesystem::path traj_path = entry.at("path").get<std::string>();
        e.trajectory = load_trajectory(
            traj_path.is_absolute() ? traj_path : path.parent_path() / traj_path, limits);
        suite.entries.push_back(std::move(e));
    }
    return suite;
}

/// Loads either a single trajectory (as a one-entry suite with the given
/// default seed) or a suite manifest.
inline Suite load_suite_or_trajectory(const std::filesystem::path& path,
                                      std::uint64_t default_seed, const StepConfig& limits = {}) {
    if (is_suite_file(path)) {
        return load_suite(path, limits);
    }
    Suite suite;
    Trajectory traj = load_trajectory(path, limits);
    suite.name = traj.name;
    suite.entries.push_back({default_seed, std::move(traj)});
    return suite;
}

}  // namespace worldkv
