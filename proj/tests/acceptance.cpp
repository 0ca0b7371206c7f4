// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "worldkv/cli.hpp"

using namespace worldkv;
namespace fs = std::filesystem;

namespace {

std::string g_cli_bin;

fs::path fixture_dir() { return fs::path(WORLDKV_FIXTURE_DIR); }

struct Check {
    std::string name;
    std::function<bool(std::string&)> run;
};

bool expect(bool cond, const std::string& what, std::string& detail) {
    if (!cond && detail.empty()) {
        detail = what;
    }
    return cond;
}

// Shared acceptance-scale configuration: 24x24 world, 64-dim features,
// 3-frame chunks of 64 tokens, default four-region window.
RolloutParams base_params() {
    RolloutParams params;
    params.window.tokens_per_frame = 64;
    params.observe.tokens_per_frame = 64;
    params.observe.frames = 3;
    params.observe.layers = 2;
    params.cost = default_cost_model();
    params.start_pose.translation = {12, 12, 0};
    return params;
}

double suite_mean_fidelity(const Suite& suite, RolloutMode mode, const RolloutParams& params,
                           std::uint32_t grid = 24, std::uint32_t dim = 64) {
    double sum = 0.0;
    for (const SuiteEntry& entry : suite.entries) {
        const Scene scene = generate_scene(entry.scene_seed, grid, grid, dim);
        RolloutParams p = params;
        p.start_pose = entry.trajectory.start;
        sum += run_rollout(mode, entry.trajectory.actions, scene, p).mean_fidelity;
    }
    return sum / static_cast<double>(suite.entries.size());
}

// ---------------------------------------------------------------------------

bool ac01_compression_token_identity(std::string& detail) {
    std::mt19937_64 rng(101);
    int cases = 0;
    for (std::uint32_t T = 4; T <= 2048; T = (T < 64 ? T + 1 : T + 7)) {
        const std::uint64_t r = retention_count(0.25, 3, T);
        const std::uint64_t want = (2ull * T + 3) / 4;  // ceil(0.25 * 2T) in integers
        if (!expect(r == want, "retention mismatch at T=" + std::to_string(T), detail)) {
            return false;
        }
        ++cases;
    }
    // Construction path: real chunks at sampled sizes carry exactly T + r rows.
    for (int rep = 0; rep < 20; ++rep) {
        const std::uint32_t T = 4 + static_cast<std::uint32_t>(rng() % 253);
        KVChunk chunk;
        chunk.frames = 3;
        chunk.tokens_per_frame = T;
        chunk.layers.resize(1);
        chunk.layers[0].keys = Matrix(3ull * T, 8);
        chunk.layers[0].values = Matrix(3ull * T, 8);
        std::uniform_real_distribution<float> u(-1.0f, 1.0f);
        for (float& v : chunk.layers[0].keys.data()) {
            v = u(rng);
        }
        CompressionConfig cfg;
        cfg.retention_fraction = 0.25;
        const KVChunk packed = compress_chunk(chunk, cfg);
        if (!expect(packed.tokens_per_layer() == T + retention_count(0.25, 3, T),
                    "compressed row count mismatch at T=" + std::to_string(T), detail)) {
            return false;
        }
        ++cases;
    }
    const std::uint64_t at880 = 880 + retention_count(0.25, 3, 880);
    if (!expect(at880 == 1320 && at880 * 2 == 3ull * 880, "T=880 must give 1320 = 1.5T", detail)) {
        return false;
    }
    detail = std::to_string(cases) + " sizes checked; T=880 -> 1320 tokens";
    return true;
}

bool ac02_storage_halving(std::string& detail) {
    const Scene scene = generate_scene(42, 24, 24, 64);
    RolloutParams params = base_params();
    params.compression.retention_fraction = 0.25;
    // N actions leave N-3 chunks in the store (sink, one recent, one in flight).
    const std::vector<DiscreteAction> actions(103, DiscreteAction{Move::None, 2, 0});
    const RolloutReport report = run_rollout(RolloutMode::WorldKV, actions, scene, params);
    if (!expect(report.final_store_chunks == 100, "expected exactly 100 stored chunks", detail)) {
        return false;
    }

    const std::uint32_t T = 64;
    const std::uint64_t r = retention_count(0.25, 3, T);
    const std::uint64_t layers = 2;
    const std::uint64_t dim = 64;
    const std::uint64_t stored_expected = 100 * byte_size_for(layers, T + r, dim, 2);
    const std::uint64_t full_expected = 100 * byte_size_for(layers, 3 * T, dim, 2);
    const std::uint64_t measured = report.final_hot_bytes + report.final_cold_bytes;

    if (!expect(measured == stored_expected, "stored bytes do not match the retention rule", detail)) {
        return false;
    }
    if (!expect(report.stored_bytes_total == stored_expected, "stored-byte accounting drifted", detail)) {
        return false;
    }
    // Payload ratio is exactly one half: (T + T/2) / 3T with T even.
    const std::uint64_t stored_payload = 100 * payload_bytes_for(layers, T + r, dim, 2);
    const std::uint64_t full_payload = 100 * payload_bytes_for(layers, 3 * T, dim, 2);
    if (!expect(stored_payload * 2 == full_payload, "payload ratio is not exactly 0.5", detail)) {
        return false;
    }
    std::ostringstream os;
    os << "stored " << measured << " B vs uncompressed " << full_expected << " B (payload x0.5)";
    detail = os.str();
    return true;
}

bool ac03_topk_oracle_equivalence(std::string& detail) {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<float> uf(-1.0f, 1.0f);

    for (int rep = 0; rep < 500; ++rep) {  // pose strategy
        const std::size_t m = 1 + rng() % 64;
        ChunkStore store;
        std::vector<PoseState> poses;
        for (std::uint64_t id = 0; id < m; ++id) {
            KVChunk chunk;
            chunk.chunk_id = id;
            chunk.pose = oracles::random_pose(rng);
            chunk.frames = 1;
            chunk.tokens_per_frame = 1;
            chunk.layers.resize(1);
            chunk.layers[0].keys = Matrix(1, 8);
            chunk.layers[0].values = Matrix(1, 8);
            chunk.layers[0].keys.at(0, 0) = 1.0f;
            poses.push_back(chunk.pose);
            store.put(std::move(chunk));
        }
        const PoseState query = oracles::random_pose(rng);
        const std::size_t k = 1 + rng() % m;
        const RetrievalResult got = retrieve_pose(store, query, k);
        const auto dists = combined_distance(query, poses);
        std::vector<std::pair<double, std::uint64_t>> scored;
        for (std::uint64_t id = 0; id < m; ++id) {
            scored.emplace_back(dists[id], id);
        }
        if (!expect(got.chunk_ids == oracles::top_k_bruteforce(scored, k, true),
                    "pose top-k diverged from the oracle at rep " + std::to_string(rep), detail)) {
            return false;
        }
    }

    for (int rep = 0; rep < 500; ++rep) {  // query strategy
        const std::size_t m = 1 + rng() % 64;
        ChunkStore store;
        std::vector<KVChunk> kept;
        for (std::uint64_t id = 0; id < m; ++id) {
            KVChunk chunk;
            chunk.chunk_id = id;
            chunk.frames = 1;
            chunk.tokens_per_frame = 3;
            chunk.layers.resize(1);
            chunk.layers[0].keys = Matrix(3, 8);
            chunk.layers[0].values = Matrix(3, 8);
            for (float& v : chunk.layers[0].keys.data()) {
                v = uf(rng);
            }
            kept.push_back(chunk);
            store.put(std::move(chunk));
        }
        Matrix queries(2, 8);
        for (float& v : queries.data()) {
            v = uf(rng);
        }
        const std::size_t k = 1 + rng() % m;
        const RetrievalResult got = retrieve_query(store, queries, k);
        std::vector<std::pair<double, std::uint64_t>> scored;
        for (const KVChunk& chunk : kept) {
            scored.emplace_back(query_chunk_score(queries, chunk, 0), chunk.chunk_id);
        }
        if (!expect(got.chunk_ids == oracles::top_k_bruteforce(scored, k, false),
                    "query top-k diverged from the oracle at rep " + std::to_string(rep), detail)) {
            return false;
        }
    }
    detail = "1000 fuzzed instances, both strategies, exact id-sequence match";
    return true;
}

bool ac04_bounded_context_and_throughput(std::string& detail) {
    const Scene scene = generate_scene(7, 24, 24, 64);
    RolloutParams params = base_params();
    const std::vector<DiscreteAction> actions(120, DiscreteAction{Move::None, 2, 0});
    const std::uint64_t T = 64;

    const RolloutReport world = run_rollout(RolloutMode::WorldKV, actions, scene, params);
    const RolloutReport full = run_rollout(RolloutMode::FullKV, actions, scene, params);

    for (std::size_t i = 0; i < world.steps.size(); ++i) {
        if (!expect(world.steps[i].context_tokens <= 18 * T,
                    "retrieval-mode context exceeded 18T at step " + std::to_string(i), detail)) {
            return false;
        }
    }
    const std::uint64_t steady = world.steps[12].context_tokens;
    for (std::size_t i = 12; i < world.steps.size(); ++i) {
        if (!expect(world.steps[i].context_tokens == steady, "context not constant after warmup",
                    detail) ||
            !expect(world.steps[i].modeled_fps == world.steps[12].modeled_fps,
                    "fps not constant after warmup", detail)) {
            return false;
        }
    }
    for (std::size_t i = 1; i < full.steps.size(); ++i) {
        if (!expect(full.steps[i].context_tokens > full.steps[i - 1].context_tokens,
                    "full-KV context must strictly grow", detail) ||
            !expect(full.steps[i].modeled_fps < full.steps[i - 1].modeled_fps,
                    "full-KV fps must strictly decay", detail)) {
            return false;
        }
    }

    const CostModel fitted = default_cost_model();
    const double early = modeled_fps(3 * 1560, fitted);
    const double late = modeled_fps(320ull * 3 * 1560, fitted);
    if (!expect(std::abs(early - 8.87) / 8.87 < 0.05, "early operating point off by >5%", detail) ||
        !expect(std::abs(late - 3.61) / 3.61 < 0.05, "late operating point off by >5%", detail)) {
        return false;
    }
    std::ostringstream os;
    os << "steady context " << steady << " tokens; fit endpoints " << early << " / " << late
       << " fps";
    detail = os.str();
    return true;
}

bool ac05_attention_view_correspondence(std::string& detail) {
    const Trajectory traj = load_trajectory(fixture_dir() / "trajectories" / "pan_return.json");
    const Scene scene = generate_scene(5, 24, 24, 64);
    RolloutParams params = base_params();
    params.start_pose = traj.start;
    params.record_attention = true;

    const RolloutReport report = run_rollout(RolloutMode::FullKV, traj.actions, scene, params);
    // Steps generate chunks C1..C10; the pan returns to the start heading at
    // the second stop, the step generating C9.
    const StepStats& second_stop = report.steps[9];
    if (!expect(!second_stop.attention.empty(), "attention row missing", detail)) {
        return false;
    }
    std::uint64_t argmax = 0;
    double best = -1.0;
    for (const auto& [id, mass] : second_stop.attention) {
        if (mass > best) {
            best = mass;
            argmax = id;
        }
    }
    if (!expect(argmax == 0, "attention argmax at the revisit is chunk " + std::to_string(argmax) +
                                 ", want the start chunk",
                detail)) {
        return false;
    }

    // While the pan sweeps back toward the start heading (the second half of
    // the leftward sweep), early-view chunks outweigh the turn-apex chunks.
    double mass_c0_c2 = 0.0;
    double mass_c3_c4 = 0.0;
    for (std::size_t step : {7, 8}) {
        for (const auto& [id, mass] : report.steps[step].attention) {
            if (id <= 2) {
                mass_c0_c2 += mass;
            } else if (id <= 4) {
                mass_c3_c4 += mass;
            }
        }
    }
    if (!expect(mass_c0_c2 > mass_c3_c4, "early-view mass does not dominate the sweep back",
                detail)) {
        return false;
    }
    std::ostringstream os;
    os << "argmax=C0 (mass " << best << "); sweep-back mass C0-C2 " << mass_c0_c2 << " vs C3-C4 "
       << mass_c3_c4;
    detail = os.str();
    return true;
}

bool ac06_revisit_fidelity_ordering(std::string& detail) {
    const Suite suite = load_suite(fixture_dir() / "suites" / "loop_closure.json");
    RolloutParams params = base_params();
    const double world = suite_mean_fidelity(suite, RolloutMode::WorldKV, params);
    const double sliding = suite_mean_fidelity(suite, RolloutMode::SlidingWindow, params);
    std::ostringstream os;
    os << "retrieval " << world << " vs sliding " << sliding;
    detail = os.str();
    return expect(world >= sliding + 0.3, "fidelity gap below 0.3 (" + os.str() + ")", detail) &&
           expect(world >= 0.9, "retrieval-mode fidelity below 0.9 (" + os.str() + ")", detail);
}

bool ac07_compression_trend_reproduction(std::string& detail) {
    const Suite suite = load_suite(fixture_dir() / "suites" / "long_revisit.json");
    RolloutParams params = base_params();
    params.observe.drift_yaw_rad = 0.157;  // frames fill the inter-anchor gaps

    auto run_point = [&](bool compress, double retention, std::uint32_t k) {
        RolloutParams p = params;
        p.compression.enabled = compress;
        if (compress) {
            p.compression.retention_fraction = retention;
        }
        p.retrieval_k = k;
        return suite_mean_fidelity(suite, RolloutMode::WorldKV, p);
    };

    const std::uint32_t T = 64;
    // Inter-chunk points: n chunks into the three-uncompressed-chunk budget.
    const double fid_3to3 = run_point(false, 1.0, 0);
    const double fid_6to3 = run_point(true, 0.25, 0);
    const double fid_9to3 = run_point(true, 1.0 / (2.0 * T), 0);
    // Intra-chunk points at the frame-equivalent targets.
    const double fid_anchor_only = run_point(true, 1.0 / (2.0 * T), 0);
    const double fid_half = fid_6to3;  // 3->1.5 is the quarter-retention point

    std::ostringstream os;
    os << "3->3 " << fid_3to3 << ", 6->3 " << fid_6to3 << ", 9->3 " << fid_9to3 << ", 3->1.0 "
       << fid_anchor_only;
    detail = os.str();

    return expect(fid_6to3 > fid_3to3, "6->3 must beat 3->3 (" + os.str() + ")", detail) &&
           expect(fid_6to3 > fid_9to3, "6->3 must beat 9->3 (" + os.str() + ")", detail) &&
           expect(fid_anchor_only < fid_half, "anchor-only must trail 3->1.5 (" + os.str() + ")",
                  detail) &&
           expect(std::abs(fid_half - fid_3to3) <= 0.05,
                  "3->1.5 must sit within 0.05 of 3->3 (" + os.str() + ")", detail);
}

bool ac08_retrieval_budget_trend(std::string& detail) {
    const Suite suite = load_suite(fixture_dir() / "suites" / "loop_closure.json");
    RolloutParams params = base_params();

    // One recall-threshold noise band: the fidelity quantum of one feature at
    // a typical viewpoint of this suite.
    const Scene probe = generate_scene(suite.entries.front().scene_seed, 24, 24, 64);
    const std::size_t visible =
        visible_cells(probe, suite.entries.front().trajectory.start, params.observe.frustum).size();
    const double band = visible > 0 ? 1.0 / static_cast<double>(visible) : 0.05;

    double prev = -1.0;
    std::ostringstream os;
    for (std::uint32_t k = 1; k <= 6; ++k) {
        RolloutParams p = params;
        p.retrieval_k = k;
        const double fid = suite_mean_fidelity(suite, RolloutMode::WorldKV, p);
        os << "k=" << k << ":" << fid << " ";
        if (prev >= 0.0 && !expect(fid >= prev - band,
                                   "fidelity dropped beyond one threshold band at k=" +
                                       std::to_string(k) + " (" + os.str() + ")",
                                   detail)) {
            return false;
        }
        prev = fid;
    }
    detail = os.str();
    return true;
}

bool ac09_offload_cost_model(std::string& detail) {
    const Scene scene = generate_scene(11, 24, 24, 64);
    RolloutParams params = base_params();
    params.transfer = TransferModel{1e-9, 1e-4};
    const std::vector<DiscreteAction> actions(40, DiscreteAction{Move::None, 2, 0});

    // Everything cold: each step pays exactly k transfers of one chunk payload.
    params.hot_budget_bytes = 0;
    const RolloutReport cold = run_rollout(RolloutMode::WorldKV, actions, scene, params);
    const std::uint64_t chunk_payload =
        payload_bytes_for(2, params.stored_chunk_tokens(), 64, 2);
    const double per_fetch = params.transfer.fixed_latency +
                             params.transfer.latency_per_byte * static_cast<double>(chunk_payload);
    const std::uint32_t k = params.effective_k();
    // Replay the per-fetch accumulation so the equality is bit-exact.
    double want = 0.0;
    for (std::uint32_t j = 0; j < k; ++j) {
        want += per_fetch;
    }
    for (std::size_t i = 12; i < cold.steps.size(); ++i) {
        if (!expect(cold.steps[i].transfer_seconds == want,
                    "cold-tier step cost mismatch at step " + std::to_string(i), detail)) {
            return false;
        }
        if (!expect(cold.steps[i].hot_bytes == 0, "hot tier must stay empty at budget 0", detail)) {
            return false;
        }
    }

    // Unlimited budget: every chunk stays hot, transfers never happen.
    params.hot_budget_bytes = kUnlimitedBytes;
    const RolloutReport hot = run_rollout(RolloutMode::WorldKV, actions, scene, params);
    for (const StepStats& s : hot.steps) {
        if (!expect(s.transfer_seconds == 0.0, "unexpected transfer with an unlimited hot tier",
                    detail) ||
            !expect(s.cold_bytes == 0, "cold tier must stay empty with an unlimited budget",
                    detail)) {
            return false;
        }
    }
    std::ostringstream os;
    os << "cold step cost = " << k << " x " << per_fetch << " s; hot runs transfer-free";
    detail = os.str();
    return true;
}

bool ac10_end_to_end_determinism(std::string& detail) {
    if (g_cli_bin.empty()) {
        detail = "cli binary path missing (pass as argv[1])";
        return false;
    }
    const fs::path dir = fs::temp_directory_path() / "worldkv_acceptance_run";
    fs::remove_all(dir);
    fs::create_directories(dir);

    nlohmann::json cfg;
    cfg["modes"] = {"world_kv", "sliding_window", "full_kv"};
    cfg["scene"] = {{"seed", 3}, {"grid", {24, 24}}, {"dim", 64}, {"layers", 2}};
    cfg["trajectory"] = (fixture_dir() / "trajectories" / "loop_pan675_0.json").string();
    cfg["output_dir"] = (dir / "out").string();
    std::ofstream(dir / "config.json") << cfg.dump(2);

    auto run_once = [&]() {
        const std::string cmd =
            g_cli_bin + " run --config " + (dir / "config.json").string() + " >/dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };

    if (!expect(run_once() == 0, "first cmd_run failed", detail)) {
        return false;
    }
    const std::string summary1 = slurp(dir / "out" / "summary.json");
    const std::string steps1 = slurp(dir / "out" / "steps.csv");
    if (!expect(!summary1.empty() && !steps1.empty(), "run produced empty outputs", detail)) {
        return false;
    }
    if (!expect(run_once() == 0, "second cmd_run failed", detail)) {
        return false;
    }
    const bool same = slurp(dir / "out" / "summary.json") == summary1 &&
                      slurp(dir / "out" / "steps.csv") == steps1;
    fs::remove_all(dir);
    if (!expect(same, "outputs differ across reruns", detail)) {
        return false;
    }
    detail = "summary.json and steps.csv byte-identical across reruns";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) {
        g_cli_bin = argv[1];
    }
    const std::vector<Check> checks{
        {"AC-01 compression token identity", ac01_compression_token_identity},
        {"AC-02 2x storage efficiency", ac02_storage_halving},
        {"AC-03 top-k oracle equivalence", ac03_topk_oracle_equivalence},
        {"AC-04 bounded context / stable throughput", ac04_bounded_context_and_throughput},
        {"AC-05 attention view correspondence", ac05_attention_view_correspondence},
        {"AC-06 revisit fidelity ordering", ac06_revisit_fidelity_ordering},
        {"AC-07 compression trend reproduction", ac07_compression_trend_reproduction},
        {"AC-08 retrieval budget trend", ac08_retrieval_budget_trend},
        {"AC-09 offload cost model", ac09_offload_cost_model},
        {"AC-10 end-to-end determinism", ac10_end_to_end_determinism},
    };

    int failures = 0;
    for (const Check& check : checks) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = check.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", check.name.c_str(), seconds,
                    detail.empty() ? "" : " — ", detail.c_str());
        std::fflush(stdout);
        if (!ok) {
            ++failures;
        }
    }
    if (failures) {
        std::printf("%d of %zu criteria failed\n", failures, checks.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", checks.size());
    return 0;
}
