// Copyright (C) 2026 The worldkv authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "worldkv/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

const char* cli_bin() { return std::getenv("WORLDKV_CLI_BIN"); }

CliResult run_cli(const std::string& args) {
    CliResult result;
    const std::string cmd = std::string(cli_bin()) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[512];
    while (fgets(buf, sizeof(buf), pipe)) {
        result.output += buf;
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Minimal workspace: a pan-loop trajectory plus a config pointing at it.
struct Workspace {
    fs::path dir;

    explicit Workspace(const std::string& name) {
        dir = fs::temp_directory_path() / ("worldkv_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);

        json traj;
        traj["name"] = "pan_loop";
        traj["actions"] = json::array();
        traj["actions"].push_back({{"move", "none"}, {"yaw", 2}, {"repeat", 32}});
        std::ofstream(dir / "trajectory.json") << traj.dump(2);

        json cfg;
        cfg["modes"] = {"world_kv", "sliding_window", "full_kv"};
        cfg["scene"] = {{"seed", 5}, {"grid", {24, 24}}, {"dim", 64}, {"layers", 2}};
        cfg["trajectory"] = "trajectory.json";
        cfg["output_dir"] = (dir / "out").string();
        cfg["attention"] = {{"record", true}, {"temperature", 0.01}, {"layer", 0}};
        write_config(cfg);
    }

    void write_config(const json& cfg) {
        std::ofstream(dir / "config.json") << cfg.dump(2);
    }

    json read_config() {
        std::ifstream is(dir / "config.json");
        return json::parse(is);
    }

    std::string config() const { return (dir / "config.json").string(); }
    fs::path out() const { return dir / "out"; }

    ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("cmd_run writes summary and per-step csv", "[cli]") {
    if (!cli_bin()) {
        WARN("WORLDKV_CLI_BIN not set; skipping CLI subprocess tests");
        return;
    }
    Workspace ws("run");
    const CliResult r = run_cli("run --config " + ws.config());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(ws.out() / "summary.json"));
    REQUIRE(fs::exists(ws.out() / "steps.csv"));
    REQUIRE(fs::exists(ws.out() / "retrieval.csv"));
    REQUIRE(fs::exists(ws.out() / "attention.csv"));

    const std::string steps = slurp(ws.out() / "steps.csv");
    CHECK(steps.rfind("# worldkv-csv v1 steps\n", 0) == 0);

    const json summary = json::parse(slurp(ws.out() / "summary.json"));
    CHECK(summary.at("version") == 1);
    CHECK(summary.at("modes").contains("world_kv"));
    CHECK(summary.at("modes").contains("sliding_window"));
    CHECK(summary.at("modes").contains("full_kv"));
    CHECK(summary.at("aggregate").at("world_kv").at("mean_fidelity").get<double>() > 0.0);
}

TEST_CASE("cmd_run is bitwise reproducible", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("repro");
    REQUIRE(run_cli("run --config " + ws.config()).exit_code == 0);
    const std::string summary1 = slurp(ws.out() / "summary.json");
    const std::string steps1 = slurp(ws.out() / "steps.csv");
    REQUIRE(run_cli("run --config " + ws.config()).exit_code == 0);
    CHECK(slurp(ws.out() / "summary.json") == summary1);
    CHECK(slurp(ws.out() / "steps.csv") == steps1);
}

TEST_CASE("cmd_run fails loudly on a missing trajectory", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("missing");
    json cfg = ws.read_config();
    cfg["trajectory"] = "no_such_file.json";
    ws.write_config(cfg);
    const CliResult r = run_cli("run --config " + ws.config());
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("no_such_file.json") != std::string::npos);
}

TEST_CASE("validate-config accepts good and names bad fields", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("validate");
    CHECK(run_cli("validate-config --config " + ws.config()).exit_code == 0);

    json cfg = ws.read_config();
    cfg["window"] = {{"sink_frames", 3}, {"mystery_field", 1}};
    ws.write_config(cfg);
    const CliResult r = run_cli("validate-config --config " + ws.config());
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("mystery_field") != std::string::npos);
}

TEST_CASE("seed and mode overrides change the run", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("overrides");
    REQUIRE(run_cli("run --config " + ws.config() + " --mode world_kv --seed 9 --out " +
                    (ws.dir / "out9").string())
                .exit_code == 0);
    const json summary = json::parse(slurp(ws.dir / "out9" / "summary.json"));
    CHECK(summary.at("modes").size() == 1);
    CHECK(summary.at("modes").contains("world_kv"));
    CHECK(summary.at("config").at("scene").at("seed") == 9);

    const CliResult bad = run_cli("run --config " + ws.config() + " --mode nonsense");
    CHECK(bad.exit_code != 0);
}

TEST_CASE("ablate intra emits six rows with monotone store bytes", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("ablate");
    const CliResult r = run_cli("ablate --config " + ws.config() + " --axis intra");
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const std::string table = slurp(ws.out() / "ablation_intra.csv");
    CHECK(table.rfind("# worldkv-csv v1 ablation\n", 0) == 0);

    std::vector<std::uint64_t> store_bytes;
    std::istringstream is(table);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("axis,", 0) == 0) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        REQUIRE(fields.size() >= 6);
        store_bytes.push_back(std::stoull(fields[4]));
    }
    REQUIRE(store_bytes.size() == 6);
    // Rows run from anchor-only to no compression: bytes must not decrease,
    // i.e. shrinking retention never costs more storage.
    for (std::size_t i = 1; i < store_bytes.size(); ++i) {
        CHECK(store_bytes[i - 1] <= store_bytes[i]);
    }

    const CliResult bad = run_cli("ablate --config " + ws.config() + " --axis bogus");
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("intra") != std::string::npos);
    CHECK(bad.output.find("inter") != std::string::npos);
}

TEST_CASE("plot-data emits the four kinds", "[cli]") {
    if (!cli_bin()) {
        return;
    }
    Workspace ws("plot");
    REQUIRE(run_cli("run --config " + ws.config()).exit_code == 0);

    SECTION("memory curve grows strictly for full_kv") {
        const CliResult r = run_cli("plot-data --report " + ws.out().string() + " --kind memory_curve");
        REQUIRE(r.exit_code == 0);
        std::istringstream is(r.output);
        std::string line;
        std::vector<std::uint64_t> totals;
        while (std::getline(is, line)) {
            if (line.find(",full_kv,") == std::string::npos) {
                continue;
            }
            const auto last = line.rfind(',');
            totals.push_back(std::stoull(line.substr(last + 1)));
        }
        REQUIRE(totals.size() > 10);
        for (std::size_t i = 1; i < totals.size(); ++i) {
            CHECK(totals[i] > totals[i - 1]);
        }
    }

    SECTION("fps curve settles for world_kv") {
        const CliResult r = run_cli("plot-data --report " + ws.out().string() + " --kind fps_curve");
        REQUIRE(r.exit_code == 0);
        std::istringstream is(r.output);
        std::string line;
        std::vector<std::string> fps;
        while (std::getline(is, line)) {
            if (line.find(",world_kv,") == std::string::npos) {
                continue;
            }
            fps.push_back(line.substr(line.rfind(',') + 1));
        }
        REQUIRE(fps.size() > 12);
        for (std::size_t i = 10; i < fps.size(); ++i) {
            CHECK(fps[i] == fps[9]);  // constant after warmup
        }
    }

    SECTION("attention map rows sum to one") {
        const CliResult r =
            run_cli("plot-data --report " + ws.out().string() + " --kind attention_map --step 20");
        REQUIRE(r.exit_code == 0);
        std::istringstream is(r.output);
        std::string line;
        bool seen_row = false;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("step", 0) == 0) {
                continue;
            }
            double sum = 0.0;
            std::stringstream ss(line);
            std::string f;
            std::getline(ss, f, ',');  // step column
            while (std::getline(ss, f, ',')) {
                sum += std::stod(f);
            }
            CHECK(sum == Catch::Approx(1.0).margin(1e-5));
            seen_row = true;
        }
        CHECK(seen_row);
    }

    SECTION("mask emits grid rows") {
        const CliResult r = run_cli("plot-data --report " + ws.out().string() +
                                    " --kind mask --config " + ws.config() +
                                    " --step 4 --grid-h 8 --grid-w 8 --fraction 0.125");
        CAPTURE(r.output);
        REQUIRE(r.exit_code == 0);
        CHECK(r.output.find("frame,row,col,marked") != std::string::npos);
    }

    SECTION("unknown kind rejected") {
        const CliResult r = run_cli("plot-data --report " + ws.out().string() + " --kind pie");
        CHECK(r.exit_code != 0);
        CHECK(r.output.find("memory_curve") != std::string::npos);
    }
}
