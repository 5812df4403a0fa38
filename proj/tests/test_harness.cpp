// SPDX-License-Identifier: Apache-2.0
//
// chansound - channel emulation and sounding toolchain
// Copyright (C) 2026 The chansound authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "chansound/harness.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>

using namespace chansound;
using Catch::Approx;

namespace {

const std::filesystem::path kConfigs = CHANSOUND_CONFIG_DIR;

TapFile one_link(std::vector<Tap> taps, long ms, double grid = 20e-9, int n = 2)
{
    TapFile f;
    f.header = {n, grid, 4, ms, 0.0};
    for (long t = 0; t < ms; ++t)
        f.records.push_back({t, 0, 1, {taps, grid, t}});
    return f;
}

EmulatorConfig quiet(double base = kDefaultBaseLossDb)
{
    EmulatorConfig c;
    c.base_loss_db = base;
    c.noise_floor_db.reset();
    return c;
}

SoundingConfig sounding(double rate = 50e6)
{
    SoundingConfig c;
    c.sample_rate_hz = rate;
    return c;
}

const CodeSequence& code() 
{
    static const auto c = generate_glfsr(8, 0, 1);
    return c;
}

} // namespace

TEST_CASE("noise-free single-tap loop is exact")
{
    const auto taps = one_link({{0, {1, 0}}}, 3);
    const auto r = emulate_and_sound(taps, {0, 1}, code(), quiet(), sounding(), 0.003);
    const auto v = compare_to_ground_truth(r, taps, {0, 1}, kDefaultBaseLossDb, 0.0);
    CHECK(v.pass);
    CHECK(v.frames == r.frames.size());
    CHECK(v.frames > 500);
    CHECK(v.max_abs_delay_error_s == 0.0);
    for (double e : v.gain_errors_db)
        CHECK(std::abs(e) < 1e-6);
    CHECK(v.delay_errors_s.size() == v.gain_errors_db.size());
    CHECK(v.spurious == 0);
    CHECK(v.missed == 0);
}

TEST_CASE("unmatched detection is spurious and fails strict mode")
{
    const auto taps = one_link({{0, {1, 0}}}, 1);
    SoundingReport r;
    r.sample_rate_hz = 50e6;
    r.frame_length = 255;
    FrameTaps f;
    f.frame_index = 1;
    f.start_time_s = 255 / 50e6;
    f.taps = {{0.0, -kDefaultBaseLossDb, 1}, {40 / 50e6, -80.0, 1}};
    r.frames.push_back(f);
    auto v = compare_to_ground_truth(r, taps, {0, 1}, kDefaultBaseLossDb, 0.0);
    CHECK(v.spurious == 1);
    CHECK_FALSE(v.pass);
    ValidationOptions lax;
    lax.strict = false;
    v = compare_to_ground_truth(r, taps, {0, 1}, kDefaultBaseLossDb, 0.0, lax);
    CHECK(v.pass);

    r.frames[0].taps = {{3 / 50e6, -kDefaultBaseLossDb, 1}}; // 3 samples = 60 ns, outside one 20 ns step
    v = compare_to_ground_truth(r, taps, {0, 1}, kDefaultBaseLossDb, 0.0);
    CHECK(v.missed == 1);
    CHECK(v.spurious == 1);
    CHECK_FALSE(v.pass);

    r.frames[0].start_time_s = 1.0; // beyond the tap file
    CHECK_THROWS_AS(compare_to_ground_truth(r, taps, {0, 1}, kDefaultBaseLossDb, 0.0), Error);
}

TEST_CASE("compare is invariant under a shared extra offset")
{
    const std::vector<Tap> t{{0, {0.7, 0.0}}, {64, {0.0, 0.1}}, {100, {-0.17, 0.0}}, {200, {0.3, 0.2}}};
    const auto taps = one_link(t, 4);
    EmulatorConfig emu;
    emu.seed = 3;
    const auto r = emulate_and_sound(taps, {0, 1}, code(), emu, sounding(), 0.004);
    const auto a = compare_to_ground_truth(r, taps, {0, 1}, emu.base_loss_db, 0.0);

    // Same report, offset applied to the file and the correction.
    const auto shifted = apply_offset(taps, 25.0);
    const auto b = compare_to_ground_truth(r, shifted, {0, 1}, emu.base_loss_db + 25.0, 25.0);
    REQUIRE(a.gain_errors_db.size() == b.gain_errors_db.size());
    for (std::size_t i = 0; i < a.gain_errors_db.size(); ++i)
        CHECK(b.gain_errors_db[i] == Approx(a.gain_errors_db[i]).margin(1e-9));

    // Re-emulated with the offset taps (noise-free so only the scale changes).
    const auto q = emulate_and_sound(taps, {0, 1}, code(), quiet(), sounding(), 0.004);
    const auto qs = emulate_and_sound(shifted, {0, 1}, code(), quiet(), sounding(), 0.004);
    const auto c = compare_to_ground_truth(q, taps, {0, 1}, kDefaultBaseLossDb, 0.0);
    const auto d = compare_to_ground_truth(qs, shifted, {0, 1}, kDefaultBaseLossDb, 25.0);
    REQUIRE(c.gain_errors_db.size() == d.gain_errors_db.size());
    for (std::size_t i = 0; i < c.gain_errors_db.size(); ++i) {
        CHECK(d.gain_errors_db[i] == Approx(c.gain_errors_db[i]).margin(1e-9));
        CHECK(d.delay_errors_s[i] == c.delay_errors_s[i]);
    }
    CHECK(c.pass == d.pass);
}

TEST_CASE("validation report statistics")
{
    const auto taps = one_link({{0, {1, 0}}, {10, {0.25, 0}}}, 2);
    EmulatorConfig emu;
    emu.seed = 8;
    const auto r = emulate_and_sound(taps, {0, 1}, code(), emu, sounding(), 0.002);
    const auto v = compare_to_ground_truth(r, taps, {0, 1}, emu.base_loss_db, 0.0);
    REQUIRE(v.taps.size() == 2);
    for (const auto& s : v.taps) {
        CHECK(s.gain_sd_db >= 0.0);
        CHECK(s.gain_error_sd_db >= 0.0);
    }
    CHECK(v.taps[1].gt_delay_s == Approx(200e-9));
    CHECK(v.taps[1].gt_gain_mean_db == Approx(20 * std::log10(0.25)));
    std::size_t detected = 0;
    for (const auto& f : r.frames)
        detected += f.taps.size();
    CHECK(v.gain_errors_db.size() + v.spurious == detected);
    const auto j = to_json(v);
    CHECK(j["taps"].size() == 2);
    CHECK(j["pass"].get<bool>() == v.pass);
}

TEST_CASE("heatmap bounds and exact noise-free cells")
{
    HeatmapConfig h;
    h.n_nodes = 1;
    CHECK_THROWS_AS(pathloss_heatmap(h), Error);

    h.n_nodes = 2;
    h.window_s = 0.05;
    h.emulator = quiet();
    const auto m = pathloss_heatmap(h);
    CHECK(std::isnan(m.at(0, 0)));
    CHECK(std::isnan(m.at(1, 1)));
    CHECK(m.at(0, 1) == Approx(kDefaultBaseLossDb).margin(1e-9));
    CHECK(m.at(1, 0) == Approx(kDefaultBaseLossDb).margin(1e-9));
    CHECK(m.mean_db == Approx(kDefaultBaseLossDb).margin(1e-9));
}

TEST_CASE("reciprocal heatmap is symmetric within 0.2 dB")
{
    HeatmapConfig h;
    h.n_nodes = 4;
    h.window_s = 0.2;
    h.emulator.base_loss_sd_db = 1.23;
    h.emulator.reciprocal_base_loss = true;
    h.emulator.seed = 5;
    const auto m = pathloss_heatmap(h);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            CHECK(std::abs(m.at(i, j) - m.at(j, i)) <= 0.2);
            CHECK(m.at(i, j) == Approx(pair_base_loss_db(h.emulator, i, j)).margin(0.2));
        }
    const auto dir = oracle::temp_dir("heat");
    write_heatmap_csv(m, dir / "h.csv");
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line))
        ++rows;
    CHECK(rows == 5);
    std::filesystem::remove_all(dir);
}

TEST_CASE("series helpers")
{
    CHECK(moving_average({1, 2, 3, 4}, 1) == std::vector<double>{1, 2, 3, 4});
    const auto ma = moving_average({0, 3, 6, 9, 12}, 3);
    REQUIRE(!ma.empty());
    CHECK_THROWS_AS(moving_average({1, 2}, 0), Error);

    CHECK(is_u_shaped({5, 4, 3, 2, 1, 2, 3, 4, 5}, 1));
    CHECK_FALSE(is_u_shaped({1, 2, 3, 4, 5}, 1));
    CHECK_FALSE(is_u_shaped({5, 4, 3, 3, 4, 5}, 1));
    CHECK_FALSE(is_u_shaped({5, 4, 3, 2, 1}, 1));

    std::vector<LossSample> s(3);
    s[0].ground_truth_loss_db = 10;
    s[0].sounded_loss_db = 11;
    s[1].ground_truth_loss_db = 20;
    s[1].sounded_loss_db = 19;
    s[2].ground_truth_loss_db = 30;
    s[2].sounded_loss_db = 30;
    for (auto& x : s)
        x.frames = 1;
    CHECK(series_rmse_db(s) == Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("scenario parsing errors")
{
    CHECK_THROWS_AS(parse_scenario(nlohmann::json::parse(R"({"nodes": []})")), Error);
    CHECK_THROWS_AS(parse_scenario(nlohmann::json::parse(R"({"sample_interval_s": 0, "nodes": [{"waypoints": [[0,0]]}]})")),
                    Error);
    CHECK_THROWS_AS(load_scenario(kConfigs / "does_not_exist.json"), Error);
    const auto c = load_scenario(kConfigs / "outandback.json");
    CHECK(c.node_count() == 3);
    CHECK(c.nodes[1].trajectory.speed_mps == Approx(25 * 0.44704));
    CHECK(c.spatial_warnings().empty());
    auto fast = c;
    fast.nodes[1].trajectory.speed_mps = 40.0;
    CHECK(fast.spatial_warnings().size() == 1);
}

TEST_CASE("sequence spec covers every family")
{
    for (const char* s : {R"({"family": "glfsr", "degree": 8})",
                          R"({"family": "gold", "degree": 8, "poly_a": "0x11D", "poly_b": "0x169", "shift": 3})",
                          R"({"family": "golay_a", "length": 128})", R"({"family": "ls", "order": 7})"}) {
        INFO(s);
        CHECK(make_sequence(parse_sequence_spec(nlohmann::json::parse(s))).length() > 0);
    }
}

TEST_CASE("synthetic four-tap pipeline writes every artifact and passes")
{
    const auto dir = oracle::temp_dir("pipe");
    const auto result = run_scenario_pipeline(kConfigs / "synthetic4tap.json", dir);
    CHECK(result.pass);
    REQUIRE(result.links.size() == 1);
    const auto& v = result.links[0].validation;
    CHECK(v.frames >= 400);
    CHECK(v.max_abs_delay_error_s == 0.0);
    CHECK(v.max_abs_mean_gain_error_db <= 0.5);
    for (const char* f : {"paths.jsonl", "taps.csv", "sequence.txt", "report_0_1.json", "frames_0_1.csv",
                          "validation_0_1.json", "strongest_0_1.csv", "summary.json"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(std::filesystem::exists(dir / "captures" / "rx_0_1.iq"));
    const auto taps = read_tap_file(dir / "taps.csv");
    CHECK(taps.is_complete());
    std::filesystem::remove_all(dir);
}

TEST_CASE("stage failures name the stage")
{
    const auto dir = oracle::temp_dir("stage");
    auto c = load_scenario(kConfigs / "synthetic4tap.json");
    c.sounding.sample_rate_hz = 7e6; // 20 ns grid is not an integer sample count
    c.write_captures = false;
    CHECK_THROWS_WITH(run_scenario_pipeline(c, dir), Catch::Matchers::ContainsSubstring("stage 'emulator' failed"));
    CHECK_THROWS_WITH(run_scenario_pipeline(dir / "nope.json", dir),
                      Catch::Matchers::ContainsSubstring("stage 'config' failed"));
    std::filesystem::remove_all(dir);
}
