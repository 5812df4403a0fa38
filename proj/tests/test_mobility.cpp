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

#include "chansound/mobility.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace chansound;
using Catch::Approx;

namespace {

NodeSpec node(int id, std::vector<Vec3> waypoints, double speed, bool loop_back = false)
{
    NodeSpec n;
    n.node_id = id;
    n.kind = speed > 0 ? NodeKind::Obu : NodeKind::Static;
    n.trajectory = {std::move(waypoints), speed, loop_back};
    return n;
}

/// Arc length of the point p along a polyline (p assumed to lie on it).
double arc_position(const std::vector<Vec3>& poly, const Vec3& p)
{
    double acc = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const Vec3 a = poly[i - 1], b = poly[i];
        const double len = norm(b - a);
        const double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y) + (p.z - a.z) * (b.z - a.z)) /
                         (len * len);
        const Vec3 proj = a + std::clamp(t, 0.0, 1.0) * (b - a);
        if (norm(proj - p) < 1e-9)
            return acc + std::clamp(t, 0.0, 1.0) * len;
        acc += len;
    }
    return -1.0;
}

} // namespace

TEST_CASE("25 mph at 0.447 s gives 5 m spacing")
{
    const double v = 25 * 0.44704;
    CHECK(v == Approx(11.176));
    const auto pos = sample_trajectory({{{0, 0, 1.5}, {0, 100, 1.5}}, v, false}, 0.447);
    REQUIRE(pos.size() > 2);
    CHECK(norm(pos[1] - pos[0]) == Approx(5.0).margin(0.01));
}

TEST_CASE("stationary trajectory yields one position")
{
    for (double ts : {0.1, 1.0, 30.0}) {
        const auto pos = sample_trajectory({{{3, 4, 1}, {10, 10, 1}}, 0.0, false}, ts);
        REQUIRE(pos.size() == 1);
        CHECK(pos[0] == Vec3{3, 4, 1});
    }
    CHECK_THROWS_AS(sample_trajectory({{{0, 0, 1}}, 1.0, false}, 0.0), Error);
    CHECK_THROWS_AS(sample_trajectory({{}, 1.0, false}, 1.0), Error);
}

TEST_CASE("straight 100 m segment at 10 m/s and 1 s")
{
    const auto pos = sample_trajectory({{{0, 0, 0}, {100, 0, 0}}, 10.0, false}, 1.0);
    REQUIRE(pos.size() == 11);
    for (std::size_t i = 0; i < pos.size(); ++i)
        CHECK(pos[i].x == Approx(10.0 * static_cast<double>(i)).margin(1e-9));
}

TEST_CASE("arc-length spacing on a polyline with corners")
{
    const std::vector<Vec3> poly{{0, 0, 0}, {7, 0, 0}, {7, 13, 0}, {20, 13, 0}};
    const double spacing = 3.1;
    const auto pos = sample_trajectory({poly, 3.1, false}, 1.0);
    const double total = 7 + 13 + 13;
    CHECK(trajectory_length({poly, 1.0, false}) == Approx(total));
    REQUIRE(pos.size() == static_cast<std::size_t>(std::floor(total / spacing)) + 2);
    for (std::size_t i = 0; i + 1 < pos.size(); ++i) {
        const double gap = arc_position(poly, pos[i + 1]) - arc_position(poly, pos[i]);
        if (i + 2 < pos.size())
            CHECK(gap == Approx(spacing).margin(1e-9));
        else
            CHECK((gap > 0.0 && gap <= spacing + 1e-9));
    }
    CHECK(pos.back() == poly.back());
}

TEST_CASE("num_samples from duration and interval")
{
    CHECK(num_samples(175, 0.447) == static_cast<int>(std::floor(174.0 / 0.447)) + 1);
    CHECK(num_samples(175, 0.447) == 390);
    CHECK(num_samples(1, 0.3) == 1);
    CHECK(num_samples(2, 1) == 2);
    CHECK(num_samples(30, 0.447) == static_cast<int>(std::floor(29.0 / 0.447)) + 1);
    CHECK_THROWS_AS(num_samples(0.5, 1), Error);
    CHECK_THROWS_AS(num_samples(10, 0), Error);
    CHECK_THROWS_AS(num_samples(10, -1), Error);
}

TEST_CASE("out-and-back route of 390 spacings yields 391 samples")
{
    const double v = 25 * 0.44704, ts = 0.447;
    const double one_way = 195.0 * v * ts;
    const auto pos = sample_trajectory({{{0, 0, 1.5}, {0, one_way, 1.5}}, v, true}, ts);
    CHECK(pos.size() == 391);
    CHECK(trajectory_length({{{0, 0, 1.5}, {0, one_way, 1.5}}, v, true}) == Approx(2 * one_way));
}

TEST_CASE("free-space LOS at 100 m")
{
    const NodeSpec a = node(0, {{0, 0, 2}}, 0), b = node(1, {{100, 0, 2}}, 0);
    const auto paths = synthesize_link_paths(a, {0, 0, 2}, b, {100, 0, 2}, {});
    REQUIRE(paths.size() == 1);
    const double f = a.radio.carrier_hz;
    CHECK(free_space_loss_db(100, f) == Approx(oracle::fspl_db(100, f)).margin(1e-12));
    CHECK(free_space_loss_db(100, f) == Approx(87.89).margin(0.01));
    const double gains = a.radio.tx_power_dbm + a.radio.antenna_gain_tx_dbi + b.radio.antenna_gain_rx_dbi;
    CHECK(paths[0].received_power_dbm == Approx(gains - oracle::fspl_db(100, f)).margin(1e-12));
    CHECK(paths[0].toa_s == Approx(100 / oracle::kC).epsilon(1e-14));
    CHECK(paths[0].toa_s == Approx(333.6e-9).margin(0.05e-9));
    const double lambda = oracle::kC / f;
    double want_phase = std::fmod(-2 * oracle::kPi * 100 / lambda, 2 * oracle::kPi);
    if (want_phase < 0)
        want_phase += 2 * oracle::kPi;
    CHECK(paths[0].phase_rad == Approx(want_phase).margin(1e-6));

    const auto far = synthesize_link_paths(a, {0, 0, 2}, b, {200, 0, 2}, {});
    CHECK(paths[0].received_power_dbm - far[0].received_power_dbm == Approx(20 * std::log10(2.0)).margin(1e-12));
    CHECK(far[0].toa_s == Approx(2 * paths[0].toa_s));

    CHECK_THROWS_WITH(synthesize_link_paths(a, {1, 1, 1}, b, {1, 1, 1}, {}),
                      Catch::Matchers::ContainsSubstring("zero-distance link"));
}

TEST_CASE("ground reflection at equal heights")
{
    const NodeSpec a = node(0, {{0, 0, 2}}, 0), b = node(1, {{50, 0, 2}}, 0);
    SceneGeometry g;
    g.reflectors.push_back({Axis::Z, 0.0, 6.0});
    auto paths = synthesize_link_paths(a, {0, 0, 2}, b, {50, 0, 2}, g);
    REQUIRE(paths.size() == 2);
    const auto snap = make_snapshot(0, 1, 1, 1.0, paths);
    CHECK(snap.paths[1].toa_s > snap.paths[0].toa_s);
    const double reflected = std::sqrt(50.0 * 50.0 + 4.0 * 4.0);
    CHECK(snap.paths[1].toa_s == Approx(reflected / oracle::kC).epsilon(1e-12));
    CHECK(snap.paths[0].received_power_dbm - snap.paths[1].received_power_dbm ==
          Approx(oracle::fspl_db(reflected, a.radio.carrier_hz) - oracle::fspl_db(50, a.radio.carrier_hz) + 6.0)
              .margin(1e-9));
}

TEST_CASE("static scene is constant along the sample axis")
{
    std::vector<NodeSpec> nodes{node(0, {{0, 0, 2}}, 0), node(1, {{40, 5, 1.5}}, 0)};
    SceneGeometry g;
    g.reflectors.push_back({Axis::Z, 0.0, 6.0});
    const auto m = build_channel_matrix(nodes, g, 1.0, 10.0);
    REQUIRE(m.n_samples == 10);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int s = 1; s <= 10; ++s) {
                CHECK(m.at(i, j, s).paths == m.at(i, j, 1).paths);
                CHECK(m.at(i, j, s).sample_index == s);
                CHECK(m.at(i, j, s).time_s == static_cast<double>(s - 1) * 1.0);
            }
}

TEST_CASE("matrix dimensions and times")
{
    std::vector<NodeSpec> nodes;
    for (int i = 0; i < 4; ++i)
        nodes.push_back(node(i, {{10.0 * i, 0, 1.5}, {10.0 * i, 50, 1.5}}, i == 0 ? 0.0 : 5.0));
    const auto m = build_channel_matrix(nodes, {}, 0.5, 5.0);
    CHECK(m.n_nodes == 4);
    CHECK(m.n_samples == num_samples(5.0, 0.5));
    CHECK(m.entries.size() == 16u * static_cast<std::size_t>(m.n_samples));
    for (int s = 1; s <= m.n_samples; ++s) {
        CHECK(m.times[static_cast<std::size_t>(s - 1)] == static_cast<double>(s - 1) * 0.5);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                CHECK(m.at(i, j, s).time_s == static_cast<double>(s - 1) * 0.5);
                CHECK(m.at(i, j, s).tx_id == i);
                CHECK(m.at(i, j, s).rx_id == j);
                if (i == j)
                    CHECK(m.at(i, j, s).paths.empty());
            }
    }
    CHECK_THROWS_AS(m.at(4, 0, 1), Error);
    CHECK_THROWS_AS(m.at(0, 0, 0), Error);
}

TEST_CASE("channel matrix clamps exhausted transmitters")
{
    MatrixLayout layout{2, 10, 1.0, {3.0, 0.0}, {5, 1}};
    std::vector<std::pair<int, int>> calls;
    const auto m = assemble_channel_matrix(layout, [&](int tx, int rx, int x, int y) {
        calls.emplace_back(x, y);
        RayPath p;
        p.received_power_dbm = -50.0 - tx - 10.0 * rx - 0.1 * x;
        p.toa_s = 1e-7 * y;
        return std::vector<RayPath>{p};
    });
    for (int s = 6; s <= 10; ++s) {
        CHECK(m.at(0, 1, s).paths == m.at(0, 1, 5).paths);
        CHECK(m.at(0, 1, s).time_s == static_cast<double>(s - 1));
    }
    CHECK(m.at(0, 1, 4).paths != m.at(0, 1, 5).paths);
    // Stationary transmitter reuses sample 1 for every later sample.
    for (int s = 2; s <= 10; ++s)
        CHECK(m.at(1, 0, s).paths == m.at(1, 0, 1).paths);
}

TEST_CASE("channel matrix lookup receives clamped indices")
{
    MatrixLayout layout{2, 8, 1.0, {1.0, 1.0}, {3, 6}};
    std::vector<std::tuple<int, int, int, int>> seen;
    assemble_channel_matrix(layout, [&](int tx, int rx, int x, int y) {
        seen.emplace_back(tx, rx, x, y);
        return std::vector<RayPath>{};
    });
    for (const auto& [tx, rx, x, y] : seen) {
        const int mx = tx == 0 ? 3 : 6, my = rx == 0 ? 3 : 6;
        CHECK(x <= mx);
        CHECK(y <= my);
    }
    CHECK(std::count(seen.begin(), seen.end(), std::make_tuple(0, 1, 3, 6)) == 3); // s = 6, 7, 8
}

TEST_CASE("empty scenario errors")
{
    CHECK_THROWS_AS(build_channel_matrix({}, {}, 1.0, 10.0), Error);
    CHECK_THROWS_AS(assemble_channel_matrix(MatrixLayout{0, 1, 1.0, {}, {}}, nullptr), Error);
}

TEST_CASE("out-and-back LOS delays form a palindrome")
{
    std::vector<NodeSpec> nodes{node(0, {{-5, 50, 4}}, 0), node(1, {{0, 0, 1.5}, {0, 100, 1.5}}, 10.0, true)};
    const auto m = build_channel_matrix(nodes, {}, 1.0, 21.0);
    REQUIRE(m.n_samples == 21);
    for (int s = 1; s <= 21; ++s) {
        const double a = m.at(1, 0, s).paths.front().toa_s;
        const double b = m.at(1, 0, 22 - s).paths.front().toa_s;
        CHECK(a == Approx(b).epsilon(1e-12));
    }
    CHECK(m.at(1, 0, 1).paths.front().toa_s > m.at(1, 0, 6).paths.front().toa_s);
}

TEST_CASE("paths file round-trip and record-keyed assembly")
{
    std::vector<NodeSpec> nodes{node(0, {{0, 0, 3}}, 0), node(1, {{20, 0, 1.5}, {20, 60, 1.5}}, 6.0),
                                node(2, {{30, 10, 1.5}, {30, 70, 1.5}}, 6.0)};
    SceneGeometry g;
    g.reflectors.push_back({Axis::Z, 0.0, 10.0});
    g.reflectors.push_back({Axis::X, 40.0, 15.0});
    const auto m = build_channel_matrix(nodes, g, 0.5, 8.0);

    const auto dir = oracle::temp_dir("paths");
    write_paths_file(m, dir / "paths.jsonl");
    const auto records = read_paths_file(dir / "paths.jsonl", m.sample_interval_s);
    const auto back = assemble_from_records(records, 3, m.n_samples, m.sample_interval_s, {0.0, 6.0, 6.0});
    REQUIRE(back.entries.size() == m.entries.size());
    for (std::size_t k = 0; k < m.entries.size(); ++k) {
        REQUIRE(back.entries[k].paths.size() == m.entries[k].paths.size());
        for (std::size_t p = 0; p < m.entries[k].paths.size(); ++p) {
            const auto& a = m.entries[k].paths[p];
            const auto& b = back.entries[k].paths[p];
            CHECK(a.received_power_dbm == b.received_power_dbm);
            CHECK(a.toa_s == b.toa_s);
            CHECK(a.phase_rad == b.phase_rad);
            CHECK(a.aoa_deg == b.aoa_deg);
        }
    }
    CHECK_THROWS_AS(read_paths_file(dir / "missing.jsonl", 1.0), Error);
    std::filesystem::remove_all(dir);
}
