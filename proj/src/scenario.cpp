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

#include "chansound/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace chansound {

namespace {

using nlohmann::json;

std::uint64_t parse_bits(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        std::size_t used = 0;
        const auto v = std::stoull(s, &used, 0);
        if (used != s.size())
            throw Error("bad bit pattern '" + s + "'");
        return v;
    }
    return j.get<std::uint64_t>();
}

LinkId parse_link(const json& j)
{
    if (j.is_array() && j.size() == 2)
        return {j[0].get<int>(), j[1].get<int>()};
    if (j.is_object())
        return {j.at("tx").get<int>(), j.at("rx").get<int>()};
    throw Error("link must be [tx, rx] or {\"tx\":..,\"rx\":..}");
}

std::vector<LinkId> parse_links(const json& j)
{
    std::vector<LinkId> out;
    for (const auto& l : j)
        out.push_back(parse_link(l));
    return out;
}

RadioParams parse_radio(const json& j, RadioParams r)
{
    r.tx_power_dbm = j.value("tx_power_dbm", r.tx_power_dbm);
    r.antenna_gain_tx_dbi = j.value("antenna_gain_tx_dbi", r.antenna_gain_tx_dbi);
    r.antenna_gain_rx_dbi = j.value("antenna_gain_rx_dbi", r.antenna_gain_rx_dbi);
    r.carrier_hz = j.value("carrier_hz", r.carrier_hz);
    r.bandwidth_hz = j.value("bandwidth_hz", r.bandwidth_hz);
    r.noise_density_dbm_hz = j.value("noise_density_dbm_hz", r.noise_density_dbm_hz);
    r.noise_figure_db = j.value("noise_figure_db", r.noise_figure_db);
    if (!(r.bandwidth_hz > 0.0))
        throw Error("bandwidth_hz must be positive");
    return r;
}

Axis parse_axis(const std::string& s)
{
    if (s == "x" || s == "X")
        return Axis::X;
    if (s == "y" || s == "Y")
        return Axis::Y;
    if (s == "z" || s == "Z")
        return Axis::Z;
    throw Error("unknown reflector axis '" + s + "'");
}

NodeKind parse_kind(const std::string& s)
{
    if (s == "rsu" || s == "RSU")
        return NodeKind::Rsu;
    if (s == "obu" || s == "OBU")
        return NodeKind::Obu;
    if (s == "static" || s == "STATIC")
        return NodeKind::Static;
    throw Error("unknown node kind '" + s + "'");
}

RayPath parse_path(const json& j)
{
    RayPath p;
    p.received_power_dbm = j.at("p_rx_dbm").get<double>();
    p.phase_rad = wrap_phase(j.value("phase_rad", 0.0));
    p.toa_s = j.at("toa_s").get<double>();
    if (j.contains("aoa_deg"))
        p.aoa_deg = j["aoa_deg"].get<double>();
    if (j.contains("aod_deg"))
        p.aod_deg = j["aod_deg"].get<double>();
    if (p.toa_s < 0.0)
        throw Error("negative toa_s in path list");
    return p;
}

NodeSpec parse_node(const json& j, const RadioParams& radio)
{
    NodeSpec n;
    n.node_id = j.at("id").get<int>();
    n.kind = parse_kind(j.value("kind", std::string("static")));
    n.antenna_height_m = j.value("antenna_height_m", 1.5);
    if (!(n.antenna_height_m > 0.0))
        throw Error("node " + std::to_string(n.node_id) + ": antenna_height_m must be positive");
    for (const auto& w : j.at("waypoints")) {
        if (w.size() == 2)
            n.trajectory.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), n.antenna_height_m});
        else if (w.size() == 3)
            n.trajectory.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
        else
            throw Error("node " + std::to_string(n.node_id) + ": waypoint must have 2 or 3 coordinates");
    }
    if (n.trajectory.waypoints.empty())
        throw Error("node " + std::to_string(n.node_id) + ": at least one waypoint is required");
    if (j.contains("speed_mph"))
        n.trajectory.speed_mps = j["speed_mph"].get<double>() * kMphToMps;
    else
        n.trajectory.speed_mps = j.value("speed_mps", 0.0);
    if (n.trajectory.speed_mps < 0.0)
        throw Error("node " + std::to_string(n.node_id) + ": negative speed");
    n.trajectory.loop_back = j.value("loop_back", false);
    n.radio = j.contains("radio") ? parse_radio(j["radio"], radio) : radio;
    return n;
}

} // namespace

CodeSequence make_sequence(const SequenceSpec& s)
{
    switch (s.family) {
    case SequenceFamily::Glfsr:
        return generate_glfsr(s.degree, s.mask, s.seed);
    case SequenceFamily::Gold:
        return generate_gold(s.degree, s.poly_a, s.poly_b, s.shift);
    case SequenceFamily::GolayA:
        return generate_golay_a(s.length);
    case SequenceFamily::Ls:
        return generate_ls(s.order, s.ifw);
    }
    throw Error("unknown sequence family");
}

SequenceSpec parse_sequence_spec(const json& j)
{
    SequenceSpec s;
    s.family = parse_family(j.value("family", std::string("glfsr")));
    s.degree = j.value("degree", s.degree);
    if (j.contains("mask"))
        s.mask = static_cast<std::uint32_t>(parse_bits(j["mask"]));
    s.seed = j.value("seed", s.seed);
    if (j.contains("poly_a"))
        s.poly_a = parse_bits(j["poly_a"]);
    if (j.contains("poly_b"))
        s.poly_b = parse_bits(j["poly_b"]);
    s.shift = j.value("shift", s.shift);
    s.length = j.value("length", s.length);
    s.order = j.value("order", s.order);
    s.ifw = j.value("ifw", s.ifw);
    return s;
}

EmulatorConfig parse_emulator_config(const json& e, EmulatorConfig c)
{
    c.base_loss_db = e.value("base_loss_db", c.base_loss_db);
    c.base_loss_sd_db = e.value("base_loss_sd_db", c.base_loss_sd_db);
    c.reciprocal_base_loss = e.value("reciprocal_base_loss", c.reciprocal_base_loss);
    if (e.contains("noise_floor_db")) {
        if (e["noise_floor_db"].is_null())
            c.noise_floor_db.reset();
        else
            c.noise_floor_db = e["noise_floor_db"].get<double>();
    }
    c.noise_reference_length = e.value("noise_reference_length", c.noise_reference_length);
    c.tap_update_interval_s = e.value("tap_update_interval_s", c.tap_update_interval_s);
    c.seed = e.value("seed", c.seed);
    if (c.base_loss_sd_db < 0.0)
        throw Error("base_loss_sd_db must be >= 0");
    return c;
}

SoundingConfig parse_sounding_config(const json& s, SoundingConfig c)
{
    c.p_t_db = s.value("p_t_db", c.p_t_db);
    c.g_t_db = s.value("g_t_db", c.g_t_db);
    c.g_r_db = s.value("g_r_db", c.g_r_db);
    c.sample_rate_hz = s.value("sample_rate_hz", c.sample_rate_hz);
    c.detection_threshold_db = s.value("detection_threshold_db", c.detection_threshold_db);
    c.guard = s.value("guard", c.guard);
    c.chunk_duration_s = s.value("chunk_duration_s", c.chunk_duration_s);
    c.samples_per_chip = s.value("samples_per_chip", c.samples_per_chip);
    c.skip_frames = s.value("skip_frames", c.skip_frames);
    c.frame_stride = s.value("frame_stride", c.frame_stride);
    c.validate();
    return c;
}

int ScenarioConfig::node_count() const
{
    return link_paths.empty() ? static_cast<int>(nodes.size()) : n_nodes;
}

std::vector<RadioParams> ScenarioConfig::radios() const
{
    if (!link_paths.empty())
        return std::vector<RadioParams>(static_cast<std::size_t>(n_nodes), radio);
    std::vector<RadioParams> r;
    for (const auto& n : nodes)
        r.push_back(n.radio);
    return r;
}

long ScenarioConfig::tap_duration_ms() const
{
    const double d = std::max(total_duration_s, sounding_duration_s);
    return std::max(1L, static_cast<long>(std::ceil(d * 1e3 - 1e-9)));
}

std::vector<std::string> ScenarioConfig::spatial_warnings() const
{
    std::vector<std::string> out;
    for (const auto& n : nodes) {
        const double d = n.trajectory.speed_mps * sample_interval_s;
        if (d > coherence_distance_m) {
            out.push_back("node " + std::to_string(n.node_id) + ": sample spacing " + std::to_string(d) +
                          " m exceeds coherence distance " + std::to_string(coherence_distance_m) + " m");
        }
    }
    return out;
}

ScenarioConfig parse_scenario(const json& j)
{
    try {
        ScenarioConfig c;
        c.name = j.value("name", c.name);
        c.seed = j.value("seed", c.seed);
        c.sample_interval_s = j.value("sample_interval_s", c.sample_interval_s);
        c.total_duration_s = j.value("total_duration_s", c.total_duration_s);
        c.coherence_distance_m = j.value("coherence_distance_m", c.coherence_distance_m);
        if (!(c.sample_interval_s > 0.0))
            throw Error("sample_interval_s must be positive");
        if (c.total_duration_s < 1.0)
            throw Error("total_duration_s must be >= 1");
        if (j.contains("radio"))
            c.radio = parse_radio(j["radio"], c.radio);

        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            for (const auto& r : g.value("reflectors", json::array())) {
                Reflector refl;
                refl.axis = parse_axis(r.at("axis").get<std::string>());
                refl.position = r.at("position").get<double>();
                refl.loss_db = r.value("loss_db", refl.loss_db);
                c.geometry.reflectors.push_back(refl);
            }
            c.geometry.max_bounces = std::clamp(g.value("max_bounces", c.geometry.max_bounces), 0, kMaxBounces);
            c.geometry.min_path_power_dbm = g.value("min_path_power_dbm", c.geometry.min_path_power_dbm);
        }
        for (const auto& n : j.value("nodes", json::array()))
            c.nodes.push_back(parse_node(n, c.radio));
        std::sort(c.nodes.begin(), c.nodes.end(), [](const NodeSpec& a, const NodeSpec& b) { return a.node_id < b.node_id; });

        if (j.contains("link_paths")) {
            c.n_nodes = j.at("n_nodes").get<int>();
            for (const auto& l : j["link_paths"]) {
                LinkPaths lp;
                lp.link = parse_link(l);
                for (const auto& p : l.at("paths"))
                    lp.paths.push_back(parse_path(p));
                c.link_paths.push_back(std::move(lp));
            }
            if (c.link_paths.empty())
                throw Error("link_paths is empty");
        }
        if (c.node_count() < 1)
            throw Error("scenario has no nodes");

        if (j.contains("taps")) {
            const auto& t = j["taps"];
            c.taps.k = t.value("k", c.taps.k);
            c.taps.grid_dt_s = t.value("grid_dt_s", c.taps.grid_dt_s);
            c.taps.dyn_range_db = t.value("dyn_range_db", c.taps.dyn_range_db);
            c.taps.offset_db = t.value("offset_db", c.taps.offset_db);
            c.taps.relative_to_first_arrival = t.value("relative_to_first_arrival", c.taps.relative_to_first_arrival);
            c.taps.max_iterations = t.value("max_iterations", c.taps.max_iterations);
        }

        c.emulator.seed = c.seed;
        if (j.contains("emulator"))
            c.emulator = parse_emulator_config(j["emulator"], c.emulator);

        if (j.contains("sequence"))
            c.sequence = parse_sequence_spec(j["sequence"]);

        c.sounding_duration_s = c.total_duration_s;
        if (j.contains("sounding")) {
            const auto& s = j["sounding"];
            c.sounding = parse_sounding_config(s, c.sounding);
            c.sounding_duration_s = s.value("duration_s", c.sounding_duration_s);
            c.write_captures = s.value("write_captures", c.write_captures);
            if (s.contains("links"))
                c.links = parse_links(s["links"]);
        }
        c.sounding.validate();

        if (j.contains("validation")) {
            const auto& v = j["validation"];
            auto& vo = c.validation;
            vo.gain_tolerance_db = v.value("gain_tolerance_db", vo.gain_tolerance_db);
            vo.match_window_steps = v.value("match_window_steps", vo.match_window_steps);
            vo.strict = v.value("strict", vo.strict);
            vo.delay_tolerance_steps = v.value("delay_tolerance_steps", vo.delay_tolerance_steps);
            vo.check_taps = v.value("check_taps", vo.check_taps);
            vo.check_series = v.value("check_series", vo.check_series);
            vo.rmse_tolerance_db = v.value("rmse_tolerance_db", vo.rmse_tolerance_db);
            if (v.contains("u_shape_links"))
                vo.u_shape_links = parse_links(v["u_shape_links"]);
            if (v.contains("comoving_link"))
                vo.comoving_link = parse_link(v["comoving_link"]);
            if (v.contains("reference_link"))
                vo.reference_link = parse_link(v["reference_link"]);
            vo.comoving_ratio = v.value("comoving_ratio", vo.comoving_ratio);
            vo.smoothing_window = v.value("smoothing_window", vo.smoothing_window);
        }

        const int n = c.node_count();
        for (const auto& [tx, rx] : c.links) {
            if (tx < 0 || rx < 0 || tx >= n || rx >= n || tx == rx)
                throw Error("sounding link " + std::to_string(tx) + "->" + std::to_string(rx) + " is not a valid pair");
        }
        for (int i = 0; i < static_cast<int>(c.nodes.size()); ++i) {
            if (c.nodes[static_cast<std::size_t>(i)].node_id != i)
                throw Error("node ids must be 0..N-1");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed scenario: ") + e.what());
    }
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read scenario " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed scenario " + path.string() + ": " + e.what());
    }
    return parse_scenario(j);
}

} // namespace chansound
