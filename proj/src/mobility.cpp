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

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include <json.hpp>

namespace chansound {

namespace {

double component(const Vec3& v, Axis axis)
{
    switch (axis) {
    case Axis::X: return v.x;
    case Axis::Y: return v.y;
    case Axis::Z: return v.z;
    }
    return 0.0;
}

Vec3 mirror(Vec3 v, const Reflector& r)
{
    switch (r.axis) {
    case Axis::X: v.x = 2.0 * r.position - v.x; break;
    case Axis::Y: v.y = 2.0 * r.position - v.y; break;
    case Axis::Z: v.z = 2.0 * r.position - v.z; break;
    }
    return v;
}

std::vector<Vec3> expand_polyline(const Trajectory& traj)
{
    std::vector<Vec3> pts = traj.waypoints;
    if (traj.loop_back && pts.size() > 1) {
        for (auto it = traj.waypoints.rbegin() + 1; it != traj.waypoints.rend(); ++it)
            pts.push_back(*it);
    }
    return pts;
}

double azimuth_deg(const Vec3& from, const Vec3& to)
{
    return std::atan2(to.y - from.y, to.x - from.x) * 180.0 / kPi;
}

// Enumerates plane index sequences of length 1..max_bounces without repeating
// the same plane back to back.
void enumerate_sequences(std::size_t n_planes, int max_len, std::vector<std::size_t>& current,
                         std::vector<std::vector<std::size_t>>& out)
{
    if (!current.empty())
        out.push_back(current);
    if (static_cast<int>(current.size()) == max_len)
        return;
    for (std::size_t p = 0; p < n_planes; ++p) {
        if (!current.empty() && current.back() == p)
            continue;
        current.push_back(p);
        enumerate_sequences(n_planes, max_len, current, out);
        current.pop_back();
    }
}

} // namespace

double trajectory_length(const Trajectory& traj)
{
    const auto pts = expand_polyline(traj);
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        total += norm(pts[i] - pts[i - 1]);
    return total;
}

std::vector<Vec3> sample_trajectory(const Trajectory& traj, double sample_interval_s)
{
    if (!(sample_interval_s > 0.0))
        throw Error("sample interval must be positive");
    if (traj.waypoints.empty())
        throw Error("trajectory needs at least one waypoint");
    if (traj.speed_mps < 0.0)
        throw Error("speed must be nonnegative");
    const auto pts = expand_polyline(traj);
    const double total = trajectory_length(traj);
    if (traj.speed_mps == 0.0 || pts.size() == 1 || total == 0.0)
        return {traj.waypoints.front()};

    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + norm(pts[i] - pts[i - 1]);

    const double spacing = traj.speed_mps * sample_interval_s;
    constexpr double kEps = 1e-9;
    std::vector<Vec3> out;
    std::size_t seg = 0;
    for (std::size_t k = 0;; ++k) {
        const double s = static_cast<double>(k) * spacing;
        if (s > total + kEps)
            break;
        while (seg + 2 < pts.size() && s > cum[seg + 1])
            ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double frac = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(pts[seg] + frac * (pts[seg + 1] - pts[seg]));
    }
    const double last = static_cast<double>(out.size() - 1) * spacing;
    if (total - last > kEps)
        out.push_back(pts.back());
    return out;
}

int num_samples(double total_duration_s, double sample_interval_s)
{
    if (!(sample_interval_s > 0.0))
        throw Error("sample interval must be positive");
    if (!(total_duration_s >= 1.0))
        throw Error("total duration must be at least 1 s");
    // Relative slack keeps exact ratios like 0.3 / 0.1 from flooring down.
    const double ratio = (total_duration_s - 1.0) / sample_interval_s;
    return static_cast<int>(std::floor(ratio * (1.0 + 1e-12) + 1e-12)) + 1;
}

double free_space_loss_db(double distance_m, double carrier_hz)
{
    return 20.0 * std::log10(4.0 * kPi * distance_m * carrier_hz / kSpeedOfLight);
}

std::vector<RayPath> synthesize_link_paths(const NodeSpec& tx, const Vec3& tx_pos, const NodeSpec& rx,
                                           const Vec3& rx_pos, const SceneGeometry& geometry)
{
    const double d = norm(rx_pos - tx_pos);
    if (d < 1e-9)
        throw Error("zero-distance link");
    const double f = tx.radio.carrier_hz;
    const double lambda = kSpeedOfLight / f;
    const double eirp_gain = tx.radio.tx_power_dbm + tx.radio.antenna_gain_tx_dbi + rx.radio.antenna_gain_rx_dbi;

    std::vector<RayPath> paths;
    auto emit = [&](double length, int bounces, double extra_loss, const Vec3& first_hop, const Vec3& last_hop) {
        const double p_rx = eirp_gain - free_space_loss_db(length, f) - extra_loss;
        if (p_rx < geometry.min_path_power_dbm)
            return;
        RayPath p;
        p.received_power_dbm = p_rx;
        p.phase_rad = wrap_phase(-kTwoPi * length / lambda + static_cast<double>(bounces) * kPi);
        p.toa_s = length / kSpeedOfLight;
        p.aod_deg = azimuth_deg(tx_pos, first_hop);
        p.aoa_deg = azimuth_deg(rx_pos, last_hop);
        paths.push_back(p);
    };
    emit(d, 0, 0.0, rx_pos, tx_pos);

    const int max_b = std::clamp(geometry.max_bounces, 0, kMaxBounces);
    if (max_b == 0 || geometry.reflectors.empty())
        return paths;

    std::vector<std::vector<std::size_t>> sequences;
    std::vector<std::size_t> scratch;
    enumerate_sequences(geometry.reflectors.size(), max_b, scratch, sequences);

    for (const auto& seq : sequences) {
        std::vector<Vec3> images{tx_pos};
        for (std::size_t idx : seq)
            images.push_back(mirror(images.back(), geometry.reflectors[idx]));

        // Trace back from the receiver; every hop must cross its plane.
        bool valid = true;
        Vec3 target = rx_pos;
        std::vector<Vec3> hits(seq.size());
        for (std::size_t k = seq.size(); k-- > 0;) {
            const Reflector& plane = geometry.reflectors[seq[k]];
            const Vec3& image = images[k + 1];
            const double a = component(target, plane.axis) - plane.position;
            const double b = component(image, plane.axis) - plane.position;
            if (!(a * b < 0.0)) {
                valid = false;
                break;
            }
            const double t = a / (a - b);
            hits[k] = target + t * (image - target);
            target = hits[k];
        }
        if (!valid)
            continue;
        const double length = norm(images.back() - rx_pos);
        double loss = 0.0;
        for (std::size_t idx : seq)
            loss += geometry.reflectors[idx].loss_db;
        emit(length, static_cast<int>(seq.size()), loss, hits.front(), hits.back());
    }
    return paths;
}

SampledPositions sample_all(const std::vector<NodeSpec>& nodes, double sample_interval_s)
{
    SampledPositions out;
    out.reserve(nodes.size());
    for (const auto& n : nodes)
        out.push_back(sample_trajectory(n.trajectory, sample_interval_s));
    return out;
}

std::vector<ChannelSnapshot> synthesize_paths(const std::vector<NodeSpec>& nodes, const SampledPositions& positions,
                                              const SceneGeometry& geometry, int sample_index,
                                              double sample_interval_s)
{
    if (positions.size() != nodes.size())
        throw Error("sampled positions do not match node list");
    std::vector<ChannelSnapshot> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (i == j)
                continue;
            const auto xi = std::min<std::size_t>(static_cast<std::size_t>(sample_index), positions[i].size());
            const auto yj = std::min<std::size_t>(static_cast<std::size_t>(sample_index), positions[j].size());
            auto paths = synthesize_link_paths(nodes[i], positions[i][xi - 1], nodes[j], positions[j][yj - 1], geometry);
            out.push_back(make_snapshot(nodes[i].node_id, nodes[j].node_id, sample_index, sample_interval_s,
                                        std::move(paths)));
        }
    }
    return out;
}

const ChannelSnapshot& ChannelMatrix::at(int tx, int rx, int s) const
{
    if (tx < 0 || tx >= n_nodes || rx < 0 || rx >= n_nodes || s < 1 || s > n_samples)
        throw Error("channel matrix index out of range");
    return entries[(static_cast<std::size_t>(tx) * n_nodes + rx) * n_samples + (s - 1)];
}

ChannelSnapshot& ChannelMatrix::at(int tx, int rx, int s)
{
    return const_cast<ChannelSnapshot&>(std::as_const(*this).at(tx, rx, s));
}

ChannelMatrix assemble_channel_matrix(const MatrixLayout& layout, const PathLookup& lookup)
{
    const int n = layout.n_nodes;
    if (n < 1)
        throw Error("scenario has no nodes");
    if (layout.n_samples < 1)
        throw Error("scenario has no samples");
    if (static_cast<int>(layout.speeds_mps.size()) != n || static_cast<int>(layout.max_samples.size()) != n)
        throw Error("layout speed/sample tables do not match node count");

    ChannelMatrix ch;
    ch.n_nodes = n;
    ch.n_samples = layout.n_samples;
    ch.sample_interval_s = layout.sample_interval_s;
    ch.entries.resize(static_cast<std::size_t>(n) * n * layout.n_samples);
    ch.times.resize(static_cast<std::size_t>(layout.n_samples));

    for (int s = 1; s <= layout.n_samples; ++s) {
        ch.times[static_cast<std::size_t>(s - 1)] = static_cast<double>(s - 1) * layout.sample_interval_s;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (layout.speeds_mps[static_cast<std::size_t>(i)] == 0.0 && s > 1) {
                    ch.at(i, j, s) = ch.at(i, j, 1);
                    ch.at(i, j, s).sample_index = s;
                    ch.at(i, j, s).time_s = ch.times[static_cast<std::size_t>(s - 1)];
                    continue;
                }
                const int x = std::min(s, layout.max_samples[static_cast<std::size_t>(i)]);
                const int y = std::min(s, layout.max_samples[static_cast<std::size_t>(j)]);
                std::vector<RayPath> paths;
                if (i != j)
                    paths = lookup(i, j, x, y);
                ch.at(i, j, s) = make_snapshot(i, j, s, layout.sample_interval_s, std::move(paths));
            }
        }
    }
    return ch;
}

ChannelMatrix build_channel_matrix(const std::vector<NodeSpec>& nodes, const SceneGeometry& geometry,
                                   double sample_interval_s, double total_duration_s)
{
    if (nodes.empty())
        throw Error("scenario has no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].node_id != static_cast<int>(i))
            throw Error("node ids must be 0..N-1 in order");
    }
    const auto positions = sample_all(nodes, sample_interval_s);
    MatrixLayout layout;
    layout.n_nodes = static_cast<int>(nodes.size());
    layout.n_samples = num_samples(total_duration_s, sample_interval_s);
    layout.sample_interval_s = sample_interval_s;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        layout.speeds_mps.push_back(nodes[i].trajectory.speed_mps);
        layout.max_samples.push_back(static_cast<int>(positions[i].size()));
    }
    return assemble_channel_matrix(layout, [&](int tx, int rx, int x, int y) {
        return synthesize_link_paths(nodes[static_cast<std::size_t>(tx)], positions[static_cast<std::size_t>(tx)][static_cast<std::size_t>(x - 1)],
                                     nodes[static_cast<std::size_t>(rx)], positions[static_cast<std::size_t>(rx)][static_cast<std::size_t>(y - 1)],
                                     geometry);
    });
}

// ---------------------------------------------------------------------------
// paths file

void write_paths_file(const ChannelMatrix& matrix, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    for (int s = 1; s <= matrix.n_samples; ++s) {
        for (int i = 0; i < matrix.n_nodes; ++i) {
            for (int j = 0; j < matrix.n_nodes; ++j) {
                if (i == j)
                    continue;
                const auto& snap = matrix.at(i, j, s);
                nlohmann::json rec;
                rec["tx"] = i;
                rec["rx"] = j;
                rec["s"] = s;
                rec["t_s"] = snap.time_s;
                auto paths = nlohmann::json::array();
                for (const auto& p : snap.paths) {
                    nlohmann::json jp{{"p_rx_dbm", p.received_power_dbm}, {"phase_rad", p.phase_rad}, {"toa_s", p.toa_s}};
                    if (p.aoa_deg)
                        jp["aoa_deg"] = *p.aoa_deg;
                    if (p.aod_deg)
                        jp["aod_deg"] = *p.aod_deg;
                    paths.push_back(std::move(jp));
                }
                rec["paths"] = std::move(paths);
                out << rec.dump() << '\n';
            }
        }
    }
    if (!out)
        throw Error("failed writing " + path.string());
}

std::vector<ChannelSnapshot> read_paths_file(const std::filesystem::path& path, double sample_interval_s)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open paths file " + path.string());
    std::vector<ChannelSnapshot> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            std::vector<RayPath> paths;
            for (const auto& jp : rec.at("paths")) {
                RayPath p;
                p.received_power_dbm = jp.at("p_rx_dbm").get<double>();
                p.phase_rad = jp.at("phase_rad").get<double>();
                p.toa_s = jp.at("toa_s").get<double>();
                if (jp.contains("aoa_deg") && !jp["aoa_deg"].is_null())
                    p.aoa_deg = jp["aoa_deg"].get<double>();
                if (jp.contains("aod_deg") && !jp["aod_deg"].is_null())
                    p.aod_deg = jp["aod_deg"].get<double>();
                paths.push_back(p);
            }
            out.push_back(make_snapshot(rec.at("tx").get<int>(), rec.at("rx").get<int>(), rec.at("s").get<int>(),
                                        sample_interval_s, std::move(paths)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

ChannelMatrix assemble_from_records(const std::vector<ChannelSnapshot>& records, int n_nodes, int n_samples,
                                    double sample_interval_s, const std::vector<double>& speeds_mps)
{
    std::map<std::tuple<int, int, int>, const ChannelSnapshot*> index;
    std::vector<int> max_tx(static_cast<std::size_t>(n_nodes), 0);
    for (const auto& r : records) {
        if (r.tx_id < 0 || r.tx_id >= n_nodes || r.rx_id < 0 || r.rx_id >= n_nodes)
            throw Error("paths record references unknown node");
        index[{r.tx_id, r.rx_id, r.sample_index}] = &r;
        max_tx[static_cast<std::size_t>(r.tx_id)] = std::max(max_tx[static_cast<std::size_t>(r.tx_id)], r.sample_index);
    }
    for (int i = 0; i < n_nodes; ++i) {
        for (int j = 0; j < n_nodes; ++j) {
            if (i != j && !index.count({i, j, 1}))
                throw Error("paths file lacks sample 1 for pair " + std::to_string(i) + "->" + std::to_string(j));
        }
    }

    MatrixLayout layout;
    layout.n_nodes = n_nodes;
    layout.n_samples = n_samples;
    layout.sample_interval_s = sample_interval_s;
    layout.speeds_mps = speeds_mps.empty() ? std::vector<double>(static_cast<std::size_t>(n_nodes), 1.0) : speeds_mps;
    for (int i = 0; i < n_nodes; ++i)
        layout.max_samples.push_back(std::max(1, max_tx[static_cast<std::size_t>(i)]));
    // Records are keyed by the transmitter sample x; the receiver position is
    // already folded into each record.
    return assemble_channel_matrix(layout, [&](int tx, int rx, int x, int) {
        for (int s = x; s >= 1; --s) {
            auto it = index.find({tx, rx, s});
            if (it != index.end())
                return it->second->paths;
        }
        throw Error("paths file lacks records for pair " + std::to_string(tx) + "->" + std::to_string(rx));
    });
}

} // namespace chansound
