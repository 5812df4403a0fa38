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

#pragma once

#include "chansound/channel_model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace chansound {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Vec3&) const = default;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

enum class NodeKind { Rsu, Obu, Static };

struct Trajectory {
    std::vector<Vec3> waypoints;
    double speed_mps = 0.0;
    bool loop_back = false;
};

struct NodeSpec {
    int node_id = 0;
    NodeKind kind = NodeKind::Static;
    double antenna_height_m = 1.5;
    Trajectory trajectory;
    RadioParams radio;
};

/// Positions spaced V * T_s along the polyline by arc length, start included.
/// The end point is appended when the walk stops short of it. A stationary
/// trajectory yields its first waypoint only.
std::vector<Vec3> sample_trajectory(const Trajectory& traj, double sample_interval_s);

/// Total polyline length including the return leg for out-and-back motion.
double trajectory_length(const Trajectory& traj);

/// N_s = floor((T_total - 1) / T_s) + 1.
int num_samples(double total_duration_s, double sample_interval_s);

enum class Axis { X, Y, Z };

/// Infinite axis-aligned specular plane, e.g. {Z, 0} is flat ground.
struct Reflector {
    Axis axis = Axis::Z;
    double position = 0.0;
    double loss_db = 6.0; // per bounce
};

struct SceneGeometry {
    std::vector<Reflector> reflectors;
    int max_bounces = 1;               // capped at 4
    double min_path_power_dbm = -250.0; // ray-source reporting cutoff
};

inline constexpr int kMaxBounces = 4;

/// Free-space loss 20 log10(4 pi d f / c).
double free_space_loss_db(double distance_m, double carrier_hz);

/// LOS plus image-method specular paths between two positions.
std::vector<RayPath> synthesize_link_paths(const NodeSpec& tx, const Vec3& tx_pos, const NodeSpec& rx,
                                           const Vec3& rx_pos, const SceneGeometry& geometry);

/// Per-node sampled positions, indexed [node][sample - 1].
using SampledPositions = std::vector<std::vector<Vec3>>;

SampledPositions sample_all(const std::vector<NodeSpec>& nodes, double sample_interval_s);

/// Snapshots for every ordered pair (tx != rx) at one sample index. Exhausted
/// trajectories are clamped to their last position.
std::vector<ChannelSnapshot> synthesize_paths(const std::vector<NodeSpec>& nodes, const SampledPositions& positions,
                                              const SceneGeometry& geometry, int sample_index,
                                              double sample_interval_s);

/// 3-D channel matrix [tx][rx][s], s is 1-based.
struct ChannelMatrix {
    int n_nodes = 0;
    int n_samples = 0;
    double sample_interval_s = 0.0;
    std::vector<double> times;
    std::vector<ChannelSnapshot> entries;

    const ChannelSnapshot& at(int tx, int rx, int s) const;
    ChannelSnapshot& at(int tx, int rx, int s);
};

/// Returns the paths of TX i at its sample x towards RX j at its sample y.
using PathLookup = std::function<std::vector<RayPath>(int tx, int rx, int tx_sample, int rx_sample)>;

struct MatrixLayout {
    int n_nodes = 0;
    int n_samples = 0;
    double sample_interval_s = 0.0;
    std::vector<double> speeds_mps;  // V_i per node
    std::vector<int> max_samples;    // samples available per node (>= 1)
};

/// Parses per-node channel sources into the synchronized matrix. Stationary
/// transmitters copy sample 1; exhausted nodes are clamped to their last sample.
ChannelMatrix assemble_channel_matrix(const MatrixLayout& layout, const PathLookup& lookup);

/// Full synthetic route: sample trajectories, synthesize and assemble.
ChannelMatrix build_channel_matrix(const std::vector<NodeSpec>& nodes, const SceneGeometry& geometry,
                                   double sample_interval_s, double total_duration_s);

// ---- paths file (JSON Lines, one record per (tx, rx, s)) ---------------------

void write_paths_file(const ChannelMatrix& matrix, const std::filesystem::path& path);
std::vector<ChannelSnapshot> read_paths_file(const std::filesystem::path& path, double sample_interval_s);

/// Builds the matrix from paths-file records. Records are keyed by the
/// transmitter's sample; speeds may be empty (every node treated as mobile).
ChannelMatrix assemble_from_records(const std::vector<ChannelSnapshot>& records, int n_nodes, int n_samples,
                                    double sample_interval_s, const std::vector<double>& speeds_mps);

} // namespace chansound
