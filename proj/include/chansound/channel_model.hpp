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

#include "chansound/common.hpp"

#include <optional>
#include <vector>

namespace chansound {

/// One propagation path as reported by a ray source.
struct RayPath {
    double received_power_dbm = 0.0;
    double phase_rad = 0.0; // [0, 2*pi)
    double toa_s = 0.0;
    std::optional<double> aoa_deg; // carried, never consumed
    std::optional<double> aod_deg;

    bool operator==(const RayPath&) const = default;
};

/// Paths between one transmitter and one receiver at one channel sample.
/// Construct through make_snapshot() so the ordering invariant holds.
struct ChannelSnapshot {
    int tx_id = 0;
    int rx_id = 0;
    int sample_index = 1; // 1-based
    double time_s = 0.0;  // (sample_index - 1) * T_s
    std::vector<RayPath> paths;

    bool operator==(const ChannelSnapshot&) const = default;
};

/// Normalizes phases, sorts by ascending ToA and sets time_s from the sample index.
/// Throws on negative ToA or sample_index < 1.
ChannelSnapshot make_snapshot(int tx_id, int rx_id, int sample_index, double sample_interval_s,
                              std::vector<RayPath> paths);

struct RadioParams {
    double tx_power_dbm = 20.0;
    double antenna_gain_tx_dbi = 5.0;
    double antenna_gain_rx_dbi = 5.0;
    double carrier_hz = 5.915e9;
    double bandwidth_hz = 20e6;
    double noise_density_dbm_hz = -172.8;
    double noise_figure_db = 0.0;
};

/// N_o + 10 log10(B) + F.
double noise_floor_dbm(const RadioParams& params);

/// Keeps paths with received power >= floor_dbm, order preserved.
ChannelSnapshot prune_paths(const ChannelSnapshot& snapshot, double floor_dbm);

/// 10^((P_rx - P_tx) / 20) * exp(j phase).
Complex path_coefficient(double p_rx_dbm, double p_tx_dbm, double phase_rad);

/// Outcome of the coherent link loss; a zero coherent sum is a destructive null.
struct LinkLoss {
    double loss_db = 0.0;
    bool destructive_null = false;
};

/// Magnitudes below this fraction of the summed path magnitudes count as a null.
inline constexpr double kNullRelativeTolerance = 1e-12;

/// -20 log10 |sum_i c_i|. Throws on an empty path list.
LinkLoss link_path_loss_db(const ChannelSnapshot& snapshot, double p_tx_dbm);

struct CirComponent {
    double delay_s = 0.0;
    Complex coeff{};
};

/// (tau_i, c_i) per path, ascending delay.
std::vector<CirComponent> snapshot_to_cir(const ChannelSnapshot& snapshot, double p_tx_dbm);

} // namespace chansound
