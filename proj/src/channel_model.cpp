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

#include "chansound/channel_model.hpp"

#include <algorithm>

namespace chansound {

ChannelSnapshot make_snapshot(int tx_id, int rx_id, int sample_index, double sample_interval_s,
                              std::vector<RayPath> paths)
{
    if (sample_index < 1)
        throw Error("sample index is 1-based");
    for (auto& p : paths) {
        if (!(p.toa_s >= 0.0))
            throw Error("path time of arrival must be nonnegative");
        p.phase_rad = wrap_phase(p.phase_rad);
    }
    std::stable_sort(paths.begin(), paths.end(),
                     [](const RayPath& a, const RayPath& b) { return a.toa_s < b.toa_s; });
    ChannelSnapshot snap;
    snap.tx_id = tx_id;
    snap.rx_id = rx_id;
    snap.sample_index = sample_index;
    snap.time_s = static_cast<double>(sample_index - 1) * sample_interval_s;
    snap.paths = std::move(paths);
    return snap;
}

double noise_floor_dbm(const RadioParams& params)
{
    if (!(params.bandwidth_hz > 0.0))
        throw Error("bandwidth must be positive");
    return params.noise_density_dbm_hz + 10.0 * std::log10(params.bandwidth_hz) + params.noise_figure_db;
}

ChannelSnapshot prune_paths(const ChannelSnapshot& snapshot, double floor_dbm)
{
    ChannelSnapshot out = snapshot;
    out.paths.clear();
    std::copy_if(snapshot.paths.begin(), snapshot.paths.end(), std::back_inserter(out.paths),
                 [floor_dbm](const RayPath& p) { return p.received_power_dbm >= floor_dbm; });
    return out;
}

Complex path_coefficient(double p_rx_dbm, double p_tx_dbm, double phase_rad)
{
    return std::polar(db_to_amplitude(p_rx_dbm - p_tx_dbm), phase_rad);
}

LinkLoss link_path_loss_db(const ChannelSnapshot& snapshot, double p_tx_dbm)
{
    if (snapshot.paths.empty())
        throw Error("no propagation paths");
    Complex sum{};
    double magnitude_total = 0.0;
    for (const auto& p : snapshot.paths) {
        const Complex c = path_coefficient(p.received_power_dbm, p_tx_dbm, p.phase_rad);
        sum += c;
        magnitude_total += std::abs(c);
    }
    const double mag = std::abs(sum);
    if (mag <= kNullRelativeTolerance * magnitude_total)
        return {std::numeric_limits<double>::infinity(), true};
    return {-20.0 * std::log10(mag), false};
}

std::vector<CirComponent> snapshot_to_cir(const ChannelSnapshot& snapshot, double p_tx_dbm)
{
    std::vector<CirComponent> cir;
    cir.reserve(snapshot.paths.size());
    for (const auto& p : snapshot.paths)
        cir.push_back({p.toa_s, path_coefficient(p.received_power_dbm, p_tx_dbm, p.phase_rad)});
    std::stable_sort(cir.begin(), cir.end(),
                     [](const CirComponent& a, const CirComponent& b) { return a.delay_s < b.delay_s; });
    return cir;
}

} // namespace chansound
