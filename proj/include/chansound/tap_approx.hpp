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
#include "chansound/mobility.hpp"

#include <filesystem>
#include <vector>

namespace chansound {

struct Tap {
    int delay_index = 0; // on the emulator grid
    Complex coeff{};

    bool operator==(const Tap&) const = default;
};

/// <= K grid-aligned FIR taps for one node pair at one millisecond.
struct TapSet {
    std::vector<Tap> taps;
    double grid_dt_s = 10e-9;
    long timestamp_ms = 0;

    bool operator==(const TapSet&) const = default;
};

struct TapApproxOptions {
    int k = 4;
    double grid_dt_s = 10e-9;
    double dyn_range_db = 43.0;
    double offset_db = 0.0;
    /// Reference delays to the first arrival (first kept tap at index 0); absolute ToA is not emulated.
    bool relative_to_first_arrival = true;
    int max_iterations = 50;
};

/// Result of the clustering stage, before offset and dynamic-range handling.
struct TapClustering {
    std::vector<double> centroids_s;       // power-weighted cluster delays
    std::vector<Complex> cluster_coeffs;   // coherent sums
    int iterations = 0;
};

/// Power-weighted 1-D k-means over path delays, seeded with the k strongest
/// distinct delays.
TapClustering cluster_paths(const std::vector<CirComponent>& cir, int k, double grid_dt_s, int max_iterations = 50);

/// Paths -> taps: cluster, coherently merge, snap to grid, merge collisions,
/// apply offset, drop taps more than dyn_range_db below the strongest.
TapSet approximate_taps(const ChannelSnapshot& snapshot, double p_tx_dbm, const TapApproxOptions& options);
TapSet approximate_taps(const std::vector<CirComponent>& cir, const TapApproxOptions& options);

/// Rays sitting exactly on the grid that reproduce a TapSet.
std::vector<RayPath> tapset_to_paths(const TapSet& taps, double p_tx_dbm);

Complex coherent_sum(const TapSet& taps);

// ---- tap file ---------------------------------------------------------------

struct TapFileHeader {
    int n_nodes = 0;
    double grid_dt_s = 10e-9;
    int k = 4;
    long duration_ms = 0;
    double offset_db = 0.0;

    bool operator==(const TapFileHeader&) const = default;
};

struct TapRecord {
    long timestamp_ms = 0;
    int tx = 0;
    int rx = 0;
    TapSet taps;

    bool operator==(const TapRecord&) const = default;
};

struct TapFile {
    TapFileHeader header;
    std::vector<TapRecord> records; // ordered by (timestamp, tx, rx)

    bool operator==(const TapFile&) const = default;

    /// Taps of one pair indexed by millisecond, zero-order held over gaps.
    /// Throws when the pair has no record.
    std::vector<TapSet> timeline(int tx, int rx) const;
    bool has_pair(int tx, int rx) const;
    /// True when every ordered pair (tx != rx) has one record per millisecond.
    bool is_complete() const;
};

TapFile apply_offset(const TapFile& file, double offset_db);

void write_tap_file(const TapFile& file, const std::filesystem::path& path);
TapFile read_tap_file(const std::filesystem::path& path);

/// Millisecond-cadence tap file from a channel matrix. Paths below each
/// receiver's noise floor are pruned first; sample s covers
/// [(s - 1) T_s, s T_s).
TapFile build_tap_file(const ChannelMatrix& matrix, const std::vector<RadioParams>& radios,
                       const TapApproxOptions& options, long duration_ms);

} // namespace chansound
