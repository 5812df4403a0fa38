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

#include "chansound/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace chansound {

// ---- ground-truth comparison ------------------------------------------------

/// Error statistics for the k-th ground-truth tap (ascending delay order).
struct TapErrorStats {
    std::size_t ordinal = 0;
    double gt_delay_s = 0.0;     // relative delay, first frame it appeared in
    double gt_gain_mean_db = 0.0;
    std::size_t matched = 0;
    std::size_t missed = 0;
    double delay_error_max_abs_s = 0.0;
    double gain_mean_db = 0.0;   // corrected sounded gain
    double gain_sd_db = 0.0;
    double gain_error_mean_db = 0.0;
    double gain_error_sd_db = 0.0;
};

struct StrongestSample {
    std::size_t frame_index = 0;
    double time_s = 0.0;
    double ground_truth_gain_db = 0.0;
    double sounded_gain_db = kNegInf; // -inf when nothing was detected
};

struct ValidationReport {
    std::size_t frames = 0;
    std::vector<TapErrorStats> taps;
    std::vector<double> delay_errors_s;  // one per matched detection
    std::vector<double> gain_errors_db;  // one per matched detection
    std::size_t spurious = 0;
    std::size_t missed = 0;
    /// |(strongest - weakest)_sounded - (strongest - weakest)_truth| per frame.
    double spread_error_mean_db = 0.0;
    double spread_error_sd_db = 0.0;
    double max_abs_delay_error_s = 0.0;
    double max_abs_mean_gain_error_db = 0.0;
    std::vector<StrongestSample> strongest;
    bool pass = false;
    std::vector<std::string> failures;
};

/// Sounded gains are corrected by +base_loss_db - offset_db; truth gains are
/// 20 log10 |c| - offset_db. Taps match by nearest delay within the window.
ValidationReport compare_to_ground_truth(const SoundingReport& report, const TapFile& taps, LinkId link,
                                         double base_loss_db, double offset_db,
                                         const ValidationOptions& options = {});

nlohmann::json to_json(const ValidationReport& v);

// ---- link path-loss series (one point per channel sample) -------------------

struct LossSample {
    int s = 1;
    double time_s = 0.0;
    double ground_truth_loss_db = 0.0; // coherent link loss of the pruned snapshot
    double sounded_loss_db = 0.0;      // mean corrected strongest-tap loss
    std::size_t frames = 0;
};

std::vector<LossSample> link_loss_series(const SoundingReport& report, const ChannelMatrix& matrix, LinkId link,
                                         const std::vector<RadioParams>& radios, double base_loss_db,
                                         double offset_db);
double series_rmse_db(const std::vector<LossSample>& series);
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window);
/// Smoothed series strictly decreasing to an interior minimum, then strictly increasing.
bool is_u_shaped(const std::vector<double>& gains_db, std::size_t window);
void write_loss_series_csv(const std::vector<LossSample>& series, const std::filesystem::path& path);

// ---- emulate + sound loop ---------------------------------------------------

/// Transmits the repeated code through one emulated link for duration_s and
/// sounds the result. With a capture path the received stream is written to
/// disk and sounded back in chunks.
SoundingReport emulate_and_sound(const TapFile& taps, LinkId link, const CodeSequence& code,
                                 const EmulatorConfig& emulator, const SoundingConfig& sounding, double duration_s,
                                 const std::optional<std::filesystem::path>& capture = std::nullopt);

/// One unit tap (0 dB, delay 0) per ordered pair.
TapFile unit_tap_file(int n_nodes, double grid_dt_s, long duration_ms);

// ---- heatmap ------------------------------------------------------------------

struct HeatmapConfig {
    int n_nodes = 10;
    double window_s = 2.0;
    double sample_rate_hz = 1e6;
    EmulatorConfig emulator{.base_loss_sd_db = kDefaultBaseLossSdDb};
    SequenceSpec sequence;
    SoundingConfig sounding;
};

struct PathLossHeatmap {
    int n = 0;
    std::vector<double> cells; // row = tx, column = rx; diagonal is NaN
    double mean_db = 0.0;
    double sd_db = 0.0;

    double at(int tx, int rx) const { return cells[static_cast<std::size_t>(tx * n + rx)]; }
};

HeatmapConfig parse_heatmap_config(const nlohmann::json& j);
PathLossHeatmap pathloss_heatmap(const HeatmapConfig& config);
void write_heatmap_csv(const PathLossHeatmap& heatmap, const std::filesystem::path& path);

// ---- pipeline -------------------------------------------------------------------

ChannelMatrix build_scenario_matrix(const ScenarioConfig& config);
TapFile build_scenario_taps(const ScenarioConfig& config, const ChannelMatrix& matrix);

struct PipelineCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct LinkOutcome {
    LinkId link;
    double base_loss_db = 0.0;
    std::size_t frames = 0;
    ValidationReport validation;
    std::vector<LossSample> series;
};

struct PipelineResult {
    std::vector<LinkOutcome> links;
    std::vector<PipelineCheck> checks;
    std::vector<std::string> warnings;
    bool pass = false;
};

/// mobility -> tap_approx -> emulator -> sounder -> compare. Every stage
/// failure is rethrown as "stage '<name>' failed: <cause>".
PipelineResult run_scenario_pipeline(const ScenarioConfig& config, const std::filesystem::path& out_dir);
PipelineResult run_scenario_pipeline(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);

} // namespace chansound
