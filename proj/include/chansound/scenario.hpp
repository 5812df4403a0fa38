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

// Scenario configuration: one JSON document drives every pipeline stage.

#include "chansound/emulator.hpp"
#include "chansound/mobility.hpp"
#include "chansound/sequences.hpp"
#include "chansound/sounder.hpp"
#include "chansound/tap_approx.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace chansound {

using LinkId = std::pair<int, int>;

struct SequenceSpec {
    SequenceFamily family = SequenceFamily::Glfsr;
    int degree = 8;
    std::uint32_t mask = 0;
    std::uint32_t seed = 1;
    std::uint64_t poly_a = 0;
    std::uint64_t poly_b = 0;
    int shift = 0;
    int length = 128;
    int order = 2;
    int ifw = -1;
};

CodeSequence make_sequence(const SequenceSpec& spec);
SequenceSpec parse_sequence_spec(const nlohmann::json& j);

/// Fixed path list for one ordered pair (bypasses the geometry generator).
struct LinkPaths {
    LinkId link;
    std::vector<RayPath> paths;
};

struct ValidationOptions {
    double gain_tolerance_db = 0.5;
    /// Match window in grid steps.
    double match_window_steps = 1.0;
    /// Unmatched taps fail the comparison.
    bool strict = true;
    /// Largest accepted |delay error| of a matched tap, in grid steps.
    double delay_tolerance_steps = 0.5;
    /// Per-tap gain/delay checks gate the pipeline result.
    bool check_taps = true;
    /// Sounded-vs-truth link loss RMSE gates the pipeline result.
    bool check_series = false;
    double rmse_tolerance_db = 1.0;
    /// Links whose ground-truth series must be U-shaped (gain falls then rises).
    std::vector<LinkId> u_shape_links;
    /// Co-moving link and the static-to-mobile link it is compared against.
    std::optional<LinkId> comoving_link;
    std::optional<LinkId> reference_link;
    double comoving_ratio = 0.25;
    std::size_t smoothing_window = 10;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    double sample_interval_s = 0.447;
    double total_duration_s = 1.0;
    double coherence_distance_m = 15.0;

    // Geometry-driven scenes.
    std::vector<NodeSpec> nodes;
    SceneGeometry geometry;

    // Path-list scenes; used when non-empty.
    int n_nodes = 0;
    std::vector<LinkPaths> link_paths;
    RadioParams radio;

    TapApproxOptions taps;
    EmulatorConfig emulator;

    SequenceSpec sequence;
    SoundingConfig sounding;
    double sounding_duration_s = 1.0;
    std::vector<LinkId> links;
    bool write_captures = false;

    ValidationOptions validation;

    int node_count() const;
    std::vector<RadioParams> radios() const;
    long tap_duration_ms() const;
    /// D = V * T_s above the coherence distance, one message per node.
    std::vector<std::string> spatial_warnings() const;
};

EmulatorConfig parse_emulator_config(const nlohmann::json& j, EmulatorConfig base = {});
SoundingConfig parse_sounding_config(const nlohmann::json& j, SoundingConfig base = {});

ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

} // namespace chansound
