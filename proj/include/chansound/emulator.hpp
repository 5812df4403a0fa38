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
#include "chansound/kernels.hpp"
#include "chansound/tap_approx.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace chansound {

inline constexpr double kDefaultBaseLossDb = 57.55;
inline constexpr double kDefaultBaseLossSdDb = 1.23;
inline constexpr double kDefaultDynamicRangeDb = 43.0;
/// Noise floor as seen by the sounder for the default GLFSR-255 frame.
inline constexpr double kDefaultNoiseFloorDb = -(kDefaultBaseLossDb + kDefaultDynamicRangeDb);
inline constexpr std::size_t kDefaultNoiseReferenceLength = 255;

struct EmulatorConfig {
    double base_loss_db = kDefaultBaseLossDb;
    /// Per-pair Gaussian perturbation of the base loss; 0 disables it.
    double base_loss_sd_db = 0.0;
    /// Draw one perturbation per unordered pair so a->b and b->a match.
    bool reciprocal_base_loss = false;
    /// Expected peak noise level (dB re. unit-power input) across one sounding
    /// frame of noise_reference_length samples. nullopt disables noise.
    std::optional<double> noise_floor_db = kDefaultNoiseFloorDb;
    std::size_t noise_reference_length = kDefaultNoiseReferenceLength;
    double tap_update_interval_s = 1e-3;
    std::uint64_t seed = 1;
};

/// Per-sample noise power that places the sounder's frame-peak noise level
/// at floor_db for a frame of frame_length samples.
double per_sample_noise_power_db(double floor_db, std::size_t frame_length);

/// Circularly-symmetric white Gaussian noise with mean power 10^(power_db/10).
/// power_db = -inf gives zeros.
std::vector<Complex> make_noise(std::size_t length, double power_db, std::uint64_t seed);

/// Base loss for one ordered pair including the seeded perturbation.
double pair_base_loss_db(const EmulatorConfig& config, int tx, int rx);

/// Streaming tapped-delay-line emulator for one link. Zero-order holds each
/// millisecond tap set; history starts at zero.
class LinkEmulator {
public:
    LinkEmulator(const TapFile& taps, int tx, int rx, double sample_rate_hz, double origin_time_s,
                 const EmulatorConfig& config);

    /// Processes the next block; out.size() must equal in.size().
    void process(std::span<const Complex> in, std::span<Complex> out);

    std::size_t samples_processed() const { return processed_; }
    std::size_t max_delay_samples() const { return max_delay_; }
    double base_loss_db() const { return base_loss_db_; }
    double noise_power_db() const { return noise_power_db_; }

private:
    struct TapBlock {
        std::vector<kernels::FirTap> taps;
    };

    std::size_t update_index_at(std::size_t sample) const;
    std::size_t next_boundary(std::size_t update_index) const;

    std::vector<TapBlock> timeline_;
    double sample_rate_hz_;
    double origin_time_s_;
    double update_interval_s_;
    double base_loss_db_;
    double scale_;
    double noise_power_db_;
    double noise_sigma_;
    std::size_t max_delay_ = 0;
    std::size_t processed_ = 0;
    std::vector<Complex> history_;
    std::vector<Complex> work_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0}; // holds its cached deviate across blocks
};

/// Whole-stream convenience wrapper around LinkEmulator.
IqStream apply_channel(const IqStream& input, const TapFile& taps, std::pair<int, int> pair,
                       const EmulatorConfig& config);

// ---- IQ capture files: interleaved float32 LE, sidecar JSON metadata --------

struct IqMetadata {
    double sample_rate_hz = 1.0;
    double origin_time_s = 0.0;
};

std::filesystem::path iq_sidecar_path(const std::filesystem::path& path);
void write_iq(const IqStream& stream, const std::filesystem::path& path);
/// Appends samples to an existing capture (or creates it) without touching the sidecar.
void append_iq(std::span<const Complex> samples, const std::filesystem::path& path);
void write_iq_metadata(const IqMetadata& meta, const std::filesystem::path& path);
IqMetadata read_iq_metadata(const std::filesystem::path& path);
std::size_t iq_sample_count(const std::filesystem::path& path);
IqStream read_iq(const std::filesystem::path& path);
/// Reads count samples starting at sample offset; origin_time_s is shifted to match.
IqStream read_iq_range(const std::filesystem::path& path, std::size_t offset, std::size_t count);

} // namespace chansound
