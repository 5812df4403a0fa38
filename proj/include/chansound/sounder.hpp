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
#include "chansound/sequences.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace chansound {

struct SoundingConfig {
    double p_t_db = 0.0;
    double g_t_db = 0.0;
    double g_r_db = 0.0;
    double sample_rate_hz = 50e6;
    double detection_threshold_db = 6.0;
    int guard = 2;
    double chunk_duration_s = 60.0;
    int samples_per_chip = 1;
    /// Leading frames dropped as emulator warm-up.
    std::size_t skip_frames = 1;
    /// Sound every n-th frame only (1 = all). Applied to the global frame index.
    std::size_t frame_stride = 1;

    void validate() const;
};

struct CirFrame {
    std::size_t frame_index = 0;
    double start_time_s = 0.0;
    std::vector<double> lag_axis_s;
    std::vector<double> h_i;
    std::vector<double> h_q;
    std::vector<double> h_abs;
};

struct DetectedTap {
    double delay_s = 0.0; // relative to the frame's strongest peak
    double gain_db = 0.0;
    std::size_t frame_index = 0;

    bool operator==(const DetectedTap&) const = default;
};

/// Detection result for one frame.
struct FrameTaps {
    std::size_t frame_index = 0;
    double start_time_s = 0.0;
    double noise_floor_db = kNegInf;
    std::vector<DetectedTap> taps; // ascending delay

    bool operator==(const FrameTaps&) const = default;
    /// Strongest tap, or nullptr for an empty frame.
    const DetectedTap* strongest() const;
};

struct SoundingReport {
    double sample_rate_hz = 0.0;
    std::size_t frame_length = 0;
    SequenceFamily family = SequenceFamily::Glfsr;
    SoundingConfig config;
    std::size_t chunks = 0;
    std::vector<FrameTaps> frames;
};

/// Reference waveform (real) for a code at samples_per_chip.
std::vector<double> reference_waveform(const CodeSequence& code, int samples_per_chip);

/// Normalised circular correlation over every whole frame of the stream. Frame k covers samples
/// [k L, (k + 1) L); both components are correlated against the real
/// reference and divided by its inner product.
std::vector<CirFrame> compute_cir_frames(const IqStream& received, const CodeSequence& sequence,
                                         int samples_per_chip, std::size_t first_frame_index = 0);

/// Path gain in dB per lag; zero amplitude maps to -inf.
std::vector<double> path_gains_db(const CirFrame& frame, const SoundingConfig& config);
std::vector<double> path_gains_db(std::span<const double> h_abs, const SoundingConfig& config);

/// Expected frame-peak noise level in the same dB units as path_gains_db.
/// Uses the median lag power (robust to a handful of taps).
double estimate_noise_floor_db(std::span<const double> gains_db);

/// Local maxima above noise_floor_db + threshold_db, greedily accepted in
/// descending gain order at a circular distance >= guard.
std::vector<DetectedTap> detect_taps(std::span<const double> gains_db, double sample_rate_hz, double noise_floor_db,
                                     double threshold_db, int guard, std::size_t frame_index = 0);
std::vector<FrameTaps> detect_taps(const std::vector<CirFrame>& frames, const SoundingConfig& config);

/// Frame-synchronous sounder fed block by block. Frames start at the first
/// sample pushed; partial trailing samples wait for the next push.
class StreamingSounder {
public:
    StreamingSounder(const CodeSequence& sequence, const SoundingConfig& config, double origin_time_s = 0.0);

    void push(std::span<const Complex> samples);
    std::size_t frame_length() const { return frame_length_; }
    std::size_t frames_seen() const { return frames_seen_; }
    SoundingReport finish() &&;
    const std::vector<FrameTaps>& frames() const { return report_.frames; }

private:
    void process_frames(std::span<const Complex> data, std::size_t first_index);

    SoundingConfig config_;
    std::size_t frame_length_;
    double origin_time_s_;
    kernels::FftCorrelator correlator_;
    std::vector<Complex> pending_;
    std::size_t frames_seen_ = 0;
    SoundingReport report_;
};

SoundingReport sound_stream(const IqStream& received, const CodeSequence& sequence, const SoundingConfig& config);

/// Streams a capture file in chunks of chunk_duration_s (rounded down to whole
/// frames, at least one frame).
SoundingReport sound_chunked(const std::filesystem::path& capture_path, const SoundingConfig& config,
                             const CodeSequence& sequence);

void write_sounding_report(const SoundingReport& report, const std::filesystem::path& json_path,
                           const std::filesystem::path& csv_path);
SoundingReport read_sounding_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path);

} // namespace chansound
