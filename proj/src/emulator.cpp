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

#include "chansound/emulator.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace chansound {

namespace {

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

void fill_noise(std::mt19937_64& rng, double sigma_per_component, std::span<Complex> out)
{
    std::normal_distribution<double> normal(0.0, sigma_per_component);
    for (auto& v : out) {
        const double re = normal(rng);
        const double im = normal(rng);
        v = Complex(re, im);
    }
}

} // namespace

double per_sample_noise_power_db(double floor_db, std::size_t frame_length)
{
    if (frame_length == 0)
        throw Error("noise reference frame length must be positive");
    const double l = static_cast<double>(frame_length);
    return floor_db + 10.0 * std::log10(l / expected_peak_factor(frame_length));
}

std::vector<Complex> make_noise(std::size_t length, double power_db, std::uint64_t seed)
{
    std::vector<Complex> out(length, Complex{});
    if (std::isinf(power_db) && power_db < 0.0)
        return out;
    auto rng = seeded_rng(seed, 0, 0, 0);
    fill_noise(rng, std::sqrt(db_to_power(power_db) / 2.0), out);
    return out;
}

double pair_base_loss_db(const EmulatorConfig& config, int tx, int rx)
{
    if (config.base_loss_sd_db <= 0.0)
        return config.base_loss_db;
    if (config.reciprocal_base_loss && tx > rx)
        std::swap(tx, rx);
    auto rng = seeded_rng(config.seed, static_cast<std::uint64_t>(tx), static_cast<std::uint64_t>(rx), 1);
    std::normal_distribution<double> normal(config.base_loss_db, config.base_loss_sd_db);
    return normal(rng);
}

LinkEmulator::LinkEmulator(const TapFile& taps, int tx, int rx, double sample_rate_hz, double origin_time_s,
                           const EmulatorConfig& config)
    : sample_rate_hz_(sample_rate_hz), origin_time_s_(origin_time_s), update_interval_s_(config.tap_update_interval_s)
{
    if (!(sample_rate_hz > 0.0))
        throw Error("sample rate must be positive");
    if (config.tap_update_interval_s < 1e-3 - 1e-12)
        throw Error("tap update interval must be at least 1 ms");
    if (!taps.has_pair(tx, rx))
        throw Error("pair " + std::to_string(tx) + "->" + std::to_string(rx) + " missing from tap file");

    const double samples_per_grid = taps.header.grid_dt_s * sample_rate_hz;
    const auto sets = taps.timeline(tx, rx);
    timeline_.reserve(sets.size());
    for (const auto& set : sets) {
        TapBlock block;
        for (const auto& t : set.taps) {
            const double d = t.delay_index * samples_per_grid;
            const double rounded = std::round(d);
            if (std::abs(d - rounded) > 1e-6 * std::max(1.0, d))
                throw Error("tap grid step is not an integer number of samples at this sample rate");
            block.taps.push_back({static_cast<std::size_t>(rounded), t.coeff});
            max_delay_ = std::max(max_delay_, static_cast<std::size_t>(rounded));
        }
        timeline_.push_back(std::move(block));
    }

    base_loss_db_ = pair_base_loss_db(config, tx, rx);
    scale_ = db_to_amplitude(-base_loss_db_);
    if (config.noise_floor_db) {
        noise_power_db_ = per_sample_noise_power_db(*config.noise_floor_db, config.noise_reference_length);
        noise_sigma_ = std::sqrt(db_to_power(noise_power_db_) / 2.0);
    } else {
        noise_power_db_ = kNegInf;
        noise_sigma_ = 0.0;
    }
    rng_ = seeded_rng(config.seed, static_cast<std::uint64_t>(tx), static_cast<std::uint64_t>(rx), 0);
    history_.assign(max_delay_, Complex{});
}

std::size_t LinkEmulator::update_index_at(std::size_t sample) const
{
    const double t = origin_time_s_ + static_cast<double>(sample) / sample_rate_hz_;
    const double u = std::floor(t / update_interval_s_ + 1e-9);
    return u < 0.0 ? 0 : static_cast<std::size_t>(u);
}

std::size_t LinkEmulator::next_boundary(std::size_t update_index) const
{
    const double t = static_cast<double>(update_index + 1) * update_interval_s_ - origin_time_s_;
    const double n = std::ceil(t * sample_rate_hz_ - 1e-6);
    return n < 0.0 ? 0 : static_cast<std::size_t>(n);
}

void LinkEmulator::process(std::span<const Complex> in, std::span<Complex> out)
{
    if (in.size() != out.size())
        throw Error("emulator input and output block sizes differ");
    const std::size_t h = max_delay_;
    work_.resize(h + in.size());
    std::copy(history_.begin(), history_.end(), work_.begin());
    std::copy(in.begin(), in.end(), work_.begin() + static_cast<std::ptrdiff_t>(h));

    const auto fir = kernels::backend() == kernels::Backend::OpenMP ? kernels::fir_segment_omp : kernels::fir_segment_serial;
    std::size_t pos = 0;
    while (pos < in.size()) {
        const std::size_t global = processed_ + pos;
        const std::size_t u = update_index_at(global);
        const double ms = static_cast<double>(u) * update_interval_s_ * 1e3;
        auto slot = static_cast<std::size_t>(std::floor(ms + 1e-9));
        slot = std::min(slot, timeline_.size() - 1);
        const std::size_t boundary = std::max(next_boundary(u), global + 1);
        const std::size_t end = std::min(in.size(), boundary - processed_);
        fir(work_, h + pos, timeline_[slot].taps, out.subspan(pos, end - pos));
        pos = end;
    }

    for (auto& v : out)
        v *= scale_;
    if (noise_sigma_ > 0.0) {
        for (auto& v : out) {
            const double re = noise_sigma_ * normal_(rng_);
            const double im = noise_sigma_ * normal_(rng_);
            v += Complex(re, im);
        }
    }

    if (h > 0)
        std::copy(work_.end() - static_cast<std::ptrdiff_t>(h), work_.end(), history_.begin());
    processed_ += in.size();
}

IqStream apply_channel(const IqStream& input, const TapFile& taps, std::pair<int, int> pair,
                       const EmulatorConfig& config)
{
    LinkEmulator emu(taps, pair.first, pair.second, input.sample_rate_hz, input.origin_time_s, config);
    IqStream out;
    out.sample_rate_hz = input.sample_rate_hz;
    out.origin_time_s = input.origin_time_s;
    out.samples.resize(input.samples.size());
    emu.process(input.samples, out.samples);
    return out;
}

// ---------------------------------------------------------------------------
// IQ files

namespace {

static_assert(std::endian::native == std::endian::little, "IQ files are written in host order");

void write_floats(std::ofstream& out, std::span<const Complex> samples)
{
    constexpr std::size_t kBlock = 1 << 16;
    std::vector<float> buf;
    buf.reserve(2 * kBlock);
    for (std::size_t i = 0; i < samples.size(); i += kBlock) {
        buf.clear();
        const std::size_t end = std::min(samples.size(), i + kBlock);
        for (std::size_t k = i; k < end; ++k) {
            buf.push_back(static_cast<float>(samples[k].real()));
            buf.push_back(static_cast<float>(samples[k].imag()));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

} // namespace

std::filesystem::path iq_sidecar_path(const std::filesystem::path& path)
{
    auto p = path;
    p += ".json";
    return p;
}

void write_iq_metadata(const IqMetadata& meta, const std::filesystem::path& path)
{
    std::ofstream out(iq_sidecar_path(path));
    if (!out)
        throw Error("cannot write IQ metadata for " + path.string());
    nlohmann::json j{{"sample_rate_hz", meta.sample_rate_hz}, {"origin_time_s", meta.origin_time_s}};
    out << j.dump(2) << '\n';
}

IqMetadata read_iq_metadata(const std::filesystem::path& path)
{
    std::ifstream in(iq_sidecar_path(path));
    if (!in)
        throw Error("missing IQ sidecar metadata " + iq_sidecar_path(path).string());
    try {
        const auto j = nlohmann::json::parse(in);
        IqMetadata meta;
        meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        meta.origin_time_s = j.value("origin_time_s", 0.0);
        if (!(meta.sample_rate_hz > 0.0))
            throw Error("sample_rate_hz must be positive");
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed IQ metadata " + iq_sidecar_path(path).string() + ": " + e.what());
    }
}

void write_iq(const IqStream& stream, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    write_floats(out, stream.samples);
    if (!out)
        throw Error("failed writing " + path.string());
    write_iq_metadata({stream.sample_rate_hz, stream.origin_time_s}, path);
}

void append_iq(std::span<const Complex> samples, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        throw Error("cannot open " + path.string() + " for appending");
    write_floats(out, samples);
    if (!out)
        throw Error("failed writing " + path.string());
}

std::size_t iq_sample_count(const std::filesystem::path& path)
{
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec)
        throw Error("cannot read capture " + path.string() + ": " + ec.message());
    if (bytes % (2 * sizeof(float)) != 0)
        throw Error("capture " + path.string() + " is not a whole number of IQ samples");
    return static_cast<std::size_t>(bytes / (2 * sizeof(float)));
}

IqStream read_iq_range(const std::filesystem::path& path, std::size_t offset, std::size_t count)
{
    const auto meta = read_iq_metadata(path);
    const auto total = iq_sample_count(path);
    if (offset > total)
        throw Error("capture offset beyond end of " + path.string());
    count = std::min(count, total - offset);
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open capture " + path.string());
    in.seekg(static_cast<std::streamoff>(offset * 2 * sizeof(float)));
    std::vector<float> buf(2 * count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in)
        throw Error("truncated capture " + path.string());
    IqStream s;
    s.sample_rate_hz = meta.sample_rate_hz;
    s.origin_time_s = meta.origin_time_s + static_cast<double>(offset) / meta.sample_rate_hz;
    s.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        s.samples[i] = Complex(buf[2 * i], buf[2 * i + 1]);
    return s;
}

IqStream read_iq(const std::filesystem::path& path)
{
    return read_iq_range(path, 0, iq_sample_count(path));
}

} // namespace chansound
