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

#include "chansound/sounder.hpp"
#include "chansound/emulator.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace chansound {

void SoundingConfig::validate() const
{
    if (!(sample_rate_hz > 0.0))
        throw Error("sounding sample rate must be positive");
    if (!(chunk_duration_s > 0.0))
        throw Error("chunk_duration_s must be positive");
    if (!(detection_threshold_db > 0.0))
        throw Error("detection threshold must be positive");
    if (guard < 1)
        throw Error("guard must be at least one sample");
    if (samples_per_chip < 1)
        throw Error("samples_per_chip must be >= 1");
    if (frame_stride < 1)
        throw Error("frame_stride must be >= 1");
}

const DetectedTap* FrameTaps::strongest() const
{
    if (taps.empty())
        return nullptr;
    return &*std::max_element(taps.begin(), taps.end(),
                              [](const DetectedTap& a, const DetectedTap& b) { return a.gain_db < b.gain_db; });
}

std::vector<double> reference_waveform(const CodeSequence& code, int samples_per_chip)
{
    const auto iq = bpsk_modulate(code, samples_per_chip);
    std::vector<double> ref(iq.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        ref[i] = iq.samples[i].real();
    return ref;
}

namespace {

double inner_product(const std::vector<double>& ref)
{
    return std::inner_product(ref.begin(), ref.end(), ref.begin(), 0.0);
}

double gain_offset_db(const SoundingConfig& c) { return c.p_t_db + c.g_t_db + c.g_r_db; }

FrameTaps sound_frame(const kernels::FftCorrelator& corr, std::span<const Complex> frame, std::size_t index,
                      double start_time_s, const SoundingConfig& config, std::vector<Complex>& h,
                      std::vector<double>& gains)
{
    const std::size_t n = frame.size();
    h.resize(n);
    gains.resize(n);
    corr.correlate(frame, h);
    const double off = gain_offset_db(config);
    for (std::size_t k = 0; k < n; ++k)
        gains[k] = amplitude_to_db(std::abs(h[k])) - off;
    FrameTaps ft;
    ft.frame_index = index;
    ft.start_time_s = start_time_s;
    ft.noise_floor_db = estimate_noise_floor_db(gains);
    ft.taps = detect_taps(gains, config.sample_rate_hz, ft.noise_floor_db, config.detection_threshold_db,
                          config.guard, index);
    return ft;
}

} // namespace

std::vector<CirFrame> compute_cir_frames(const IqStream& received, const CodeSequence& sequence,
                                         int samples_per_chip, std::size_t first_frame_index)
{
    const auto ref = reference_waveform(sequence, samples_per_chip);
    const std::size_t l = ref.size();
    if (received.size() < l)
        throw Error("received stream shorter than one sounding frame");
    const kernels::FftCorrelator corr(ref, inner_product(ref));
    const std::size_t n_frames = received.size() / l;

    std::vector<CirFrame> frames(n_frames);
    const bool parallel = kernels::backend() == kernels::Backend::OpenMP;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::vector<Complex> h(l);
        corr.correlate(std::span<const Complex>(received.samples).subspan(f * l, l), h);
        auto& fr = frames[f];
        fr.frame_index = first_frame_index + f;
        fr.start_time_s = received.origin_time_s + static_cast<double>(f * l) / received.sample_rate_hz;
        fr.lag_axis_s.resize(l);
        fr.h_i.resize(l);
        fr.h_q.resize(l);
        fr.h_abs.resize(l);
        for (std::size_t k = 0; k < l; ++k) {
            fr.lag_axis_s[k] = static_cast<double>(k) / received.sample_rate_hz;
            fr.h_i[k] = h[k].real();
            fr.h_q[k] = h[k].imag();
            fr.h_abs[k] = std::sqrt(fr.h_i[k] * fr.h_i[k] + fr.h_q[k] * fr.h_q[k]);
        }
    }
    return frames;
}

std::vector<double> path_gains_db(std::span<const double> h_abs, const SoundingConfig& config)
{
    const double off = gain_offset_db(config);
    std::vector<double> g(h_abs.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = amplitude_to_db(h_abs[k]) - off;
    return g;
}

std::vector<double> path_gains_db(const CirFrame& frame, const SoundingConfig& config)
{
    return path_gains_db(frame.h_abs, config);
}

double estimate_noise_floor_db(std::span<const double> gains_db)
{
    if (gains_db.empty())
        return kNegInf;
    std::vector<double> p(gains_db.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = std::isinf(gains_db[k]) ? 0.0 : db_to_power(gains_db[k]);
    auto mid = p.begin() + static_cast<std::ptrdiff_t>(p.size() / 2);
    std::nth_element(p.begin(), mid, p.end());
    // Median of an exponential variable is ln 2 times its mean.
    return power_to_db(*mid / std::log(2.0) * expected_peak_factor(p.size()));
}

std::vector<DetectedTap> detect_taps(std::span<const double> gains_db, double sample_rate_hz, double noise_floor_db,
                                     double threshold_db, int guard, std::size_t frame_index)
{
    if (!(threshold_db > 0.0))
        throw Error("detection threshold must be positive");
    const std::size_t n = gains_db.size();
    const double thr = noise_floor_db + threshold_db;
    std::vector<std::size_t> cand;
    for (std::size_t k = 0; k < n; ++k) {
        const double g = gains_db[k];
        if (!(g > thr))
            continue;
        if (n > 1 && (g < gains_db[(k + n - 1) % n] || g < gains_db[(k + 1) % n]))
            continue;
        cand.push_back(k);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return gains_db[a] > gains_db[b]; });

    std::vector<std::size_t> accepted;
    for (const auto k : cand) {
        bool ok = true;
        for (const auto a : accepted) {
            const std::size_t d = k > a ? k - a : a - k;
            if (std::min(d, n - d) < static_cast<std::size_t>(guard)) {
                ok = false;
                break;
            }
        }
        if (ok)
            accepted.push_back(k);
    }

    std::vector<DetectedTap> taps;
    if (accepted.empty())
        return taps;
    const std::size_t peak = accepted.front();
    for (const auto k : accepted) {
        DetectedTap t;
        t.delay_s = static_cast<double>((k + n - peak) % n) / sample_rate_hz;
        t.gain_db = gains_db[k];
        t.frame_index = frame_index;
        taps.push_back(t);
    }
    std::sort(taps.begin(), taps.end(), [](const DetectedTap& a, const DetectedTap& b) { return a.delay_s < b.delay_s; });
    return taps;
}

std::vector<FrameTaps> detect_taps(const std::vector<CirFrame>& frames, const SoundingConfig& config)
{
    std::vector<FrameTaps> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        const auto g = path_gains_db(f, config);
        FrameTaps ft;
        ft.frame_index = f.frame_index;
        ft.start_time_s = f.start_time_s;
        ft.noise_floor_db = estimate_noise_floor_db(g);
        ft.taps = detect_taps(g, config.sample_rate_hz, ft.noise_floor_db, config.detection_threshold_db, config.guard,
                              f.frame_index);
        out.push_back(std::move(ft));
    }
    return out;
}

// ---------------------------------------------------------------------------

StreamingSounder::StreamingSounder(const CodeSequence& sequence, const SoundingConfig& config, double origin_time_s)
    : config_(config), origin_time_s_(origin_time_s),
      correlator_([&] {
          config.validate();
          const auto ref = reference_waveform(sequence, config.samples_per_chip);
          return kernels::FftCorrelator(ref, inner_product(ref));
      }())
{
    frame_length_ = correlator_.length();
    report_.sample_rate_hz = config.sample_rate_hz;
    report_.frame_length = frame_length_;
    report_.family = sequence.family;
    report_.config = config;
}

void StreamingSounder::process_frames(std::span<const Complex> data, std::size_t first_index)
{
    const std::size_t l = frame_length_;
    const std::size_t n = data.size() / l;
    std::vector<std::size_t> todo;
    for (std::size_t f = 0; f < n; ++f) {
        const std::size_t idx = first_index + f;
        if (idx >= config_.skip_frames && idx % config_.frame_stride == 0)
            todo.push_back(f);
    }
    std::vector<FrameTaps> results(todo.size());
    const bool parallel = kernels::backend() == kernels::Backend::OpenMP;
#pragma omp parallel if (parallel)
    {
        std::vector<Complex> h;
        std::vector<double> gains;
#pragma omp for schedule(static)
        for (std::size_t i = 0; i < todo.size(); ++i) {
            const std::size_t f = todo[i];
            const std::size_t idx = first_index + f;
            const double t0 = origin_time_s_ + static_cast<double>(idx * l) / config_.sample_rate_hz;
            results[i] = sound_frame(correlator_, data.subspan(f * l, l), idx, t0, config_, h, gains);
        }
    }
    for (auto& r : results)
        report_.frames.push_back(std::move(r));
}

void StreamingSounder::push(std::span<const Complex> samples)
{
    const std::size_t l = frame_length_;
    if (!pending_.empty()) {
        const std::size_t need = l - pending_.size();
        const std::size_t take = std::min(need, samples.size());
        pending_.insert(pending_.end(), samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(take));
        samples = samples.subspan(take);
        if (pending_.size() < l)
            return;
        process_frames(pending_, frames_seen_);
        ++frames_seen_;
        pending_.clear();
    }
    const std::size_t whole = samples.size() / l;
    if (whole > 0) {
        process_frames(samples.first(whole * l), frames_seen_);
        frames_seen_ += whole;
    }
    const auto rest = samples.subspan(whole * l);
    pending_.assign(rest.begin(), rest.end());
}

SoundingReport StreamingSounder::finish() &&
{
    if (frames_seen_ == 0)
        throw Error("received stream shorter than one sounding frame");
    return std::move(report_);
}

SoundingReport sound_stream(const IqStream& received, const CodeSequence& sequence, const SoundingConfig& config)
{
    auto c = config;
    c.sample_rate_hz = received.sample_rate_hz;
    StreamingSounder s(sequence, c, received.origin_time_s);
    s.push(received.samples);
    auto report = std::move(s).finish();
    report.chunks = 1;
    return report;
}

SoundingReport sound_chunked(const std::filesystem::path& capture_path, const SoundingConfig& config,
                             const CodeSequence& sequence)
{
    if (!std::filesystem::exists(capture_path))
        throw Error("capture not found: " + capture_path.string());
    const auto meta = read_iq_metadata(capture_path);
    const std::size_t total = iq_sample_count(capture_path);
    auto c = config;
    c.sample_rate_hz = meta.sample_rate_hz;
    StreamingSounder s(sequence, c, meta.origin_time_s);
    const std::size_t l = s.frame_length();
    const auto chunk_frames = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(c.chunk_duration_s * c.sample_rate_hz / static_cast<double>(l))));
    const std::size_t chunk = chunk_frames * l;
    const std::size_t usable = total / l * l;
    std::size_t chunks = 0;
    for (std::size_t off = 0; off < usable; off += chunk) {
        const auto part = read_iq_range(capture_path, off, std::min(chunk, usable - off));
        s.push(part.samples);
        ++chunks;
    }
    auto report = std::move(s).finish();
    report.chunks = chunks;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line)
{
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw Error(path.string() + ": line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

} // namespace

void write_sounding_report(const SoundingReport& report, const std::filesystem::path& json_path,
                           const std::filesystem::path& csv_path)
{
    std::size_t max_taps = 0;
    std::vector<double> strongest;
    for (const auto& f : report.frames) {
        max_taps = std::max(max_taps, f.taps.size());
        if (const auto* s = f.strongest())
            strongest.push_back(s->gain_db);
    }
    double mean = 0.0, sd = 0.0;
    if (!strongest.empty()) {
        mean = std::accumulate(strongest.begin(), strongest.end(), 0.0) / static_cast<double>(strongest.size());
        for (const double g : strongest)
            sd += (g - mean) * (g - mean);
        sd = strongest.size() > 1 ? std::sqrt(sd / static_cast<double>(strongest.size() - 1)) : 0.0;
    }

    const auto& c = report.config;
    nlohmann::json j;
    j["sample_rate_hz"] = report.sample_rate_hz;
    j["frame_length"] = report.frame_length;
    j["family"] = std::string(to_string(report.family));
    j["chunks"] = report.chunks;
    j["n_frames"] = report.frames.size();
    j["config"] = {{"p_t_db", c.p_t_db},
                   {"g_t_db", c.g_t_db},
                   {"g_r_db", c.g_r_db},
                   {"detection_threshold_db", c.detection_threshold_db},
                   {"guard", c.guard},
                   {"chunk_duration_s", c.chunk_duration_s},
                   {"samples_per_chip", c.samples_per_chip},
                   {"skip_frames", c.skip_frames},
                   {"frame_stride", c.frame_stride}};
    j["strongest_tap"] = {{"frames", strongest.size()}, {"mean_gain_db", mean}, {"sd_gain_db", sd}};
    j["frames_csv"] = csv_path.filename().string();
    {
        std::ofstream out(json_path);
        if (!out)
            throw Error("cannot write " + json_path.string());
        out << j.dump(2) << '\n';
    }

    std::ofstream out(csv_path);
    if (!out)
        throw Error("cannot write " + csv_path.string());
    out << "frame_index,start_time_s,noise_floor_db,n_taps";
    for (std::size_t k = 1; k <= max_taps; ++k)
        out << ",tap_" << k << "_delay_s,tap_" << k << "_gain_db";
    out << '\n';
    for (const auto& f : report.frames) {
        out << f.frame_index << ',' << fmt(f.start_time_s) << ',' << fmt(f.noise_floor_db) << ',' << f.taps.size();
        for (std::size_t k = 0; k < max_taps; ++k) {
            if (k < f.taps.size())
                out << ',' << fmt(f.taps[k].delay_s) << ',' << fmt(f.taps[k].gain_db);
            else
                out << ",,";
        }
        out << '\n';
    }
    if (!out)
        throw Error("failed writing " + csv_path.string());
}

SoundingReport read_sounding_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path)
{
    SoundingReport r;
    {
        std::ifstream in(json_path);
        if (!in)
            throw Error("cannot read " + json_path.string());
        try {
            const auto j = nlohmann::json::parse(in);
            r.sample_rate_hz = j.at("sample_rate_hz").get<double>();
            r.frame_length = j.at("frame_length").get<std::size_t>();
            r.family = parse_family(j.at("family").get<std::string>());
            r.chunks = j.value("chunks", std::size_t{0});
            const auto& c = j.at("config");
            r.config.sample_rate_hz = r.sample_rate_hz;
            r.config.p_t_db = c.value("p_t_db", 0.0);
            r.config.g_t_db = c.value("g_t_db", 0.0);
            r.config.g_r_db = c.value("g_r_db", 0.0);
            r.config.detection_threshold_db = c.value("detection_threshold_db", 6.0);
            r.config.guard = c.value("guard", 2);
            r.config.chunk_duration_s = c.value("chunk_duration_s", 60.0);
            r.config.samples_per_chip = c.value("samples_per_chip", 1);
            r.config.skip_frames = c.value("skip_frames", std::size_t{1});
            r.config.frame_stride = c.value("frame_stride", std::size_t{1});
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed sounding report " + json_path.string() + ": " + e.what());
        }
    }

    std::ifstream in(csv_path);
    if (!in)
        throw Error("cannot read " + csv_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty())
            continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream iss(line);
        while (std::getline(iss, field, ','))
            fields.push_back(field);
        if (!line.empty() && line.back() == ',')
            fields.emplace_back();
        if (fields.size() < 4)
            throw Error(csv_path.string() + ": line " + std::to_string(line_no) + ": truncated row");
        FrameTaps f;
        f.frame_index = static_cast<std::size_t>(parse_double(fields[0], csv_path, line_no));
        f.start_time_s = parse_double(fields[1], csv_path, line_no);
        f.noise_floor_db = parse_double(fields[2], csv_path, line_no);
        const auto n = static_cast<std::size_t>(parse_double(fields[3], csv_path, line_no));
        if (fields.size() < 4 + 2 * n)
            throw Error(csv_path.string() + ": line " + std::to_string(line_no) + ": missing tap columns");
        for (std::size_t k = 0; k < n; ++k) {
            DetectedTap t;
            t.delay_s = parse_double(fields[4 + 2 * k], csv_path, line_no);
            t.gain_db = parse_double(fields[5 + 2 * k], csv_path, line_no);
            t.frame_index = f.frame_index;
            f.taps.push_back(t);
        }
        r.frames.push_back(std::move(f));
    }
    return r;
}

} // namespace chansound
