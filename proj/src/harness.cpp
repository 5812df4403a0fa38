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

#include "chansound/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>

namespace chansound {

namespace {

struct RunningStats {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double sd() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

std::string link_name(LinkId l) { return std::to_string(l.first) + "_" + std::to_string(l.second); }

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double circular_distance(double a, double b, double period)
{
    double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

double json_number(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

} // namespace

// ---------------------------------------------------------------------------

ValidationReport compare_to_ground_truth(const SoundingReport& report, const TapFile& taps, LinkId link,
                                         double base_loss_db, double offset_db, const ValidationOptions& options)
{
    const auto timeline = taps.timeline(link.first, link.second);
    const double dt = taps.header.grid_dt_s;
    const double fs = report.sample_rate_hz;
    if (!(fs > 0.0) || report.frame_length == 0)
        throw Error("sounding report has no sample rate or frame length");
    const double period = static_cast<double>(report.frame_length) / fs;
    const double window = options.match_window_steps * dt + 1e-12;
    const double half_frame = 0.5 * period;

    ValidationReport v;
    std::vector<RunningStats> gain, gain_err;
    std::vector<RunningStats> gt_gain;
    std::vector<TapErrorStats> stats;
    RunningStats spread;

    for (const auto& f : report.frames) {
        const double tc = f.start_time_s + half_frame;
        const auto ms = static_cast<long>(std::floor(tc * 1e3 + 1e-9));
        if (ms < 0 || ms >= static_cast<long>(timeline.size()))
            continue;
        ++v.frames;
        const auto& set = timeline[static_cast<std::size_t>(ms)].taps;

        struct Truth {
            double delay;
            double gain;
        };
        std::vector<Truth> truth;
        if (!set.empty()) {
            std::size_t strongest = 0;
            for (std::size_t k = 1; k < set.size(); ++k) {
                if (std::abs(set[k].coeff) > std::abs(set[strongest].coeff))
                    strongest = k;
            }
            for (const auto& t : set) {
                double d = static_cast<double>(t.delay_index - set[strongest].delay_index) * dt;
                d = std::fmod(d, period);
                if (d < 0.0)
                    d += period;
                truth.push_back({d, amplitude_to_db(std::abs(t.coeff)) - offset_db});
            }
            std::sort(truth.begin(), truth.end(), [](const Truth& a, const Truth& b) { return a.delay < b.delay; });
        }
        if (stats.size() < truth.size()) {
            for (std::size_t k = stats.size(); k < truth.size(); ++k) {
                TapErrorStats s;
                s.ordinal = k;
                s.gt_delay_s = truth[k].delay;
                stats.push_back(s);
            }
            gain.resize(truth.size());
            gain_err.resize(truth.size());
            gt_gain.resize(truth.size());
        }

        // Strongest truth first, each grabbing its nearest unused detection.
        std::vector<std::size_t> order(truth.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return truth[a].gain > truth[b].gain; });
        std::vector<bool> used(f.taps.size(), false);
        std::vector<double> matched_gain(truth.size(), kNegInf);
        for (const auto k : order) {
            std::size_t best = f.taps.size();
            double best_d = window;
            for (std::size_t m = 0; m < f.taps.size(); ++m) {
                if (used[m])
                    continue;
                const double d = circular_distance(f.taps[m].delay_s, truth[k].delay, period);
                if (d <= best_d) {
                    best_d = d;
                    best = m;
                }
            }
            gt_gain[k].add(truth[k].gain);
            if (best == f.taps.size()) {
                ++stats[k].missed;
                ++v.missed;
                continue;
            }
            used[best] = true;
            const double corrected = f.taps[best].gain_db + base_loss_db - offset_db;
            double derr = f.taps[best].delay_s - truth[k].delay;
            if (derr > half_frame)
                derr -= period;
            else if (derr < -half_frame)
                derr += period;
            ++stats[k].matched;
            stats[k].delay_error_max_abs_s = std::max(stats[k].delay_error_max_abs_s, std::abs(derr));
            gain[k].add(corrected);
            gain_err[k].add(corrected - truth[k].gain);
            v.delay_errors_s.push_back(derr);
            v.gain_errors_db.push_back(corrected - truth[k].gain);
            matched_gain[k] = corrected;
        }
        v.spurious += static_cast<std::size_t>(std::count(used.begin(), used.end(), false));

        StrongestSample ss;
        ss.frame_index = f.frame_index;
        ss.time_s = f.start_time_s;
        ss.ground_truth_gain_db = kNegInf;
        for (const auto& t : truth)
            ss.ground_truth_gain_db = std::max(ss.ground_truth_gain_db, t.gain);
        if (const auto* s = f.strongest())
            ss.sounded_gain_db = s->gain_db + base_loss_db - offset_db;
        v.strongest.push_back(ss);

        if (truth.size() >= 2) {
            const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end(),
                                                      [](const Truth& a, const Truth& b) { return a.gain < b.gain; });
            const auto ilo = static_cast<std::size_t>(lo - truth.begin());
            const auto ihi = static_cast<std::size_t>(hi - truth.begin());
            if (std::isfinite(matched_gain[ilo]) && std::isfinite(matched_gain[ihi])) {
                const double sounded = matched_gain[ihi] - matched_gain[ilo];
                spread.add(std::abs(sounded - (hi->gain - lo->gain)));
            }
        }
    }
    if (v.frames == 0)
        throw Error("no sounding frames overlap the tap file");

    for (std::size_t k = 0; k < stats.size(); ++k) {
        auto& s = stats[k];
        s.gt_gain_mean_db = gt_gain[k].mean;
        s.gain_mean_db = gain[k].mean;
        s.gain_sd_db = gain[k].sd();
        s.gain_error_mean_db = gain_err[k].mean;
        s.gain_error_sd_db = gain_err[k].sd();
        v.max_abs_delay_error_s = std::max(v.max_abs_delay_error_s, s.delay_error_max_abs_s);
        if (s.matched > 0)
            v.max_abs_mean_gain_error_db = std::max(v.max_abs_mean_gain_error_db, std::abs(s.gain_error_mean_db));
    }
    v.taps = std::move(stats);
    v.spread_error_mean_db = spread.mean;
    v.spread_error_sd_db = spread.sd();

    if (options.strict && v.missed > 0)
        v.failures.push_back(std::to_string(v.missed) + " ground-truth taps missed");
    if (options.strict && v.spurious > 0)
        v.failures.push_back(std::to_string(v.spurious) + " spurious detections");
    if (v.max_abs_delay_error_s > options.delay_tolerance_steps * dt + 1e-12)
        v.failures.push_back("delay error " + fmt(v.max_abs_delay_error_s) + " s exceeds tolerance");
    for (const auto& s : v.taps) {
        if (s.matched > 0 && std::abs(s.gain_error_mean_db) > options.gain_tolerance_db) {
            v.failures.push_back("tap " + std::to_string(s.ordinal) + " mean gain error " + fmt(s.gain_error_mean_db) +
                                 " dB exceeds " + fmt(options.gain_tolerance_db) + " dB");
        }
    }
    v.pass = v.failures.empty();
    return v;
}

nlohmann::json to_json(const ValidationReport& v)
{
    nlohmann::json j;
    j["frames"] = v.frames;
    j["spurious"] = v.spurious;
    j["missed"] = v.missed;
    j["max_abs_delay_error_s"] = v.max_abs_delay_error_s;
    j["max_abs_mean_gain_error_db"] = v.max_abs_mean_gain_error_db;
    j["spread_error_mean_db"] = v.spread_error_mean_db;
    j["spread_error_sd_db"] = v.spread_error_sd_db;
    j["taps"] = nlohmann::json::array();
    for (const auto& s : v.taps) {
        j["taps"].push_back({{"ordinal", s.ordinal},
                             {"gt_delay_s", s.gt_delay_s},
                             {"gt_gain_mean_db", json_number(s.gt_gain_mean_db)},
                             {"matched", s.matched},
                             {"missed", s.missed},
                             {"delay_error_max_abs_s", s.delay_error_max_abs_s},
                             {"gain_mean_db", json_number(s.gain_mean_db)},
                             {"gain_sd_db", s.gain_sd_db},
                             {"gain_error_mean_db", s.gain_error_mean_db},
                             {"gain_error_sd_db", s.gain_error_sd_db}});
    }
    j["pass"] = v.pass;
    j["failures"] = v.failures;
    return j;
}

// ---------------------------------------------------------------------------

std::vector<LossSample> link_loss_series(const SoundingReport& report, const ChannelMatrix& matrix, LinkId link,
                                         const std::vector<RadioParams>& radios, double base_loss_db,
                                         double offset_db)
{
    const auto [tx, rx] = link;
    if (tx < 0 || rx < 0 || tx >= matrix.n_nodes || rx >= matrix.n_nodes)
        throw Error("link outside the channel matrix");
    if (static_cast<int>(radios.size()) != matrix.n_nodes)
        throw Error("one radio parameter set per node is required");
    const int ns = matrix.n_samples;
    std::vector<RunningStats> acc(static_cast<std::size_t>(ns));
    const double half_frame = 0.5 * static_cast<double>(report.frame_length) / report.sample_rate_hz;
    for (const auto& f : report.frames) {
        const auto* s = f.strongest();
        if (!s)
            continue;
        const double tc = f.start_time_s + half_frame;
        int idx = static_cast<int>(std::floor(tc / matrix.sample_interval_s * (1.0 + 1e-12))) + 1;
        idx = std::clamp(idx, 1, ns);
        acc[static_cast<std::size_t>(idx - 1)].add(-(s->gain_db + base_loss_db - offset_db));
    }

    std::vector<LossSample> out;
    const double floor = noise_floor_dbm(radios[static_cast<std::size_t>(rx)]);
    const double p_tx = radios[static_cast<std::size_t>(tx)].tx_power_dbm;
    for (int s = 1; s <= ns; ++s) {
        LossSample ls;
        ls.s = s;
        ls.time_s = matrix.times[static_cast<std::size_t>(s - 1)];
        const auto pruned = prune_paths(matrix.at(tx, rx, s), floor);
        ls.ground_truth_loss_db = pruned.paths.empty() ? std::numeric_limits<double>::infinity()
                                                       : link_path_loss_db(pruned, p_tx).loss_db;
        const auto& a = acc[static_cast<std::size_t>(s - 1)];
        ls.frames = a.n;
        ls.sounded_loss_db = a.n > 0 ? a.mean : std::numeric_limits<double>::quiet_NaN();
        out.push_back(ls);
    }
    return out;
}

double series_rmse_db(const std::vector<LossSample>& series)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : series) {
        if (s.frames == 0 || !std::isfinite(s.ground_truth_loss_db) || !std::isfinite(s.sounded_loss_db))
            continue;
        const double d = s.sounded_loss_db - s.ground_truth_loss_db;
        sum += d * d;
        ++n;
    }
    if (n == 0)
        throw Error("no overlapping samples between sounded and ground-truth series");
    return std::sqrt(sum / static_cast<double>(n));
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window)
{
    if (window == 0)
        throw Error("smoothing window must be positive");
    if (x.size() < window)
        return {};
    std::vector<double> out(x.size() - window + 1);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::accumulate(x.begin() + static_cast<std::ptrdiff_t>(i),
                                 x.begin() + static_cast<std::ptrdiff_t>(i + window), 0.0) /
                 static_cast<double>(window);
    return out;
}

bool is_u_shaped(const std::vector<double>& gains_db, std::size_t window)
{
    const auto sm = moving_average(gains_db, window);
    if (sm.size() < 3)
        return false;
    const auto t = static_cast<std::size_t>(std::min_element(sm.begin(), sm.end()) - sm.begin());
    if (t == 0 || t + 1 == sm.size())
        return false;
    for (std::size_t i = 1; i <= t; ++i) {
        if (!(sm[i] < sm[i - 1]))
            return false;
    }
    for (std::size_t i = t + 1; i < sm.size(); ++i) {
        if (!(sm[i] > sm[i - 1]))
            return false;
    }
    return true;
}

void write_loss_series_csv(const std::vector<LossSample>& series, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "s,time_s,ground_truth_loss_db,sounded_loss_db,frames\n";
    for (const auto& s : series)
        out << s.s << ',' << fmt(s.time_s) << ',' << fmt(s.ground_truth_loss_db) << ',' << fmt(s.sounded_loss_db)
            << ',' << s.frames << '\n';
}

// ---------------------------------------------------------------------------

namespace {

/// Drives one link with the repeated code in frame-aligned blocks.
void drive_link(const TapFile& taps, LinkId link, const CodeSequence& code, const EmulatorConfig& emulator,
                const SoundingConfig& sounding, double duration_s, const std::function<void(std::span<const Complex>)>& sink)
{
    const auto ref = reference_waveform(code, sounding.samples_per_chip);
    const std::size_t l = ref.size();
    const double fs = sounding.sample_rate_hz;
    const auto total = static_cast<std::size_t>(std::llround(duration_s * fs));
    if (total < l)
        throw Error("sounding duration shorter than one frame");
    LinkEmulator emu(taps, link.first, link.second, fs, 0.0, emulator);

    const std::size_t frames_per_block = std::max<std::size_t>(1, (1u << 16) / l);
    std::vector<Complex> tx(frames_per_block * l);
    for (std::size_t i = 0; i < tx.size(); ++i)
        tx[i] = Complex(ref[i % l], 0.0);
    std::vector<Complex> rx(tx.size());
    for (std::size_t done = 0; done < total;) {
        const std::size_t n = std::min(tx.size(), total - done);
        emu.process(std::span<const Complex>(tx).first(n), std::span<Complex>(rx).first(n));
        sink(std::span<const Complex>(rx).first(n));
        done += n;
    }
}

} // namespace

SoundingReport emulate_and_sound(const TapFile& taps, LinkId link, const CodeSequence& code,
                                 const EmulatorConfig& emulator, const SoundingConfig& sounding, double duration_s,
                                 const std::optional<std::filesystem::path>& capture)
{
    sounding.validate();
    if (capture) {
        {
            std::ofstream trunc(*capture, std::ios::binary | std::ios::trunc);
            if (!trunc)
                throw Error("cannot create capture " + capture->string());
        }
        write_iq_metadata({sounding.sample_rate_hz, 0.0}, *capture);
        drive_link(taps, link, code, emulator, sounding, duration_s,
                   [&](std::span<const Complex> block) { append_iq(block, *capture); });
        return sound_chunked(*capture, sounding, code);
    }
    StreamingSounder sounder(code, sounding, 0.0);
    drive_link(taps, link, code, emulator, sounding, duration_s,
               [&](std::span<const Complex> block) { sounder.push(block); });
    auto report = std::move(sounder).finish();
    report.chunks = 1;
    return report;
}

TapFile unit_tap_file(int n_nodes, double grid_dt_s, long duration_ms)
{
    if (n_nodes < 2)
        throw Error("at least two nodes are required");
    TapFile f;
    f.header = {n_nodes, grid_dt_s, 4, duration_ms, 0.0};
    for (long ms = 0; ms < duration_ms; ++ms) {
        for (int i = 0; i < n_nodes; ++i) {
            for (int j = 0; j < n_nodes; ++j) {
                if (i == j)
                    continue;
                TapRecord r;
                r.timestamp_ms = ms;
                r.tx = i;
                r.rx = j;
                r.taps.grid_dt_s = grid_dt_s;
                r.taps.timestamp_ms = ms;
                r.taps.taps.push_back({0, Complex(1.0, 0.0)});
                f.records.push_back(std::move(r));
            }
        }
    }
    return f;
}

// ---------------------------------------------------------------------------

HeatmapConfig parse_heatmap_config(const nlohmann::json& j)
{
    try {
        HeatmapConfig c;
        c.n_nodes = j.value("n_nodes", c.n_nodes);
        c.window_s = j.value("window_s", c.window_s);
        c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
        c.emulator.seed = j.value("seed", c.emulator.seed);
        if (j.contains("emulator"))
            c.emulator = parse_emulator_config(j["emulator"], c.emulator);
        if (j.contains("sequence"))
            c.sequence = parse_sequence_spec(j["sequence"]);
        if (j.contains("sounding"))
            c.sounding = parse_sounding_config(j["sounding"], c.sounding);
        c.sounding.sample_rate_hz = c.sample_rate_hz;
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed heatmap config: ") + e.what());
    }
}

PathLossHeatmap pathloss_heatmap(const HeatmapConfig& config)
{
    const int n = config.n_nodes;
    if (n < 2)
        throw Error("heatmap needs at least two nodes");
    if (!(config.window_s > 0.0))
        throw Error("heatmap window must be positive");
    const auto code = make_sequence(config.sequence);
    auto sc = config.sounding;
    sc.sample_rate_hz = config.sample_rate_hz;
    const long ms = std::max(1L, static_cast<long>(std::ceil(config.window_s * 1e3 - 1e-9)));
    const auto taps = unit_tap_file(n, 1.0 / config.sample_rate_hz, ms);

    std::vector<LinkId> pairs;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j)
                pairs.emplace_back(i, j);
        }
    }

    PathLossHeatmap h;
    h.n = n;
    h.cells.assign(static_cast<std::size_t>(n * n), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> loss(pairs.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(pairs.size());
    const bool parallel = kernels::backend() == kernels::Backend::OpenMP;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        try {
            const auto report = emulate_and_sound(taps, pairs[p], code, config.emulator, sc, config.window_s);
            RunningStats st;
            for (const auto& f : report.frames) {
                if (const auto* s = f.strongest())
                    st.add(-s->gain_db);
            }
            if (st.n > 0)
                loss[p] = st.mean;
        } catch (const std::exception& e) {
            errors[p] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty())
            throw Error("heatmap link failed: " + e);
    }

    RunningStats all;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        h.cells[static_cast<std::size_t>(pairs[p].first * n + pairs[p].second)] = loss[p];
        if (std::isfinite(loss[p]))
            all.add(loss[p]);
    }
    h.mean_db = all.mean;
    h.sd_db = all.sd();
    return h;
}

void write_heatmap_csv(const PathLossHeatmap& h, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "tx\\rx";
    for (int j = 0; j < h.n; ++j)
        out << ',' << j;
    out << '\n';
    for (int i = 0; i < h.n; ++i) {
        out << i;
        for (int j = 0; j < h.n; ++j) {
            const double v = h.at(i, j);
            out << ',' << (std::isfinite(v) ? fmt(v) : std::string());
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

ChannelMatrix build_scenario_matrix(const ScenarioConfig& config)
{
    if (config.node_count() < 1)
        throw Error("scenario has no nodes");
    if (config.link_paths.empty())
        return build_channel_matrix(config.nodes, config.geometry, config.sample_interval_s, config.total_duration_s);

    const int n = config.n_nodes;
    std::map<LinkId, std::vector<RayPath>> table;
    for (const auto& lp : config.link_paths) {
        if (lp.link.first < 0 || lp.link.second < 0 || lp.link.first >= n || lp.link.second >= n ||
            lp.link.first == lp.link.second)
            throw Error("path list for invalid pair " + std::to_string(lp.link.first) + "->" +
                        std::to_string(lp.link.second));
        table[lp.link] = lp.paths;
    }
    MatrixLayout layout;
    layout.n_nodes = n;
    layout.n_samples = num_samples(config.total_duration_s, config.sample_interval_s);
    layout.sample_interval_s = config.sample_interval_s;
    layout.speeds_mps.assign(static_cast<std::size_t>(n), 0.0);
    layout.max_samples.assign(static_cast<std::size_t>(n), 1);
    return assemble_channel_matrix(layout, [&](int tx, int rx, int, int) {
        const auto it = table.find({tx, rx});
        return it == table.end() ? std::vector<RayPath>{} : it->second;
    });
}

TapFile build_scenario_taps(const ScenarioConfig& config, const ChannelMatrix& matrix)
{
    return build_tap_file(matrix, config.radios(), config.taps, config.tap_duration_ms());
}

namespace {

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const std::exception& e) {
        throw Error(std::string("stage '") + name + "' failed: " + e.what());
    }
}

void write_strongest_csv(const ValidationReport& v, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "frame_index,time_s,ground_truth_gain_db,sounded_gain_db\n";
    for (const auto& s : v.strongest)
        out << s.frame_index << ',' << fmt(s.time_s) << ',' << fmt(s.ground_truth_gain_db) << ','
            << fmt(s.sounded_gain_db) << '\n';
}

std::vector<double> sounded_losses(const std::vector<LossSample>& series)
{
    std::vector<double> out;
    for (const auto& s : series) {
        if (s.frames > 0 && std::isfinite(s.sounded_loss_db))
            out.push_back(s.sounded_loss_db);
    }
    return out;
}

} // namespace

PipelineResult run_scenario_pipeline(const ScenarioConfig& config, const std::filesystem::path& out_dir)
{
    PipelineResult result;
    result.warnings = config.spatial_warnings();
    stage("setup", [&] {
        if (config.node_count() < 2)
            throw Error("scenario needs at least two nodes");
        std::filesystem::create_directories(out_dir);
        return 0;
    });

    const auto matrix = stage("mobility", [&] {
        auto m = build_scenario_matrix(config);
        write_paths_file(m, out_dir / "paths.jsonl");
        return m;
    });
    const auto taps = stage("tap_approx", [&] {
        auto t = build_scenario_taps(config, matrix);
        write_tap_file(t, out_dir / "taps.csv");
        return t;
    });
    const auto code = stage("sequences", [&] {
        auto c = make_sequence(config.sequence);
        write_sequence(c, out_dir / "sequence.txt");
        return c;
    });

    auto links = config.links;
    if (links.empty())
        links.emplace_back(0, 1);
    const auto radios = config.radios();
    std::map<LinkId, std::vector<LossSample>> series_by_link;

    for (const auto& link : links) {
        const auto name = link_name(link);
        SoundingReport report;
        if (config.write_captures) {
            const auto dir = out_dir / "captures";
            const auto capture = dir / ("rx_" + name + ".iq");
            stage("emulator", [&] {
                std::filesystem::create_directories(dir);
                return 0;
            });
            report = stage("sounder", [&] {
                return emulate_and_sound(taps, link, code, config.emulator, config.sounding, config.sounding_duration_s,
                                         capture);
            });
        } else {
            report = stage("emulator", [&] {
                return emulate_and_sound(taps, link, code, config.emulator, config.sounding, config.sounding_duration_s);
            });
        }
        stage("sounder", [&] {
            write_sounding_report(report, out_dir / ("report_" + name + ".json"), out_dir / ("frames_" + name + ".csv"));
            return 0;
        });

        LinkOutcome lo;
        lo.link = link;
        lo.frames = report.frames.size();
        lo.base_loss_db = pair_base_loss_db(config.emulator, link.first, link.second);
        stage("compare", [&] {
            lo.validation = compare_to_ground_truth(report, taps, link, lo.base_loss_db, taps.header.offset_db,
                                                    config.validation);
            lo.series = link_loss_series(report, matrix, link, radios, lo.base_loss_db, taps.header.offset_db);
            std::ofstream vout(out_dir / ("validation_" + name + ".json"));
            if (!vout)
                throw Error("cannot write validation report");
            vout << to_json(lo.validation).dump(2) << '\n';
            write_strongest_csv(lo.validation, out_dir / ("strongest_" + name + ".csv"));
            write_loss_series_csv(lo.series, out_dir / ("pathloss_" + name + ".csv"));
            return 0;
        });
        series_by_link[link] = lo.series;
        result.links.push_back(std::move(lo));
    }

    const auto& vo = config.validation;
    for (const auto& lo : result.links) {
        const auto name = link_name(lo.link);
        if (vo.check_taps) {
            std::string detail = "max |mean gain error| " + fmt(lo.validation.max_abs_mean_gain_error_db) +
                                 " dB, max |delay error| " + fmt(lo.validation.max_abs_delay_error_s) + " s";
            for (const auto& f : lo.validation.failures)
                detail += "; " + f;
            result.checks.push_back({"taps " + name, lo.validation.pass, detail});
        }
        if (vo.check_series) {
            double rmse = std::numeric_limits<double>::infinity();
            try {
                rmse = series_rmse_db(lo.series);
            } catch (const Error&) {
            }
            result.checks.push_back({"series_rmse " + name, rmse <= vo.rmse_tolerance_db,
                                     "RMSE " + fmt(rmse) + " dB (limit " + fmt(vo.rmse_tolerance_db) + ")"});
        }
    }
    for (const auto& link : vo.u_shape_links) {
        SoundingReport none;
        none.sample_rate_hz = 1.0;
        none.frame_length = 1;
        const auto series = link_loss_series(none, matrix, link, radios, 0.0, 0.0);
        std::vector<double> gains;
        for (const auto& s : series)
            gains.push_back(-s.ground_truth_loss_db);
        const bool ok = is_u_shaped(gains, vo.smoothing_window);
        result.checks.push_back({"u_shape " + link_name(link), ok,
                                 "ground-truth gain, " + std::to_string(vo.smoothing_window) + "-sample smoothing"});
    }
    if (vo.comoving_link && vo.reference_link) {
        const auto a = series_by_link.find(*vo.comoving_link);
        const auto b = series_by_link.find(*vo.reference_link);
        if (a == series_by_link.end() || b == series_by_link.end())
            throw Error("stage 'compare' failed: co-moving and reference links must both be sounded");
        const auto ca = sounded_losses(a->second);
        const auto cb = sounded_losses(b->second);
        RunningStats st;
        for (const double x : ca)
            st.add(x);
        const double range = cb.empty() ? 0.0 : *std::max_element(cb.begin(), cb.end()) - *std::min_element(cb.begin(), cb.end());
        const bool ok = !ca.empty() && st.sd() <= vo.comoving_ratio * range;
        result.checks.push_back({"comoving " + link_name(*vo.comoving_link), ok,
                                 "SD " + fmt(st.sd()) + " dB vs " + fmt(vo.comoving_ratio) + " x range " + fmt(range) +
                                     " dB of " + link_name(*vo.reference_link)});
    }

    result.pass = std::all_of(result.checks.begin(), result.checks.end(), [](const PipelineCheck& c) { return c.passed; });

    nlohmann::json summary;
    summary["name"] = config.name;
    summary["seed"] = config.emulator.seed;
    summary["pass"] = result.pass;
    summary["warnings"] = result.warnings;
    summary["checks"] = nlohmann::json::array();
    for (const auto& c : result.checks)
        summary["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    summary["links"] = nlohmann::json::array();
    for (const auto& lo : result.links) {
        nlohmann::json l{{"tx", lo.link.first}, {"rx", lo.link.second}, {"frames", lo.frames},
                         {"base_loss_db", lo.base_loss_db}, {"validation", to_json(lo.validation)}};
        try {
            l["series_rmse_db"] = series_rmse_db(lo.series);
        } catch (const Error&) {
            l["series_rmse_db"] = nullptr;
        }
        summary["links"].push_back(l);
    }
    std::ofstream sout(out_dir / "summary.json");
    if (!sout)
        throw Error("cannot write summary");
    sout << summary.dump(2) << '\n';
    return result;
}

PipelineResult run_scenario_pipeline(const std::filesystem::path& config_path, const std::filesystem::path& out_dir)
{
    const auto config = stage("config", [&] { return load_scenario(config_path); });
    return run_scenario_pipeline(config, out_dir);
}

} // namespace chansound
