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

// chansound command-line front end.
//
// Exit status: 0 on success / pass, 2 when a tolerance check fails, 1 on error.

#include "chansound/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace chansound;
namespace fs = std::filesystem;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitTolerance = 2;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    bool serial = false;
};

nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read " + path);
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path + ": " + e.what());
    }
}

std::optional<ScenarioConfig> maybe_scenario(const Globals& g)
{
    if (g.config.empty())
        return std::nullopt;
    auto c = load_scenario(g.config);
    if (g.seed) {
        c.seed = *g.seed;
        c.emulator.seed = *g.seed;
    }
    return c;
}

ScenarioConfig require_scenario(const Globals& g)
{
    auto c = maybe_scenario(g);
    if (!c)
        throw Error("--config <scenario.json> is required");
    return *c;
}

fs::path out_path(const Globals& g, const std::string& name)
{
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

void print_warnings(const ScenarioConfig& c)
{
    for (const auto& w : c.spatial_warnings())
        std::cerr << "warning: " << w << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"chansound: channel emulation and sounding toolchain"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Scenario or heatmap JSON config");
    app.add_option("--seed", g.seed, "Override the random seed");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--serial", g.serial, "Use the serial reference kernels");
    app.fallthrough();

    // generate-sequence
    auto* gen = app.add_subcommand("generate-sequence", "Generate a sounding code");
    SequenceSpec spec;
    std::string family = "glfsr", mask, poly_a, poly_b;
    std::string seq_out;
    gen->add_option("--family", family, "glfsr | gold | golay_a | ls")->capture_default_str();
    gen->add_option("--degree", spec.degree, "Register degree (GLFSR, Gold)")->capture_default_str();
    gen->add_option("--mask", mask, "GLFSR feedback mask (0 = built-in)");
    gen->add_option("--lfsr-seed", spec.seed, "Initial register state")->capture_default_str();
    gen->add_option("--poly-a", poly_a, "Gold polynomial A");
    gen->add_option("--poly-b", poly_b, "Gold polynomial B");
    gen->add_option("--shift", spec.shift, "Gold relative shift")->capture_default_str();
    gen->add_option("--length", spec.length, "Golay length (32, 64, 128)")->capture_default_str();
    gen->add_option("--order", spec.order, "LS order")->capture_default_str();
    gen->add_option("--ifw", spec.ifw, "LS zero-gap width (-1 = N/2)")->capture_default_str();
    gen->add_option("--seq-out", seq_out, "Sequence output file");

    // build-scenario
    auto* build = app.add_subcommand("build-scenario", "Sample mobility and write the paths file");

    // approximate-taps
    auto* approx = app.add_subcommand("approximate-taps", "Paths -> millisecond tap file");
    std::string paths_in;
    approx->add_option("--paths", paths_in, "Paths file (default: synthesize from --config)");

    // emulate
    auto* emu = app.add_subcommand("emulate", "Run one link of the tap file over an IQ stream");
    std::string taps_in, iq_in, iq_out, seq_in;
    int tx = 0, rx = 1;
    double duration = 0.0, rate = 0.0;
    emu->add_option("--taps", taps_in, "Tap file")->required();
    emu->add_option("--tx", tx, "Transmitter id")->capture_default_str();
    emu->add_option("--rx", rx, "Receiver id")->capture_default_str();
    emu->add_option("--in", iq_in, "Input IQ capture (default: repeat the sounding code)");
    emu->add_option("--seq", seq_in, "Sequence file for the generated input");
    emu->add_option("--duration", duration, "Generated input duration, s");
    emu->add_option("--sample-rate", rate, "Generated input sample rate, Hz");
    emu->add_option("--out", iq_out, "Output IQ capture");

    // sound
    auto* snd = app.add_subcommand("sound", "Sound a capture in chunks");
    std::string capture;
    double chunk_s = 0.0;
    snd->add_option("--capture", capture, "Received IQ capture")->required();
    snd->add_option("--seq", seq_in, "Sequence file (default: from --config)");
    snd->add_option("--chunk-s", chunk_s, "Chunk duration override, s");
    std::string report_name = "report";
    snd->add_option("--name", report_name, "Output basename")->capture_default_str();

    // validate
    auto* val = app.add_subcommand("validate", "Compare a sounding report against the tap file");
    std::string report_json, report_csv;
    std::optional<double> base_loss, offset;
    val->add_option("--report", report_json, "Sounding report JSON")->required();
    val->add_option("--frames", report_csv, "Per-frame CSV (default: from the report)");
    val->add_option("--taps", taps_in, "Tap file")->required();
    val->add_option("--tx", tx, "Transmitter id")->capture_default_str();
    val->add_option("--rx", rx, "Receiver id")->capture_default_str();
    val->add_option("--base-loss", base_loss, "Base loss correction, dB");
    val->add_option("--offset", offset, "Offset correction, dB (default: tap file header)");

    // heatmap
    auto* heat = app.add_subcommand("heatmap", "Per-pair mean path loss heatmap");
    std::optional<int> nodes;
    std::optional<double> window;
    heat->add_option("--nodes", nodes, "Node count");
    heat->add_option("--window", window, "Reception window, s");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run the full scenario pipeline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitPass : kExitError;
    }

    try {
        if (g.serial)
            kernels::set_backend(kernels::Backend::Serial);

        if (*gen) {
            spec.family = parse_family(family);
            if (!mask.empty())
                spec.mask = static_cast<std::uint32_t>(std::stoull(mask, nullptr, 0));
            if (!poly_a.empty())
                spec.poly_a = std::stoull(poly_a, nullptr, 0);
            if (!poly_b.empty())
                spec.poly_b = std::stoull(poly_b, nullptr, 0);
            const auto code = make_sequence(spec);
            const auto path = seq_out.empty() ? out_path(g, "sequence.txt") : fs::path(seq_out);
            write_sequence(code, path);
            const auto p = periodic_correlation(code, code);
            std::printf("%s length=%zu peak_to_sidelobe_db=%.3f -> %s\n", std::string(to_string(code.family)).c_str(),
                        code.length(), p.peak_to_sidelobe_db, path.string().c_str());
            return kExitPass;
        }

        if (*build) {
            const auto c = require_scenario(g);
            print_warnings(c);
            const auto m = build_scenario_matrix(c);
            const auto path = out_path(g, "paths.jsonl");
            write_paths_file(m, path);
            std::printf("nodes=%d samples=%d T_s=%.6g -> %s\n", m.n_nodes, m.n_samples, m.sample_interval_s,
                        path.string().c_str());
            return kExitPass;
        }

        if (*approx) {
            const auto c = require_scenario(g);
            ChannelMatrix m;
            if (paths_in.empty()) {
                m = build_scenario_matrix(c);
            } else {
                std::vector<double> speeds;
                for (const auto& n : c.nodes)
                    speeds.push_back(n.trajectory.speed_mps);
                m = assemble_from_records(read_paths_file(paths_in, c.sample_interval_s), c.node_count(),
                                          num_samples(c.total_duration_s, c.sample_interval_s), c.sample_interval_s,
                                          speeds);
            }
            const auto taps = build_scenario_taps(c, m);
            const auto path = out_path(g, "taps.csv");
            write_tap_file(taps, path);
            std::printf("records=%zu duration_ms=%ld K=%d -> %s\n", taps.records.size(), taps.header.duration_ms,
                        taps.header.k, path.string().c_str());
            return kExitPass;
        }

        if (*emu) {
            const auto c = maybe_scenario(g);
            EmulatorConfig ec = c ? c->emulator : EmulatorConfig{};
            if (g.seed)
                ec.seed = *g.seed;
            const auto taps = read_tap_file(taps_in);
            IqStream input;
            if (!iq_in.empty()) {
                input = read_iq(iq_in);
            } else {
                const auto code = !seq_in.empty() ? read_sequence(seq_in)
                                                  : make_sequence(c ? c->sequence : SequenceSpec{});
                const double fs = rate > 0.0 ? rate : (c ? c->sounding.sample_rate_hz : 50e6);
                const double dur = duration > 0.0 ? duration : (c ? c->sounding_duration_s : 0.01);
                const int spc = c ? c->sounding.samples_per_chip : 1;
                const auto frame = bpsk_modulate(code, spc, fs);
                const auto total = static_cast<std::size_t>(std::llround(dur * fs));
                input.sample_rate_hz = fs;
                input.samples.resize(total);
                for (std::size_t i = 0; i < total; ++i)
                    input.samples[i] = frame.samples[i % frame.size()];
            }
            const auto out = apply_channel(input, taps, {tx, rx}, ec);
            const auto path = iq_out.empty() ? out_path(g, "rx_" + std::to_string(tx) + "_" + std::to_string(rx) + ".iq")
                                             : fs::path(iq_out);
            write_iq(out, path);
            std::printf("samples=%zu rate=%.6g -> %s\n", out.size(), out.sample_rate_hz, path.string().c_str());
            return kExitPass;
        }

        if (*snd) {
            const auto c = maybe_scenario(g);
            SoundingConfig sc = c ? c->sounding : SoundingConfig{};
            if (chunk_s > 0.0)
                sc.chunk_duration_s = chunk_s;
            const auto code = !seq_in.empty() ? read_sequence(seq_in) : make_sequence(c ? c->sequence : SequenceSpec{});
            const auto report = sound_chunked(capture, sc, code);
            const auto json = out_path(g, report_name + ".json");
            const auto csv = out_path(g, report_name + ".csv");
            write_sounding_report(report, json, csv);
            std::printf("frames=%zu chunks=%zu -> %s\n", report.frames.size(), report.chunks, json.string().c_str());
            return kExitPass;
        }

        if (*val) {
            const auto c = maybe_scenario(g);
            if (report_csv.empty()) {
                const auto j = read_json(report_json);
                report_csv = (fs::path(report_json).parent_path() / j.value("frames_csv", std::string())).string();
            }
            const auto report = read_sounding_report(report_json, report_csv);
            const auto taps = read_tap_file(taps_in);
            const EmulatorConfig ec = c ? c->emulator : EmulatorConfig{};
            const double bl = base_loss ? *base_loss : pair_base_loss_db(ec, tx, rx);
            const double off = offset ? *offset : taps.header.offset_db;
            const auto v = compare_to_ground_truth(report, taps, {tx, rx}, bl, off,
                                                   c ? c->validation : ValidationOptions{});
            const auto path = out_path(g, "validation_" + std::to_string(tx) + "_" + std::to_string(rx) + ".json");
            std::ofstream(path) << to_json(v).dump(2) << '\n';
            std::printf("%s frames=%zu max|gain err|=%.3f dB max|delay err|=%.3g s\n", v.pass ? "PASS" : "FAIL",
                        v.frames, v.max_abs_mean_gain_error_db, v.max_abs_delay_error_s);
            for (const auto& f : v.failures)
                std::printf("  %s\n", f.c_str());
            return v.pass ? kExitPass : kExitTolerance;
        }

        if (*heat) {
            nlohmann::json j = g.config.empty() ? nlohmann::json::object() : read_json(g.config);
            auto hc = parse_heatmap_config(j);
            if (g.seed)
                hc.emulator.seed = *g.seed;
            if (nodes)
                hc.n_nodes = *nodes;
            if (window)
                hc.window_s = *window;
            const auto h = pathloss_heatmap(hc);
            const auto path = out_path(g, "heatmap.csv");
            write_heatmap_csv(h, path);
            std::printf("nodes=%d mean=%.3f dB sd=%.3f dB -> %s\n", h.n, h.mean_db, h.sd_db, path.string().c_str());
            if (j.contains("tolerance")) {
                const auto& t = j["tolerance"];
                const double target = t.value("mean_db", hc.emulator.base_loss_db);
                const double mean_tol = t.value("mean_tolerance_db", 0.3);
                const double sd_lo = t.value("sd_min_db", 0.0);
                const double sd_hi = t.value("sd_max_db", 1e9);
                const bool ok = std::abs(h.mean_db - target) <= mean_tol && h.sd_db >= sd_lo && h.sd_db <= sd_hi;
                std::printf("%s\n", ok ? "PASS" : "FAIL");
                return ok ? kExitPass : kExitTolerance;
            }
            return kExitPass;
        }

        if (*pipe) {
            const auto c = require_scenario(g);
            print_warnings(c);
            const auto r = run_scenario_pipeline(c, g.out_dir);
            for (const auto& ch : r.checks)
                std::printf("%s %s: %s\n", ch.passed ? "PASS" : "FAIL", ch.name.c_str(), ch.detail.c_str());
            std::printf("%s\n", r.pass ? "PASS" : "FAIL");
            return r.pass ? kExitPass : kExitTolerance;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
