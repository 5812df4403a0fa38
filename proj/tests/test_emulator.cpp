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
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>

using namespace chansound;
using Catch::Approx;

namespace {

TapFile link_file(std::vector<std::vector<Tap>> per_ms, double grid = 20e-9)
{
    TapFile f;
    f.header = {2, grid, 4, static_cast<long>(per_ms.size()), 0.0};
    for (std::size_t ms = 0; ms < per_ms.size(); ++ms)
        f.records.push_back({static_cast<long>(ms), 0, 1, {per_ms[ms], grid, static_cast<long>(ms)}});
    return f;
}

EmulatorConfig quiet(double base_loss = 0.0)
{
    EmulatorConfig c;
    c.base_loss_db = base_loss;
    c.noise_floor_db.reset();
    return c;
}

IqStream random_input(std::size_t n, std::uint64_t seed, double rate = 50e6)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    IqStream s;
    s.sample_rate_hz = rate;
    s.samples.resize(n);
    for (auto& v : s.samples)
        v = {g(rng), g(rng)};
    return s;
}

double max_abs_diff(const std::vector<Complex>& a, const std::vector<Complex>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("identity tap, no loss, no noise")
{
    const auto in = random_input(10000, 1);
    const auto out = apply_channel(in, link_file({{{0, {1, 0}}}}), {0, 1}, quiet());
    CHECK(out.samples == in.samples);
    CHECK(out.sample_rate_hz == in.sample_rate_hz);
}

TEST_CASE("base loss scales every sample")
{
    const auto in = random_input(5000, 2);
    const auto out = apply_channel(in, link_file({{{0, {1, 0}}}}), {0, 1}, quiet(57.55));
    const double s = std::pow(10.0, -57.55 / 20.0);
    for (std::size_t i = 0; i < in.size(); ++i)
        CHECK(std::abs(out.samples[i] - s * in.samples[i]) <= 1e-15 * std::abs(in.samples[i]) + 1e-300);
}

TEST_CASE("delay-only tap shifts the input and peaks the cross-correlation at d")
{
    const std::size_t d = 64;
    const auto in = random_input(4000, 3);
    const auto out = apply_channel(in, link_file({{{static_cast<int>(d), {1, 0}}}}), {0, 1}, quiet());
    for (std::size_t i = 0; i < d; ++i)
        CHECK(out.samples[i] == Complex{});
    for (std::size_t i = d; i < in.size(); ++i)
        CHECK(out.samples[i] == in.samples[i - d]);

    std::size_t best = 0;
    double best_mag = 0.0;
    for (std::size_t lag = 0; lag < 200; ++lag) {
        Complex acc = 0.0;
        for (std::size_t n = 0; n + lag < in.size(); ++n)
            acc += out.samples[n + lag] * std::conj(in.samples[n]);
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = lag;
        }
    }
    CHECK(best == d);
}

TEST_CASE("multi-tap output matches the direct FIR oracle")
{
    const std::vector<Tap> taps{{0, {0.7, 0.1}}, {3, {-0.2, 0.4}}, {50, {0.05, -0.05}}};
    const auto in = random_input(30000, 4);
    const auto out = apply_channel(in, link_file({taps}, 20e-9), {0, 1}, quiet(10.0));
    std::vector<std::pair<std::size_t, oracle::cd>> ot;
    for (const auto& t : taps)
        ot.emplace_back(static_cast<std::size_t>(t.delay_index), t.coeff);
    const auto want = oracle::fir(in.samples, ot, std::pow(10.0, -0.5));
    CHECK(max_abs_diff(out.samples, want) < 1e-13);
}

TEST_CASE("grid indices map to sample offsets at lower rates")
{
    // 100 ns grid at 10 MS/s: one sample per grid step.
    const auto in = random_input(3000, 5, 10e6);
    const auto out = apply_channel(in, link_file({{{7, {1, 0}}}}, 100e-9), {0, 1}, quiet());
    for (std::size_t i = 7; i < in.size(); ++i)
        CHECK(out.samples[i] == in.samples[i - 7]);
    // 20 ns grid is not representable at 10 MS/s.
    CHECK_THROWS_AS(apply_channel(in, link_file({{{1, {1, 0}}}}, 20e-9), {0, 1}, quiet()), Error);
    CHECK_THROWS_AS(apply_channel(in, link_file({{{0, {1, 0}}}}), {1, 0}, quiet()), Error);
}

TEST_CASE("linearity")
{
    const auto taps = link_file({{{0, {0.5, 0.2}}, {9, {0.1, -0.3}}}, {{2, {0.3, 0.0}}}});
    const auto x = random_input(80000, 6);
    const Complex alpha(2.5, -1.25);
    IqStream ax = x;
    for (auto& v : ax.samples)
        v *= alpha;
    const auto y = apply_channel(x, taps, {0, 1}, quiet(57.55));
    const auto ay = apply_channel(ax, taps, {0, 1}, quiet(57.55));
    double peak = 0.0, err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        peak = std::max(peak, std::abs(ay.samples[i]));
        err = std::max(err, std::abs(ay.samples[i] - alpha * y.samples[i]));
    }
    CHECK(err <= 1e-12 * peak);
}

TEST_CASE("superposition across taps")
{
    const Tap a{0, {0.5, 0.2}}, b{12, {0.1, -0.3}};
    const auto x = random_input(20000, 7);
    const auto both = apply_channel(x, link_file({{a, b}}), {0, 1}, quiet(3.0));
    const auto ya = apply_channel(x, link_file({{a}}), {0, 1}, quiet(3.0));
    const auto yb = apply_channel(x, link_file({{b}}), {0, 1}, quiet(3.0));
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(both.samples[i] - (ya.samples[i] + yb.samples[i])) < 1e-14);
}

TEST_CASE("shift covariance within one coherence interval")
{
    const auto taps = link_file({{{0, {0.5, 0.2}}, {9, {0.1, -0.3}}}});
    const auto x = random_input(40000, 8);
    const std::size_t m = 123;
    IqStream shifted = x;
    shifted.samples.insert(shifted.samples.begin(), m, Complex{});
    shifted.samples.resize(x.size());
    const auto y = apply_channel(x, taps, {0, 1}, quiet());
    const auto ys = apply_channel(shifted, taps, {0, 1}, quiet());
    for (std::size_t i = m; i < x.size(); ++i)
        CHECK(ys.samples[i] == y.samples[i - m]);
}

TEST_CASE("coefficient doubling at 1 ms steps the output by 6.02 dB")
{
    const auto taps = link_file({{{0, {0.3, 0.4}}}, {{0, {0.6, 0.8}}}});
    IqStream ones;
    ones.sample_rate_hz = 50e6;
    ones.samples.assign(100000, Complex{1.0, 0.0});
    const auto y = apply_channel(ones, taps, {0, 1}, quiet(57.55));
    const std::size_t boundary = 50000;
    const double step = 20 * std::log10(std::abs(y.samples[boundary]) / std::abs(y.samples[boundary - 1]));
    CHECK(step == Approx(20 * std::log10(2.0)).margin(1e-9));
    CHECK(step == Approx(6.02).margin(0.005));
    CHECK(std::abs(y.samples[boundary - 2]) == std::abs(y.samples[boundary - 1]));
    CHECK(std::abs(y.samples[boundary + 1]) == std::abs(y.samples[boundary]));
}

TEST_CASE("block-wise streaming equals whole-stream processing")
{
    const auto taps = link_file({{{0, {0.5, 0.2}}, {9, {0.1, -0.3}}}, {{4, {0.2, 0.0}}}, {{0, {1.0, 0.0}}}});
    const auto x = random_input(150000, 9);
    EmulatorConfig cfg;
    cfg.seed = 5;
    const auto whole = apply_channel(x, taps, {0, 1}, cfg);
    LinkEmulator emu(taps, 0, 1, x.sample_rate_hz, 0.0, cfg);
    std::vector<Complex> out(x.size());
    std::size_t pos = 0;
    for (std::size_t block : {1u, 777u, 49999u, 3u, 60000u}) {
        emu.process(std::span(x.samples).subspan(pos, block), std::span(out).subspan(pos, block));
        pos += block;
    }
    emu.process(std::span(x.samples).subspan(pos), std::span(out).subspan(pos));
    CHECK(out == whole.samples);
}

TEST_CASE("serial and openmp backends give identical output")
{
    const auto taps = link_file({{{0, {0.5, 0.2}}, {9, {0.1, -0.3}}, {30, {0.01, 0.0}}}});
    const auto x = random_input(60000, 10);
    EmulatorConfig cfg;
    kernels::set_backend(kernels::Backend::Serial);
    const auto s = apply_channel(x, taps, {0, 1}, cfg);
    kernels::set_backend(kernels::Backend::OpenMP);
    const auto o = apply_channel(x, taps, {0, 1}, cfg);
    CHECK(s.samples == o.samples);
}

TEST_CASE("output power of a unit tap with base loss L")
{
    const auto x = random_input(200000, 11);
    const double loss = 57.55;
    const auto y = apply_channel(x, link_file({{{0, {1, 0}}}}), {0, 1}, quiet(loss));
    double pin = 0.0, pout = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        pin += std::norm(x.samples[i]);
        pout += std::norm(y.samples[i]);
    }
    CHECK(10 * std::log10(pout / pin) == Approx(-loss).margin(0.01));
}

TEST_CASE("make_noise determinism, silence and power")
{
    CHECK(make_noise(1000, -30.0, 42) == make_noise(1000, -30.0, 42));
    CHECK(make_noise(1000, -30.0, 42) != make_noise(1000, -30.0, 43));
    const auto zeros = make_noise(100, kNegInf, 1);
    CHECK(std::all_of(zeros.begin(), zeros.end(), [](Complex v) { return v == Complex{}; }));
    const auto n = make_noise(1000000, -20.0, 7);
    double p = 0.0;
    for (auto v : n)
        p += std::norm(v);
    p /= static_cast<double>(n.size());
    CHECK(p == Approx(0.01).epsilon(0.01));
}

TEST_CASE("noise floor places the expected frame peak")
{
    // Per-sample power P, frame of L samples normalised by L: lag power P / L,
    // peak of L exponential lags ~ H_L * P / L.
    const double floor = kDefaultNoiseFloorDb;
    const double p = per_sample_noise_power_db(floor, 255);
    double h = 0.0;
    for (int k = 1; k <= 255; ++k)
        h += 1.0 / k;
    CHECK(p - 10 * std::log10(255.0) + 10 * std::log10(h) == Approx(floor).margin(1e-12));
    CHECK(kDefaultNoiseFloorDb == Approx(-100.55));
    CHECK_THROWS_AS(per_sample_noise_power_db(floor, 0), Error);
}

TEST_CASE("emulator noise is seeded per link")
{
    const auto taps = link_file({{{0, {1, 0}}}});
    IqStream zeros;
    zeros.sample_rate_hz = 50e6;
    zeros.samples.assign(5000, Complex{});
    EmulatorConfig cfg;
    cfg.seed = 3;
    const auto a = apply_channel(zeros, taps, {0, 1}, cfg);
    const auto b = apply_channel(zeros, taps, {0, 1}, cfg);
    CHECK(a.samples == b.samples);
    cfg.seed = 4;
    CHECK(apply_channel(zeros, taps, {0, 1}, cfg).samples != a.samples);
}

TEST_CASE("per-pair base loss perturbation")
{
    EmulatorConfig cfg;
    CHECK(pair_base_loss_db(cfg, 0, 1) == kDefaultBaseLossDb);
    cfg.base_loss_sd_db = 1.23;
    cfg.seed = 99;
    std::vector<double> draws;
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 60; ++j)
            if (i != j)
                draws.push_back(pair_base_loss_db(cfg, i, j));
    CHECK(oracle::mean(draws) == Approx(57.55).margin(0.1));
    CHECK(oracle::sd(draws) == Approx(1.23).margin(0.08));
    CHECK(pair_base_loss_db(cfg, 2, 5) == pair_base_loss_db(cfg, 2, 5));
    CHECK(pair_base_loss_db(cfg, 2, 5) != pair_base_loss_db(cfg, 5, 2));
    cfg.reciprocal_base_loss = true;
    CHECK(pair_base_loss_db(cfg, 2, 5) == pair_base_loss_db(cfg, 5, 2));
}

TEST_CASE("tap update interval below 1 ms is rejected")
{
    auto cfg = quiet();
    cfg.tap_update_interval_s = 0.5e-3;
    CHECK_THROWS_AS(LinkEmulator(link_file({{{0, {1, 0}}}}), 0, 1, 50e6, 0.0, cfg), Error);
}

TEST_CASE("IQ capture round-trip, append and ranged read")
{
    const auto dir = oracle::temp_dir("iq");
    auto s = random_input(1000, 12, 10e6);
    s.origin_time_s = 0.25;
    write_iq(s, dir / "c.iq");
    CHECK(std::filesystem::file_size(dir / "c.iq") == 8000);
    const auto meta = read_iq_metadata(dir / "c.iq");
    CHECK(meta.sample_rate_hz == 10e6);
    CHECK(meta.origin_time_s == 0.25);
    const auto back = read_iq(dir / "c.iq");
    REQUIRE(back.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(back.samples[i].real() == static_cast<double>(static_cast<float>(s.samples[i].real())));
        CHECK(back.samples[i].imag() == static_cast<double>(static_cast<float>(s.samples[i].imag())));
    }
    append_iq(std::span(s.samples).first(10), dir / "c.iq");
    CHECK(iq_sample_count(dir / "c.iq") == 1010);
    const auto part = read_iq_range(dir / "c.iq", 500, 20);
    CHECK(part.size() == 20);
    CHECK(part.samples[0] == back.samples[500]);
    CHECK(part.origin_time_s == Approx(0.25 + 500 / 10e6));

    CHECK_THROWS_AS(read_iq_range(dir / "c.iq", 5000, 1), Error);
    CHECK_THROWS_AS(read_iq(dir / "missing.iq"), Error);
    std::ofstream(dir / "odd.iq", std::ios::binary) << "abc";
    write_iq_metadata({1e6, 0.0}, dir / "odd.iq");
    CHECK_THROWS_AS(read_iq(dir / "odd.iq"), Error);
    std::filesystem::remove_all(dir);
}
