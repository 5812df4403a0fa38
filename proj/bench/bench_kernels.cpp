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
#include "chansound/kernels.hpp"
#include "chansound/sounder.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace chansound;

namespace {

std::vector<Complex> random_iq(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<Complex> v(n);
    for (auto& x : v)
        x = {g(rng), g(rng)};
    return v;
}

std::vector<double> glfsr_ref(int degree)
{
    return reference_waveform(generate_glfsr(degree, 0, 1), 1);
}

const std::vector<kernels::FirTap> kTaps{{0, {0.7, 0.1}}, {64, {0.1, 0.0}}, {100, {0.0, 0.17}}, {200, {0.4, 0.0}}};

template <auto Fir>
void BM_Fir(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto buf = random_iq(n + 200, 1);
    std::vector<Complex> out(n);
    for (auto _ : state) {
        Fir(buf, 200, kTaps, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}

template <auto Xcorr>
void BM_XcorrDirect(benchmark::State& state)
{
    const auto ref = glfsr_ref(static_cast<int>(state.range(0)));
    const auto x = random_iq(ref.size(), 2);
    std::vector<Complex> out(ref.size());
    for (auto _ : state) {
        Xcorr(x, ref, static_cast<double>(ref.size()), out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations());
}

void BM_XcorrFft(benchmark::State& state)
{
    const auto ref = glfsr_ref(static_cast<int>(state.range(0)));
    const auto x = random_iq(ref.size(), 2);
    std::vector<Complex> out(ref.size());
    const kernels::FftCorrelator corr(ref, static_cast<double>(ref.size()));
    for (auto _ : state) {
        corr.correlate(x, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations());
}

void BM_SoundStream(benchmark::State& state)
{
    kernels::set_backend(state.range(0) ? kernels::Backend::OpenMP : kernels::Backend::Serial);
    const auto code = generate_glfsr(8, 0, 1);
    IqStream s;
    s.sample_rate_hz = 50e6;
    s.samples = random_iq(255 * 2000, 3);
    SoundingConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(sound_stream(s, code, cfg));
    state.SetItemsProcessed(state.iterations() * 2000);
    kernels::set_backend(kernels::Backend::OpenMP);
}

} // namespace

BENCHMARK(BM_Fir<kernels::fir_segment_serial>)->Name("fir/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_Fir<kernels::fir_segment_omp>)->Name("fir/openmp")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_XcorrDirect<kernels::xcorr_circular_serial>)->Name("xcorr/direct_serial")->Arg(8)->Arg(10);
BENCHMARK(BM_XcorrDirect<kernels::xcorr_circular_omp>)->Name("xcorr/direct_openmp")->Arg(8)->Arg(10);
BENCHMARK(BM_XcorrFft)->Name("xcorr/fft")->Arg(8)->Arg(10);
BENCHMARK(BM_SoundStream)->Name("sound_stream/2000_frames")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
