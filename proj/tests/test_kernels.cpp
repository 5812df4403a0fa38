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

#include "chansound/kernels.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace chansound;
using namespace chansound::kernels;

namespace {

double max_rel_error(const std::vector<Complex>& got, const std::vector<Complex>& want)
{
    double peak = 0.0, err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        peak = std::max(peak, std::abs(want[i]));
        err = std::max(err, std::abs(got[i] - want[i]));
    }
    return err / peak;
}

} // namespace

TEST_CASE("circular correlation matches direct sums on 100 random frames")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> len(16, 600);
    for (int trial = 0; trial < 100; ++trial) {
        const auto l = static_cast<std::size_t>(len(rng));
        std::vector<double> ref(l);
        std::vector<Complex> x(l);
        for (auto& r : ref)
            r = g(rng) > 0 ? 1.0 : -1.0;
        for (auto& v : x)
            v = {g(rng), g(rng)};
        const double norm = static_cast<double>(l);
        const auto want = oracle::circular_xcorr(x, ref, norm);

        std::vector<Complex> serial(l), omp(l), fft(l);
        xcorr_circular_serial(x, ref, norm, serial);
        xcorr_circular_omp(x, ref, norm, omp);
        FftCorrelator(ref, norm).correlate(x, fft);
        CHECK(max_rel_error(serial, want) < 1e-12);
        CHECK(max_rel_error(omp, want) < 1e-12);
        CHECK(max_rel_error(fft, want) < 1e-9);
    }
}

TEST_CASE("fft correlator is reusable and movable")
{
    std::vector<double> ref{1, -1, 1, 1, -1};
    FftCorrelator a(ref, 5.0);
    FftCorrelator b(std::move(a));
    CHECK(b.length() == 5);
    std::vector<Complex> x(ref.begin(), ref.end()), out(5);
    b.correlate(x, out);
    CHECK(out[0].real() == Catch::Approx(1.0).margin(1e-12));
    b.correlate(x, out);
    CHECK(out[0].real() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("fir serial and openmp agree bit for bit and match the direct oracle")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    const std::size_t n = 20000;
    std::vector<FirTap> taps{{0, {0.7, -0.1}}, {3, {0.2, 0.05}}, {64, {-0.01, 0.3}}, {200, {0.001, 0.0}}};
    const std::size_t first = 200;
    std::vector<Complex> buf(first + n);
    for (std::size_t i = first; i < buf.size(); ++i)
        buf[i] = {g(rng), g(rng)};

    std::vector<Complex> s(n), o(n);
    fir_segment_serial(buf, first, taps, s);
    fir_segment_omp(buf, first, taps, o);
    CHECK(s == o);

    std::vector<Complex> x(buf.begin() + first, buf.end());
    std::vector<std::pair<std::size_t, oracle::cd>> otaps;
    for (const auto& t : taps)
        otaps.emplace_back(t.delay, t.coeff);
    const auto want = oracle::fir(x, otaps);
    CHECK(max_rel_error(s, want) < 1e-14);
}

TEST_CASE("backend switch")
{
    const auto prev = backend();
    set_backend(Backend::Serial);
    CHECK(backend() == Backend::Serial);
    set_backend(Backend::OpenMP);
    CHECK(backend() == Backend::OpenMP);
    set_backend(prev);
}
