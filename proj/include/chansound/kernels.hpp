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

// Inner loops shared by the emulator and the sounder. Each kernel has a serial
// reference version and an OpenMP version; the two must agree bit-for-bit on
// the FIR and to rounding on correlation. The FFT correlator is the fast path
// used in production sounding and is checked against the direct sums.

#include "chansound/common.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace chansound::kernels {

/// out[k] = (1 / norm) * sum_n x[(n + k) mod L] * ref[n], L = ref.size().
void xcorr_circular_serial(std::span<const Complex> x, std::span<const double> ref, double norm,
                           std::span<Complex> out);
void xcorr_circular_omp(std::span<const Complex> x, std::span<const double> ref, double norm,
                        std::span<Complex> out);

/// Same quantity as xcorr_circular_* computed in O(L log L) with FFTW.
/// Safe to call correlate() concurrently from several threads.
class FftCorrelator {
public:
    FftCorrelator(std::span<const double> ref, double norm);
    ~FftCorrelator();
    FftCorrelator(const FftCorrelator&) = delete;
    FftCorrelator& operator=(const FftCorrelator&) = delete;
    FftCorrelator(FftCorrelator&&) noexcept;
    FftCorrelator& operator=(FftCorrelator&&) noexcept;

    std::size_t length() const;
    void correlate(std::span<const Complex> x, std::span<Complex> out) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct FirTap {
    std::size_t delay = 0;
    Complex coeff{};
};

/// Fixed-tap FIR over a segment: out[i] = sum_k c_k * buf[first + i - d_k].
/// The caller guarantees first >= max delay (history lives in buf before first).
void fir_segment_serial(std::span<const Complex> buf, std::size_t first, std::span<const FirTap> taps,
                        std::span<Complex> out);
void fir_segment_omp(std::span<const Complex> buf, std::size_t first, std::span<const FirTap> taps,
                     std::span<Complex> out);

/// Runtime switch so tests and benchmarks can force the serial reference path.
enum class Backend { Serial, OpenMP };
void set_backend(Backend backend);
Backend backend();

} // namespace chansound::kernels
