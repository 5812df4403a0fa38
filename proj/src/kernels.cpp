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

#include <atomic>
#include <cstring>
#include <mutex>

#include <fftw3.h>

namespace chansound::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::OpenMP};

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& fftw_plan_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

FftwBuffer fftw_buffer(std::size_t n)
{
    auto* p = fftw_alloc_complex(n);
    if (!p)
        throw Error("fftw allocation failed");
    return FftwBuffer(p);
}

void check_xcorr_args(std::span<const Complex> x, std::span<const double> ref, std::span<Complex> out)
{
    if (x.size() != ref.size() || out.size() != ref.size())
        throw Error("circular correlation needs equal-length input, reference and output");
}

} // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

void xcorr_circular_serial(std::span<const Complex> x, std::span<const double> ref, double norm,
                           std::span<Complex> out)
{
    check_xcorr_args(x, ref, out);
    const std::size_t n = ref.size();
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = i + k;
            if (j >= n)
                j -= n;
            re += x[j].real() * ref[i];
            im += x[j].imag() * ref[i];
        }
        out[k] = Complex(re / norm, im / norm);
    }
}

void xcorr_circular_omp(std::span<const Complex> x, std::span<const double> ref, double norm,
                        std::span<Complex> out)
{
    check_xcorr_args(x, ref, out);
    const auto n = static_cast<long>(ref.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (long i = 0; i < n; ++i) {
            long j = i + k;
            if (j >= n)
                j -= n;
            re += x[static_cast<std::size_t>(j)].real() * ref[static_cast<std::size_t>(i)];
            im += x[static_cast<std::size_t>(j)].imag() * ref[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(k)] = Complex(re / norm, im / norm);
    }
}

struct FftCorrelator::Impl {
    std::size_t n = 0;
    double norm = 1.0;
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
    std::vector<Complex> ref_spectrum_conj; // conj(FFT(ref)) / (n * norm)

    ~Impl()
    {
        std::lock_guard lock(fftw_plan_mutex());
        if (forward)
            fftw_destroy_plan(forward);
        if (inverse)
            fftw_destroy_plan(inverse);
    }
};

FftCorrelator::FftCorrelator(std::span<const double> ref, double norm) : impl_(std::make_unique<Impl>())
{
    if (ref.empty())
        throw Error("empty correlation reference");
    if (norm == 0.0)
        throw Error("zero correlation normalisation");
    impl_->n = ref.size();
    impl_->norm = norm;
    const int n = static_cast<int>(impl_->n);

    auto in = fftw_buffer(impl_->n);
    auto out = fftw_buffer(impl_->n);
    {
        std::lock_guard lock(fftw_plan_mutex());
        impl_->forward = fftw_plan_dft_1d(n, in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        impl_->inverse = fftw_plan_dft_1d(n, in.get(), out.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!impl_->forward || !impl_->inverse)
        throw Error("fftw planning failed");

    for (std::size_t i = 0; i < impl_->n; ++i) {
        in[i][0] = ref[i];
        in[i][1] = 0.0;
    }
    fftw_execute_dft(impl_->forward, in.get(), out.get());
    impl_->ref_spectrum_conj.resize(impl_->n);
    const double scale = 1.0 / (static_cast<double>(impl_->n) * norm);
    for (std::size_t i = 0; i < impl_->n; ++i)
        impl_->ref_spectrum_conj[i] = std::conj(Complex(out[i][0], out[i][1])) * scale;
}

FftCorrelator::~FftCorrelator() = default;
FftCorrelator::FftCorrelator(FftCorrelator&&) noexcept = default;
FftCorrelator& FftCorrelator::operator=(FftCorrelator&&) noexcept = default;

std::size_t FftCorrelator::length() const { return impl_->n; }

void FftCorrelator::correlate(std::span<const Complex> x, std::span<Complex> out) const
{
    const std::size_t n = impl_->n;
    if (x.size() != n || out.size() != n)
        throw Error("FFT correlator length mismatch");

    struct Workspace {
        std::size_t n = 0;
        FftwBuffer a;
        FftwBuffer b;
    };
    thread_local Workspace ws;
    if (ws.n != n) {
        ws.a = fftw_buffer(n);
        ws.b = fftw_buffer(n);
        ws.n = n;
    }
    static_assert(sizeof(Complex) == sizeof(fftw_complex));
    std::memcpy(ws.a.get(), x.data(), n * sizeof(fftw_complex));
    fftw_execute_dft(impl_->forward, ws.a.get(), ws.b.get());
    for (std::size_t i = 0; i < n; ++i) {
        const Complex v = Complex(ws.b[i][0], ws.b[i][1]) * impl_->ref_spectrum_conj[i];
        ws.b[i][0] = v.real();
        ws.b[i][1] = v.imag();
    }
    fftw_execute_dft(impl_->inverse, ws.b.get(), ws.a.get());
    std::memcpy(static_cast<void*>(out.data()), ws.a.get(), n * sizeof(fftw_complex));
}

void fir_segment_serial(std::span<const Complex> buf, std::size_t first, std::span<const FirTap> taps,
                        std::span<Complex> out)
{
    for (const auto& t : taps) {
        if (t.delay > first)
            throw Error("FIR history shorter than tap delay");
    }
    if (first + out.size() > buf.size())
        throw Error("FIR segment exceeds buffer");
    for (std::size_t i = 0; i < out.size(); ++i) {
        Complex acc{};
        for (const auto& t : taps)
            acc += t.coeff * buf[first + i - t.delay];
        out[i] = acc;
    }
}

void fir_segment_omp(std::span<const Complex> buf, std::size_t first, std::span<const FirTap> taps,
                     std::span<Complex> out)
{
    for (const auto& t : taps) {
        if (t.delay > first)
            throw Error("FIR history shorter than tap delay");
    }
    if (first + out.size() > buf.size())
        throw Error("FIR segment exceeds buffer");
    const auto count = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < count; ++i) {
        Complex acc{};
        const std::size_t pos = first + static_cast<std::size_t>(i);
        for (const auto& t : taps)
            acc += t.coeff * buf[pos - t.delay];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

} // namespace chansound::kernels
