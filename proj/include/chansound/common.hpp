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

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chansound {

using Complex = std::complex<double>;

/// Raised for invalid arguments, malformed files and failed pipeline stages.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kMphToMps = 0.44704;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double amplitude_to_db(double amplitude)
{
    return amplitude > 0.0 ? 20.0 * std::log10(amplitude) : kNegInf;
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

inline double power_to_db(double power)
{
    return power > 0.0 ? 10.0 * std::log10(power) : kNegInf;
}

/// Wraps an angle into [0, 2*pi).
inline double wrap_phase(double rad)
{
    double w = std::fmod(rad, kTwoPi);
    if (w < 0.0)
        w += kTwoPi;
    if (w >= kTwoPi)
        w = 0.0;
    return w;
}

/// Expected maximum of n i.i.d. unit-mean exponential variables (harmonic number).
/// Scales the mean noise power of a correlation frame to its expected peak.
inline double expected_peak_factor(std::size_t n)
{
    double h = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
        h += 1.0 / static_cast<double>(k);
    return h;
}

/// Complex baseband samples at a fixed rate.
struct IqStream {
    std::vector<Complex> samples;
    double sample_rate_hz = 1.0;
    double origin_time_s = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

} // namespace chansound
