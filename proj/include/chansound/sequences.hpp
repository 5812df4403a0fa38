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

#include "chansound/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chansound {

enum class SequenceFamily { Glfsr, Gold, GolayA, Ls };

std::string_view to_string(SequenceFamily family);
SequenceFamily parse_family(std::string_view name);

struct GlfsrParams {
    int degree = 8;
    std::uint32_t mask = 0; // Galois feedback mask, polynomial = 1 + x * mask
    std::uint32_t seed = 1;
};

struct GoldParams {
    int degree = 8;
    std::uint64_t poly_a = 0; // full polynomial incl. x^degree and x^0 terms
    std::uint64_t poly_b = 0;
    int shift = 0;
};

struct GolayParams {
    int length = 128;
};

struct LsParams {
    int order = 7;  // base Golay pair length is 2^order
    int ifw = 0;    // zero-gap width that is removed from the emitted chips
};

using GeneratorParams = std::variant<GlfsrParams, GoldParams, GolayParams, LsParams>;

/// A +-1 chip sequence together with the generator settings that produced it.
struct CodeSequence {
    std::vector<int> chips;
    SequenceFamily family = SequenceFamily::Glfsr;
    GeneratorParams params;

    std::size_t length() const { return chips.size(); }
};

struct CorrelationProfile {
    std::vector<int> lags;
    std::vector<double> values;
    double peak_value = 0.0;
    double max_sidelobe = 0.0; // largest |value| away from lag 0
    double peak_to_sidelobe_db = 0.0;
};

// ---- GF(2) polynomial helpers (bit i = coefficient of x^i) ----------------

int poly_degree(std::uint64_t poly);
bool is_primitive_polynomial(std::uint64_t poly);

/// Built-in feedback masks, taken when GLFSR mask = 0. Valid for degree 2..32.
std::uint32_t default_glfsr_mask(int degree);

/// Galois LFSR step register: emits register LSB, shifts right, XORs mask on a 1.
std::vector<std::uint8_t> galois_lfsr_bits(int degree, std::uint32_t mask, std::uint32_t seed,
                                           std::size_t count);

// ---- generators -----------------------------------------------------------

CodeSequence generate_glfsr(int degree, std::uint32_t mask, std::uint32_t seed);

/// Defaults for the degree-8 pair (non-preferred; degree 8 has no preferred pair).
inline constexpr std::uint64_t kGoldDefaultPolyA = 0x11D; // x^8+x^4+x^3+x^2+1
inline constexpr std::uint64_t kGoldDefaultPolyB = 0x169; // x^8+x^6+x^5+x^3+1
/// Preferred pair for degree 5.
inline constexpr std::uint64_t kGoldPreferred5A = 0x25; // x^5+x^2+1
inline constexpr std::uint64_t kGoldPreferred5B = 0x3D; // x^5+x^4+x^3+x^2+1

CodeSequence generate_gold(int degree, std::uint64_t poly_a, std::uint64_t poly_b, int shift);

/// Maximal-length +-1 sequence of a full polynomial (Fibonacci-equivalent ordering).
std::vector<int> m_sequence(std::uint64_t poly, std::uint32_t seed = 1);

struct GolayPair {
    std::vector<int> a;
    std::vector<int> b;
};

/// Ga/Gb complementary pair built by the delay/weight recursion for 32, 64 or 128.
GolayPair golay_pair(int length);
CodeSequence generate_golay_a(int length);

inline constexpr int kLsMinOrder = 2;
inline constexpr int kLsMaxOrder = 10;

/// Both members of the first LS codeset with the zero gap in place (ternary chips).
struct LsCodeset {
    std::vector<int> first;
    std::vector<int> second;
    int ifw = 0;
};

LsCodeset ls_codeset(int order, int ifw = -1);
CodeSequence generate_ls(int order, int ifw = -1);

// ---- modulation and correlation -------------------------------------------

/// BPSK baseband: chip held for samples_per_chip samples on I, Q identically zero.
IqStream bpsk_modulate(const CodeSequence& code, int samples_per_chip, double sample_rate_hz = 1.0);

/// Circular correlation r[k] = sum_n a[(n + k) mod N] * b[n].
CorrelationProfile periodic_correlation(const CodeSequence& a, const CodeSequence& b);
CorrelationProfile periodic_correlation(std::span<const int> a, std::span<const int> b);

/// Aperiodic correlation for lags -(N-1)..(N-1); entries may be ternary.
std::vector<int> aperiodic_correlation(std::span<const int> a, std::span<const int> b);

// ---- text interchange: one signed integer chip per line ----------------------

void write_sequence(const CodeSequence& code, const std::filesystem::path& path);
CodeSequence read_sequence(const std::filesystem::path& path);

} // namespace chansound
