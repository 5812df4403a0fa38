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

#include "chansound/sequences.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace chansound {

std::string_view to_string(SequenceFamily family)
{
    switch (family) {
    case SequenceFamily::Glfsr: return "glfsr";
    case SequenceFamily::Gold: return "gold";
    case SequenceFamily::GolayA: return "golay_a";
    case SequenceFamily::Ls: return "ls";
    }
    return "unknown";
}

SequenceFamily parse_family(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "glfsr")
        return SequenceFamily::Glfsr;
    if (lower == "gold")
        return SequenceFamily::Gold;
    if (lower == "golay_a" || lower == "golay" || lower == "ga")
        return SequenceFamily::GolayA;
    if (lower == "ls")
        return SequenceFamily::Ls;
    throw Error("unknown sequence family '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// GF(2)[x] arithmetic

int poly_degree(std::uint64_t poly)
{
    if (poly == 0)
        return -1;
    return 63 - __builtin_clzll(poly);
}

namespace {

std::uint64_t poly_mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t mod, int deg)
{
    // a, b have degree < deg <= 32
    std::uint64_t result = 0;
    const std::uint64_t top = std::uint64_t{1} << deg;
    while (b) {
        if (b & 1)
            result ^= a;
        b >>= 1;
        a <<= 1;
        if (a & top)
            a ^= mod;
    }
    return result;
}

std::uint64_t poly_powmod_x(std::uint64_t exponent, std::uint64_t mod, int deg)
{
    std::uint64_t result = 1;
    std::uint64_t base = deg > 1 ? 2 : (2 ^ mod); // x mod p
    while (exponent) {
        if (exponent & 1)
            result = poly_mulmod(result, base, mod, deg);
        base = poly_mulmod(base, base, mod, deg);
        exponent >>= 1;
    }
    return result;
}

std::vector<std::uint64_t> prime_factors(std::uint64_t n)
{
    std::vector<std::uint64_t> factors;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            factors.push_back(p);
            while (n % p == 0)
                n /= p;
        }
    }
    if (n > 1)
        factors.push_back(n);
    return factors;
}

// GNU Radio style Galois masks; polynomial = 1 + x * mask.
constexpr std::array<std::uint32_t, 33> kGlfsrMasks = {
    0x00000000, 0x00000001, 0x00000003, 0x00000005, 0x00000009, 0x00000012, 0x00000021,
    0x00000041, 0x0000008E, 0x00000108, 0x00000204, 0x00000402, 0x00000829, 0x0000100D,
    0x00002015, 0x00004001, 0x00008016, 0x00010004, 0x00020013, 0x00040013, 0x00080004,
    0x00100002, 0x00200001, 0x00400010, 0x0080000D, 0x01000004, 0x02000023, 0x04000013,
    0x08000004, 0x10000002, 0x20000029, 0x40000004, 0x80000057,
};

int chip_of(std::uint8_t bit) { return bit ? -1 : 1; }

} // namespace

bool is_primitive_polynomial(std::uint64_t poly)
{
    const int deg = poly_degree(poly);
    if (deg < 1 || deg > 32 || (poly & 1) == 0)
        return false;
    if (deg == 1)
        return poly == 0x3;
    const std::uint64_t order = (std::uint64_t{1} << deg) - 1;
    if (poly_powmod_x(order, poly, deg) != 1)
        return false;
    for (std::uint64_t q : prime_factors(order)) {
        if (poly_powmod_x(order / q, poly, deg) == 1)
            return false;
    }
    return true;
}

std::uint32_t default_glfsr_mask(int degree)
{
    if (degree < 2 || degree > 32)
        throw Error("no built-in primitive polynomial for degree " + std::to_string(degree));
    return kGlfsrMasks[static_cast<std::size_t>(degree)];
}

std::vector<std::uint8_t> galois_lfsr_bits(int degree, std::uint32_t mask, std::uint32_t seed,
                                           std::size_t count)
{
    std::uint64_t reg = seed;
    if (degree < 32)
        reg &= (std::uint64_t{1} << degree) - 1;
    if (reg == 0)
        throw Error("degenerate LFSR state");
    std::vector<std::uint8_t> bits(count);
    for (auto& bit : bits) {
        bit = static_cast<std::uint8_t>(reg & 1);
        reg >>= 1;
        if (bit)
            reg ^= mask;
    }
    return bits;
}

CodeSequence generate_glfsr(int degree, std::uint32_t mask, std::uint32_t seed)
{
    if (degree < 2 || degree > 32)
        throw Error("GLFSR degree must be in [2, 32]");
    if (seed == 0)
        throw Error("degenerate LFSR state");
    const std::uint32_t used_mask = mask == 0 ? default_glfsr_mask(degree) : mask;
    const std::uint64_t poly = 1 | (std::uint64_t{used_mask} << 1);
    if (poly_degree(poly) != degree)
        throw Error("GLFSR mask does not match the register degree");

    const std::size_t length = (std::size_t{1} << degree) - 1;
    const auto bits = galois_lfsr_bits(degree, used_mask, seed, length);

    CodeSequence code;
    code.family = SequenceFamily::Glfsr;
    code.params = GlfsrParams{degree, mask, seed};
    code.chips.reserve(length);
    for (auto b : bits)
        code.chips.push_back(chip_of(b));
    return code;
}

std::vector<int> m_sequence(std::uint64_t poly, std::uint32_t seed)
{
    if (!is_primitive_polynomial(poly))
        throw Error("polynomial is not primitive");
    const int deg = poly_degree(poly);
    const auto mask = static_cast<std::uint32_t>(poly >> 1);
    const std::size_t length = (std::size_t{1} << deg) - 1;
    const auto bits = galois_lfsr_bits(deg, mask, seed, length);
    std::vector<int> chips;
    chips.reserve(length);
    for (auto b : bits)
        chips.push_back(chip_of(b));
    return chips;
}

CodeSequence generate_gold(int degree, std::uint64_t poly_a, std::uint64_t poly_b, int shift)
{
    if (degree < 2 || degree > 20)
        throw Error("Gold degree must be in [2, 20]");
    if (poly_a == 0 && poly_b == 0 && degree == 8) {
        poly_a = kGoldDefaultPolyA;
        poly_b = kGoldDefaultPolyB;
    }
    if (poly_degree(poly_a) != degree || poly_degree(poly_b) != degree)
        throw Error("Gold polynomials must have the requested degree");
    if (!is_primitive_polynomial(poly_a) || !is_primitive_polynomial(poly_b))
        throw Error("Gold generator polynomial is not primitive");
    const int length = (1 << degree) - 1;
    if (shift < 0 || shift > length - 1)
        throw Error("Gold shift out of range [0, " + std::to_string(length - 1) + "]");

    const auto a = m_sequence(poly_a);
    const auto b = m_sequence(poly_b);
    CodeSequence code;
    code.family = SequenceFamily::Gold;
    code.params = GoldParams{degree, poly_a, poly_b, shift};
    code.chips.resize(static_cast<std::size_t>(length));
    for (int n = 0; n < length; ++n)
        code.chips[static_cast<std::size_t>(n)] = a[static_cast<std::size_t>(n)] * b[static_cast<std::size_t>((n + shift) % length)];
    return code;
}

GolayPair golay_pair(int length)
{
    std::vector<int> delays;
    std::vector<int> weights;
    switch (length) {
    case 32:
        delays = {1, 4, 8, 2, 16};
        weights = {-1, 1, -1, 1, -1};
        break;
    case 64:
        delays = {2, 1, 4, 8, 16, 32};
        weights = {1, 1, -1, -1, 1, -1};
        break;
    case 128:
        delays = {1, 8, 2, 4, 16, 32, 64};
        weights = {-1, -1, -1, -1, 1, -1, -1};
        break;
    default:
        throw Error("unsupported Golay length " + std::to_string(length) + " (use 32, 64 or 128)");
    }

    const auto n = static_cast<std::size_t>(length);
    std::vector<int> a(n, 0), b(n, 0);
    a[0] = 1;
    b[0] = 1;
    for (std::size_t k = 0; k < delays.size(); ++k) {
        const auto d = static_cast<std::size_t>(delays[k]);
        std::vector<int> na(n, 0), nb(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int delayed = i >= d ? b[i - d] : 0;
            na[i] = weights[k] * a[i] + delayed;
            nb[i] = weights[k] * a[i] - delayed;
        }
        a = std::move(na);
        b = std::move(nb);
    }
    return {std::move(a), std::move(b)};
}

CodeSequence generate_golay_a(int length)
{
    auto pair = golay_pair(length);
    CodeSequence code;
    code.family = SequenceFamily::GolayA;
    code.params = GolayParams{length};
    code.chips = std::move(pair.a);
    return code;
}

LsCodeset ls_codeset(int order, int ifw)
{
    if (order < kLsMinOrder || order > kLsMaxOrder)
        throw Error("LS order must be in [" + std::to_string(kLsMinOrder) + ", " + std::to_string(kLsMaxOrder) + "]");
    // Golay pair of length 2^order by concatenation: A' = [A B], B' = [A -B].
    std::vector<int> a{1}, b{1};
    for (int k = 0; k < order; ++k) {
        std::vector<int> na(a), nb(a);
        na.insert(na.end(), b.begin(), b.end());
        for (int v : b)
            nb.push_back(-v);
        a = std::move(na);
        b = std::move(nb);
    }
    const int n = static_cast<int>(a.size());
    const int gap = ifw < 0 ? n / 2 : ifw;

    // Mate pair: C = reverse(B), D = -reverse(A) gives R_AC + R_BD = 0.
    std::vector<int> c(b.rbegin(), b.rend());
    std::vector<int> d;
    for (auto it = a.rbegin(); it != a.rend(); ++it)
        d.push_back(-*it);

    LsCodeset set;
    set.ifw = gap;
    auto assemble = [gap](const std::vector<int>& left, const std::vector<int>& right) {
        std::vector<int> out(left);
        out.insert(out.end(), static_cast<std::size_t>(gap), 0);
        out.insert(out.end(), right.begin(), right.end());
        return out;
    };
    set.first = assemble(a, b);
    set.second = assemble(c, d);
    return set;
}

CodeSequence generate_ls(int order, int ifw)
{
    const auto set = ls_codeset(order, ifw);
    CodeSequence code;
    code.family = SequenceFamily::Ls;
    code.params = LsParams{order, set.ifw};
    for (int v : set.first) {
        if (v != 0)
            code.chips.push_back(v);
    }
    return code;
}

IqStream bpsk_modulate(const CodeSequence& code, int samples_per_chip, double sample_rate_hz)
{
    if (samples_per_chip < 1)
        throw Error("samples_per_chip must be >= 1");
    IqStream out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.reserve(code.length() * static_cast<std::size_t>(samples_per_chip));
    for (int chip : code.chips) {
        for (int k = 0; k < samples_per_chip; ++k)
            out.samples.emplace_back(static_cast<double>(chip), 0.0);
    }
    return out;
}

CorrelationProfile periodic_correlation(std::span<const int> a, std::span<const int> b)
{
    if (a.size() != b.size())
        throw Error("periodic correlation needs equal lengths");
    if (a.empty())
        throw Error("periodic correlation of empty sequences");
    const std::size_t n = a.size();
    CorrelationProfile prof;
    prof.lags.resize(n);
    prof.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        long long acc = 0;
        for (std::size_t i = 0; i < n; ++i)
            acc += static_cast<long long>(a[(i + k) % n]) * b[i];
        prof.lags[k] = static_cast<int>(k);
        prof.values[k] = static_cast<double>(acc);
    }
    prof.peak_value = prof.values[0];
    for (std::size_t k = 1; k < n; ++k)
        prof.max_sidelobe = std::max(prof.max_sidelobe, std::abs(prof.values[k]));
    prof.peak_to_sidelobe_db = prof.max_sidelobe > 0.0
        ? 20.0 * std::log10(std::abs(prof.peak_value) / prof.max_sidelobe)
        : std::numeric_limits<double>::infinity();
    return prof;
}

CorrelationProfile periodic_correlation(const CodeSequence& a, const CodeSequence& b)
{
    return periodic_correlation(std::span<const int>(a.chips), std::span<const int>(b.chips));
}

std::vector<int> aperiodic_correlation(std::span<const int> a, std::span<const int> b)
{
    const auto na = static_cast<long>(a.size());
    const auto nb = static_cast<long>(b.size());
    std::vector<int> out;
    if (na == 0 || nb == 0)
        return out;
    // lag t: sum_i a[i + t] * b[i]
    for (long t = -(nb - 1); t <= na - 1; ++t) {
        int acc = 0;
        for (long i = 0; i < nb; ++i) {
            const long j = i + t;
            if (j >= 0 && j < na)
                acc += a[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(i)];
        }
        out.push_back(acc);
    }
    return out;
}

void write_sequence(const CodeSequence& code, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    for (int chip : code.chips)
        out << chip << '\n';
    if (!out)
        throw Error("failed writing " + path.string());
}

CodeSequence read_sequence(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open sequence file " + path.string());
    CodeSequence code;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream iss(line);
        int chip = 0;
        if (!(iss >> chip) || (chip != 1 && chip != -1))
            throw Error(path.string() + ":" + std::to_string(line_no) + ": chip must be +1 or -1");
        code.chips.push_back(chip);
    }
    if (code.chips.empty())
        throw Error("sequence file " + path.string() + " holds no chips");
    // Family metadata is not carried by the text format.
    code.family = SequenceFamily::Glfsr;
    code.params = GlfsrParams{0, 0, 0};
    return code;
}

} // namespace chansound
