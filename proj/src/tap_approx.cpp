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

#include "chansound/tap_approx.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace chansound {

TapClustering cluster_paths(const std::vector<CirComponent>& cir, int k, double grid_dt_s, int max_iterations)
{
    if (k < 1)
        throw Error("tap count k must be >= 1");
    if (!(grid_dt_s > 0.0))
        throw Error("grid step must be positive");
    TapClustering result;
    if (cir.empty())
        return result;

    const std::size_t n = cir.size();
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i)
        weight[i] = std::norm(cir[i].coeff);

    std::vector<std::size_t> by_power(n);
    std::iota(by_power.begin(), by_power.end(), 0);
    std::stable_sort(by_power.begin(), by_power.end(), [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
    std::vector<double> centroids;
    for (std::size_t idx : by_power) {
        if (static_cast<int>(centroids.size()) == k)
            break;
        const double d = cir[idx].delay_s;
        if (std::find(centroids.begin(), centroids.end(), d) == centroids.end())
            centroids.push_back(d);
    }
    std::sort(centroids.begin(), centroids.end());

    std::vector<std::size_t> assign(n, 0);
    auto assign_all = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::abs(cir[i].delay_s - centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c) {
                const double dist = std::abs(cir[i].delay_s - centroids[c]);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            assign[i] = best;
        }
    };

    const double tol = grid_dt_s / 100.0;
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        assign_all();
        std::vector<double> wsum(centroids.size(), 0.0), tsum(centroids.size(), 0.0), plain(centroids.size(), 0.0);
        std::vector<int> count(centroids.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            wsum[assign[i]] += weight[i];
            tsum[assign[i]] += weight[i] * cir[i].delay_s;
            plain[assign[i]] += cir[i].delay_s;
            ++count[assign[i]];
        }
        std::vector<double> next;
        double movement = 0.0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (count[c] == 0)
                continue;
            const double nc = wsum[c] > 0.0 ? tsum[c] / wsum[c] : plain[c] / count[c];
            movement = std::max(movement, std::abs(nc - centroids[c]));
            next.push_back(nc);
        }
        const bool dropped = next.size() != centroids.size();
        centroids = std::move(next);
        if (!dropped && movement < tol) {
            ++iter;
            break;
        }
    }
    assign_all();

    result.iterations = iter;
    result.centroids_s = centroids;
    result.cluster_coeffs.assign(centroids.size(), Complex{});
    std::vector<double> wsum(centroids.size(), 0.0), tsum(centroids.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        result.cluster_coeffs[assign[i]] += cir[i].coeff;
        wsum[assign[i]] += weight[i];
        tsum[assign[i]] += weight[i] * cir[i].delay_s;
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (wsum[c] > 0.0)
            result.centroids_s[c] = tsum[c] / wsum[c];
    }
    return result;
}

TapSet approximate_taps(const std::vector<CirComponent>& cir_in, const TapApproxOptions& options)
{
    if (options.k < 1)
        throw Error("tap count k must be >= 1");
    if (!(options.grid_dt_s > 0.0))
        throw Error("grid step must be positive");
    TapSet out;
    out.grid_dt_s = options.grid_dt_s;
    if (cir_in.empty())
        return out;

    std::vector<CirComponent> cir = cir_in;
    if (options.relative_to_first_arrival) {
        double first = cir.front().delay_s;
        for (const auto& c : cir)
            first = std::min(first, c.delay_s);
        for (auto& c : cir)
            c.delay_s -= first;
    }

    const auto clusters = cluster_paths(cir, options.k, options.grid_dt_s, options.max_iterations);

    std::map<int, Complex> merged;
    for (std::size_t c = 0; c < clusters.centroids_s.size(); ++c) {
        const auto idx = static_cast<int>(std::llround(clusters.centroids_s[c] / options.grid_dt_s));
        if (idx < 0)
            throw Error("negative tap delay");
        merged[idx] += clusters.cluster_coeffs[c];
    }

    const double scale = db_to_amplitude(options.offset_db);
    double strongest = 0.0;
    for (auto& [idx, coeff] : merged) {
        coeff *= scale;
        strongest = std::max(strongest, std::abs(coeff));
    }
    if (strongest == 0.0)
        return out;
    const double keep_above = strongest * db_to_amplitude(-options.dyn_range_db);
    for (const auto& [idx, coeff] : merged) {
        const double mag = std::abs(coeff);
        if (mag > 0.0 && mag >= keep_above)
            out.taps.push_back({idx, coeff});
    }
    // First surviving tap anchors the relative delay axis.
    if (options.relative_to_first_arrival && !out.taps.empty()) {
        const int first = out.taps.front().delay_index;
        for (auto& t : out.taps)
            t.delay_index -= first;
    }
    return out;
}

TapSet approximate_taps(const ChannelSnapshot& snapshot, double p_tx_dbm, const TapApproxOptions& options)
{
    return approximate_taps(snapshot_to_cir(snapshot, p_tx_dbm), options);
}

std::vector<RayPath> tapset_to_paths(const TapSet& taps, double p_tx_dbm)
{
    std::vector<RayPath> paths;
    for (const auto& t : taps.taps) {
        RayPath p;
        p.received_power_dbm = p_tx_dbm + amplitude_to_db(std::abs(t.coeff));
        p.phase_rad = wrap_phase(std::arg(t.coeff));
        p.toa_s = t.delay_index * taps.grid_dt_s;
        paths.push_back(p);
    }
    return paths;
}

Complex coherent_sum(const TapSet& taps)
{
    Complex sum{};
    for (const auto& t : taps.taps)
        sum += t.coeff;
    return sum;
}

// ---------------------------------------------------------------------------
// TapFile

bool TapFile::has_pair(int tx, int rx) const
{
    return std::any_of(records.begin(), records.end(), [&](const TapRecord& r) { return r.tx == tx && r.rx == rx; });
}

std::vector<TapSet> TapFile::timeline(int tx, int rx) const
{
    std::vector<const TapRecord*> recs;
    for (const auto& r : records) {
        if (r.tx == tx && r.rx == rx)
            recs.push_back(&r);
    }
    if (recs.empty())
        throw Error("tap file has no records for pair " + std::to_string(tx) + "->" + std::to_string(rx));
    std::stable_sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->timestamp_ms < b->timestamp_ms; });
    const long span = std::max<long>(header.duration_ms, recs.back()->timestamp_ms + 1);
    std::vector<TapSet> out(static_cast<std::size_t>(span));
    std::size_t next = 0;
    TapSet current;
    current.grid_dt_s = header.grid_dt_s;
    for (long ms = 0; ms < span; ++ms) {
        while (next < recs.size() && recs[next]->timestamp_ms <= ms)
            current = recs[next++]->taps;
        out[static_cast<std::size_t>(ms)] = current;
        out[static_cast<std::size_t>(ms)].timestamp_ms = ms;
    }
    return out;
}

bool TapFile::is_complete() const
{
    std::set<std::tuple<long, int, int>> seen;
    for (const auto& r : records)
        seen.insert({r.timestamp_ms, r.tx, r.rx});
    for (long ms = 0; ms < header.duration_ms; ++ms) {
        for (int i = 0; i < header.n_nodes; ++i) {
            for (int j = 0; j < header.n_nodes; ++j) {
                if (i != j && !seen.count({ms, i, j}))
                    return false;
            }
        }
    }
    return true;
}

TapFile apply_offset(const TapFile& file, double offset_db)
{
    TapFile out = file;
    const double scale = db_to_amplitude(offset_db);
    for (auto& r : out.records) {
        for (auto& t : r.taps.taps)
            t.coeff *= scale;
    }
    out.header.offset_db += offset_db;
    return out;
}

namespace {

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line_no, std::size_t offset,
                             const std::string& what)
{
    throw Error(path.string() + ": line " + std::to_string(line_no) + " (byte offset " + std::to_string(offset) +
                "): " + what);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream iss(line);
    while (std::getline(iss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

template <typename T>
bool parse_number(const std::string& s, T& value)
{
    std::string trimmed = s;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
    if (trimmed.empty())
        return false;
    if constexpr (std::is_floating_point_v<T>) {
        char* end = nullptr;
        errno = 0;
        value = std::strtod(trimmed.c_str(), &end);
        return end == trimmed.c_str() + trimmed.size() && errno != ERANGE;
    } else {
        auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
        return ec == std::errc() && ptr == trimmed.data() + trimmed.size();
    }
}

} // namespace

void write_tap_file(const TapFile& file, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    const auto& h = file.header;
    out << "# n_nodes=" << h.n_nodes << '\n';
    out << "# grid_dt_s=" << format_double(h.grid_dt_s) << '\n';
    out << "# K=" << h.k << '\n';
    out << "# duration_ms=" << h.duration_ms << '\n';
    out << "# offset_db=" << format_double(h.offset_db) << '\n';
    for (const auto& r : file.records) {
        if (static_cast<int>(r.taps.taps.size()) > h.k)
            throw Error("record exceeds K taps");
        out << r.timestamp_ms << ',' << r.tx << ',' << r.rx;
        for (int slot = 0; slot < h.k; ++slot) {
            if (slot < static_cast<int>(r.taps.taps.size())) {
                const auto& t = r.taps.taps[static_cast<std::size_t>(slot)];
                out << ',' << t.delay_index << ',' << format_double(t.coeff.real()) << ',' << format_double(t.coeff.imag());
            } else {
                out << ",-1,0,0";
            }
        }
        out << '\n';
    }
    if (!out)
        throw Error("failed writing " + path.string());
}

TapFile read_tap_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open tap file " + path.string());
    TapFile file;
    std::set<std::string> header_keys;
    std::string line;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                continue; // free comment
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            const std::string value = line.substr(eq + 1);
            bool ok = true;
            if (key == "n_nodes")
                ok = parse_number(value, file.header.n_nodes);
            else if (key == "grid_dt_s")
                ok = parse_number(value, file.header.grid_dt_s) && file.header.grid_dt_s > 0.0;
            else if (key == "K")
                ok = parse_number(value, file.header.k) && file.header.k >= 1;
            else if (key == "duration_ms")
                ok = parse_number(value, file.header.duration_ms);
            else if (key == "offset_db")
                ok = parse_number(value, file.header.offset_db);
            else
                continue;
            if (!ok)
                parse_fail(path, line_no, line_offset, "malformed header value for " + key);
            header_keys.insert(key);
            continue;
        }
        for (const char* required : {"n_nodes", "grid_dt_s", "K", "duration_ms", "offset_db"}) {
            if (!header_keys.count(required))
                parse_fail(path, line_no, line_offset, std::string("malformed header: missing ") + required);
        }
        const auto fields = split_csv(line);
        const std::size_t expected = 3 + 3 * static_cast<std::size_t>(file.header.k);
        if (fields.size() > expected && (fields.size() - 3) % 3 == 0)
            parse_fail(path, line_no, line_offset, "record holds more than K=" + std::to_string(file.header.k) + " taps");
        if (fields.size() != expected)
            parse_fail(path, line_no, line_offset,
                       "truncated record: expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
        TapRecord rec;
        if (!parse_number(fields[0], rec.timestamp_ms) || !parse_number(fields[1], rec.tx) || !parse_number(fields[2], rec.rx))
            parse_fail(path, line_no, line_offset, "malformed record key");
        if (rec.tx < 0 || rec.tx >= file.header.n_nodes || rec.rx < 0 || rec.rx >= file.header.n_nodes)
            parse_fail(path, line_no, line_offset, "node id outside header n_nodes");
        rec.taps.grid_dt_s = file.header.grid_dt_s;
        rec.taps.timestamp_ms = rec.timestamp_ms;
        bool padding = false;
        for (int slot = 0; slot < file.header.k; ++slot) {
            int idx = 0;
            double re = 0.0, im = 0.0;
            const std::size_t base = 3 + 3 * static_cast<std::size_t>(slot);
            if (!parse_number(fields[base], idx) || !parse_number(fields[base + 1], re) || !parse_number(fields[base + 2], im))
                parse_fail(path, line_no, line_offset, "malformed tap slot " + std::to_string(slot + 1));
            if (idx == -1) {
                padding = true;
                continue;
            }
            if (padding || idx < 0)
                parse_fail(path, line_no, line_offset, "tap slot " + std::to_string(slot + 1) + " follows an unused slot or is negative");
            if (!rec.taps.taps.empty() && idx <= rec.taps.taps.back().delay_index)
                parse_fail(path, line_no, line_offset, "tap delays must be strictly increasing");
            rec.taps.taps.push_back({idx, Complex(re, im)});
        }
        file.records.push_back(std::move(rec));
    }
    if (header_keys.size() < 5)
        throw Error(path.string() + ": malformed header: missing fields");
    return file;
}

TapFile build_tap_file(const ChannelMatrix& matrix, const std::vector<RadioParams>& radios,
                       const TapApproxOptions& options, long duration_ms)
{
    if (static_cast<int>(radios.size()) != matrix.n_nodes)
        throw Error("one radio parameter set per node is required");
    if (duration_ms < 1)
        throw Error("tap file duration must be >= 1 ms");
    const int n = matrix.n_nodes;
    const int ns = matrix.n_samples;

    // Per (pair, sample) tap sets, computed once and held over milliseconds.
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j)
                pairs.emplace_back(i, j);
        }
    }
    std::vector<TapSet> per_sample(pairs.size() * static_cast<std::size_t>(ns));
    const auto total = static_cast<long>(per_sample.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long w = 0; w < total; ++w) {
        const auto p = static_cast<std::size_t>(w / ns);
        const int s = static_cast<int>(w % ns) + 1;
        const auto [i, j] = pairs[p];
        const auto floor = noise_floor_dbm(radios[static_cast<std::size_t>(j)]);
        const auto pruned = prune_paths(matrix.at(i, j, s), floor);
        per_sample[static_cast<std::size_t>(w)] = approximate_taps(pruned, radios[static_cast<std::size_t>(i)].tx_power_dbm, options);
    }

    TapFile file;
    file.header = {n, options.grid_dt_s, options.k, duration_ms, options.offset_db};
    file.records.reserve(static_cast<std::size_t>(duration_ms) * pairs.size());
    for (long ms = 0; ms < duration_ms; ++ms) {
        const double t = static_cast<double>(ms) * 1e-3;
        int s = static_cast<int>(std::floor(t / matrix.sample_interval_s * (1.0 + 1e-12))) + 1;
        s = std::clamp(s, 1, ns);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            TapRecord rec;
            rec.timestamp_ms = ms;
            rec.tx = pairs[p].first;
            rec.rx = pairs[p].second;
            rec.taps = per_sample[p * static_cast<std::size_t>(ns) + static_cast<std::size_t>(s - 1)];
            rec.taps.timestamp_ms = ms;
            file.records.push_back(std::move(rec));
        }
    }
    return file;
}

} // namespace chansound
