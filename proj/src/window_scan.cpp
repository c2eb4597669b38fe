// Copyright 2026 The ebitcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ebitcert/window_scan.hpp"

#include "ebitcert/parallel.hpp"

#include <cstdio>

namespace ebitcert {

namespace {

constexpr double kTie = 1e-9;

struct Window {
    int n;
    int start;
};

std::vector<Window> windows(const ConstraintSet& cs, int n_min, int n_max) {
    const bool pinned = cs.has_pins();
    std::vector<Window> out;
    for (int n = n_min; n <= n_max; ++n) {
        const int last_start = pinned ? cs.n - n + 1 : 1;
        for (int start = 1; start <= last_start; ++start) out.push_back({n, start});
    }
    return out;
}

// True when a beats b: larger eof, ties broken by smaller n then start.
bool better(const CertificationResult& a, const CertificationResult& b) {
    if (a.eof_ebits > b.eof_ebits + kTie) return true;
    if (a.eof_ebits < b.eof_ebits - kTie) return false;
    if (a.n != b.n) return a.n < b.n;
    return a.window_start < b.window_start;
}

}  // namespace

ScanResult scan(const ConstraintSet& cs, const NoiseModel& noise, const ScanConfig& config) {
    if (config.n_min > config.n_max) {
        throw InputError("empty window range: n_min " + std::to_string(config.n_min) + " > n_max " +
                         std::to_string(config.n_max));
    }
    if (config.n_min < 2) throw InputError("windows need at least 2 modes");
    if (cs.has_pins() && config.n_max > cs.n) {
        throw InputError("n_max " + std::to_string(config.n_max) + " exceeds the " + std::to_string(cs.n) +
                         " measured modes");
    }
    const auto report = validate(cs);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw InputError("invalid constraint set: " + v.constraint + ": " + v.message);
    }

    const auto work = windows(cs, config.n_min, config.n_max);
    ScanResult out;
    out.entries.resize(work.size());
    parallel_for(work.size(), config.jobs, [&](std::size_t i) {
        const ModeIndex start(work[i].start);
        out.entries[i] = certify(restrict_to_window(cs, start, work[i].n), noise, config.certify, start);
    });

    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        const auto& e = out.entries[i];
        if (e.converged() && (!out.best || better(e, out.entries[*out.best]))) out.best = i;
    }

    for (std::size_t i = 0; i < out.entries.size();) {
        const int n = out.entries[i].n;
        const CertificationResult* pick = nullptr;
        for (; i < out.entries.size() && out.entries[i].n == n; ++i) {
            const auto& e = out.entries[i];
            if (e.converged() && (!pick || better(e, *pick))) pick = &e;
        }
        CurvePoint p;
        p.n = n;
        if (pick) {
            p.eof = pick->eof_ebits;
            p.start = pick->window_start;
        }
        out.curve.push_back(p);
    }
    return out;
}

void write_curve_csv(std::ostream& out, const ScanResult& result) {
    out << "n,eof,eof_sigma\n";
    char buf[64];
    for (const auto& p : result.curve) {
        std::snprintf(buf, sizeof buf, "%.6g", p.eof);
        out << p.n << ',' << buf << ',';
        if (p.eof_sigma) {
            std::snprintf(buf, sizeof buf, "%.6g", *p.eof_sigma);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace ebitcert
