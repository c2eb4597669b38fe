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

#pragma once

#include "ebitcert/entanglement_bound.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace ebitcert {

struct ScanConfig {
    int n_min = 2;
    int n_max = 2;
    CertifyConfig certify;
    /// Worker threads; 0 means the available parallelism.
    int jobs = 1;
};

struct CurvePoint {
    int n = 0;
    /// Best certified value over window starts at this size.
    double eof = 0.0;
    ModeIndex start{1};
    std::optional<double> eof_sigma;
};

struct ScanResult {
    /// One entry per (n, start), ordered by n then start.
    std::vector<CertificationResult> entries;
    /// Index into `entries` of the best converged window, if any converged.
    std::optional<std::size_t> best;
    std::vector<CurvePoint> curve;

    const CertificationResult* best_entry() const { return best ? &entries[*best] : nullptr; }
};

/// Certifies every contiguous window of every size in [n_min, n_max].
///
/// Sets with pinned elements need n_max <= cs.n and scan every start; sets
/// built only from band means and normalization use the single start 1 and
/// may exceed cs.n. Ties within 1e-9 go to the smaller n, then the smaller
/// start. Results do not depend on `jobs`.
ScanResult scan(const ConstraintSet& cs, const NoiseModel& noise, const ScanConfig& config);

/// Writes `n,eof,eof_sigma`, sigma left empty when not set.
void write_curve_csv(std::ostream& out, const ScanResult& result);

}  // namespace ebitcert
