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

#include "ebitcert/window_scan.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

namespace ebitcert {

/// Raised by mc_bound when no trial yields a converged certification.
class NoFeasibleTrialsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct McConfig {
    int trials = 200;
    std::uint64_t seed = 0;
    /// Clamp resampled visibilities to [0, 1] (band means to [-1, 1]).
    bool clamp = true;
    int jobs = 1;
};

/// Independent generator for one trial, a pure function of (seed, trial).
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial);

/// Resamples every measured value from a normal distribution with its sigma.
///
/// Off-diagonal pins between two pinned diagonal entries are resampled as
/// visibilities 2X/(d_j+d_k), clamped, and rebuilt with the resampled
/// diagonals. Other pins and band means are resampled directly. DiagMean is
/// left alone. Throws InputError naming the first constraint without sigma.
ConstraintSet perturb(const ConstraintSet& cs, std::mt19937_64& rng, bool clamp = true);

struct McTrial {
    int trial = 0;
    double eof = 0.0;
    /// Window size of the certified value (the best window when scanning).
    int n_best = 0;
    bool feasible = false;
    SolverStatus status = SolverStatus::Converged;
    /// Per-size best values when scanning, aligned with McResult::curve_n.
    std::vector<double> curve;
};

struct McResult {
    double mean = 0.0;
    /// Sample standard deviation over feasible trials; 0 for fewer than two.
    double sd = 0.0;
    int feasible = 0;
    int infeasible = 0;
    /// Trials that hit the iteration limit; excluded like infeasible ones.
    int max_iter = 0;
    std::vector<McTrial> trials;
    /// Window sizes of a scanned run and the sample sd of each size's best
    /// value over feasible trials.
    std::vector<int> curve_n;
    std::vector<double> curve_sd;
};

/// Scan range for mc_bound; without it each trial certifies the whole set.
struct McScan {
    int n_min = 2;
    int n_max = 2;
};

/// Certifies (or scans) each perturbed set and summarizes the feasible
/// trials. Throws NoFeasibleTrialsError when no trial converges.
McResult mc_bound(const ConstraintSet& cs, const NoiseModel& noise, const McConfig& mc,
                  const CertifyConfig& certify_config = {}, const std::optional<McScan>& scan_range = std::nullopt);

/// Copies the per-size sds of a scanned Monte Carlo run onto the curve.
void attach_sigma(ScanResult& scan_result, const McResult& mc);

/// Writes `trial,eof,n_best,feasible`.
void write_trials_csv(std::ostream& out, const McResult& result);

}  // namespace ebitcert
