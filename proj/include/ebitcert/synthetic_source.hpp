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

#include "ebitcert/measurement_ingest.hpp"
#include "ebitcert/state_model.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <vector>

#include "json.hpp"

namespace ebitcert {

/// A state sum_j c_j e^{i phi_j} |j,j> mixed with noise.
struct SyntheticStateSpec {
    int n = 0;
    /// Amplitudes c_j >= 0 with sum c_j^2 = 1.
    std::vector<double> c;
    /// Phases in radians; empty means all zero.
    std::vector<double> phi;
    /// Coherences between distinct modes are multiplied by this factor.
    double v_dephase = 1.0;
    /// Per-offset damping replacing v_dephase, e.g. for detector jitter at
    /// short offsets.
    std::map<int, double> offset_damping;
    /// Weight of the dephased mixture sum_j |j,j><j,j| / n.
    double p_white = 0.0;
    double car = std::numeric_limits<double>::infinity();
    /// Bin spacing, metadata only.
    double delta_ns = 0.0;

    /// Builds c from c_j^2 values, normalizing them to sum 1.
    static SyntheticStateSpec from_populations(const std::vector<double>& c_squared);
    /// Throws InputError unless every field lies in range.
    void check() const;
    double damping(int offset) const;
    bool pure() const;
};

DensitySubmatrix ideal_submatrix(const SyntheticStateSpec& spec);

/// Entanglement entropy -sum c_j^2 log2 c_j^2 of the pure state; throws
/// InputError for noisy specs.
double exact_eof_pure(const SyntheticStateSpec& spec);

/// Pins (time-bin) or band means (energy-time) at `offsets`, computed from
/// ideal_submatrix and each carrying sigma_v. Time-bin sets pin the diagonal.
struct SyntheticConstraints {
    ConstraintSet cs;
    NoiseModel noise;
};
SyntheticConstraints to_constraints(const SyntheticStateSpec& spec, Experiment experiment,
                                    const std::vector<int>& offsets, double sigma_v);

struct ScanSettings {
    /// Mean coincidences per diagonal bin and per scan sample at mid-fringe.
    double mean_counts = 1e4;
    double integration_s = 1.0;
    int phase_points = 8;
};

struct SyntheticCounts {
    CoincidenceHistogram histogram;
    std::vector<PhaseScanRecord> scans;
};

/// Poisson coincidence histogram (diagonal mean mean_counts * X[j][j],
/// accidentals at sqrt(lambda_j lambda_k) / car) and one phase scan per
/// scanned pair or band offset. Deterministic given the seed.
SyntheticCounts generate_counts(const SyntheticStateSpec& spec, Experiment experiment,
                                const std::vector<int>& offsets, const ScanSettings& settings, std::uint64_t seed);

/// Runs the ingest path on synthetic counts: normalized histogram diagonal,
/// fitted visibilities, and the histogram CAR.
Measurement measurement_from_counts(const SyntheticCounts& counts, int n, Experiment experiment);

SyntheticStateSpec parse_spec(const nlohmann::json& doc);
SyntheticStateSpec load_spec_file(const std::filesystem::path& path);

}  // namespace ebitcert
