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

#include "ebitcert/completion_solver.hpp"
#include "ebitcert/state_model.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ebitcert {

struct VisibilityEstimate {
    double v = 0.0;
    double sigma = 0.0;
};

/// Fringe contrast (c_max - c_min) / (c_max + c_min) with Poisson error
/// propagation. Throws InputError on c_max = c_min = 0 or c_max < c_min.
VisibilityEstimate visibility_from_extrema(double c_max, double c_min);

struct PhaseSample {
    double phase = 0.0;
    double count = 0.0;
    double seconds = 1.0;
};

/// A two-photon interference scan for one pair (time-bin) or one band
/// offset (energy-time). Exactly one of `pair` and `offset` is normally set.
struct PhaseScanRecord {
    std::optional<IndexPair> pair;
    std::optional<int> offset;
    std::vector<PhaseSample> samples;
};

/// Weighted least-squares fit of rate(phi) = a + c1 cos(phi) + c2 sin(phi)
/// with Poisson weights; V = sqrt(c1^2 + c2^2) / a clamped to [0, 1], sigma
/// from the fit covariance. Needs at least 5 samples spanning more than pi.
VisibilityEstimate visibility_from_scan(const PhaseScanRecord& rec);

/// X[j][k] = V * (X[j][j] + X[k][k]) / 2.
double offdiag_from_visibility(double v, double diag_j, double diag_k);

/// Inverse of offdiag_from_visibility: V = 2 X[j][k] / (X[j][j] + X[k][k]).
double visibility_from_offdiag(double x_jk, double diag_j, double diag_k);

struct CoincidenceHistogram {
    /// (j, k) -> coincidence count, 1-based mode labels.
    std::map<std::pair<int, int>, std::uint64_t> counts;
};

struct CarEstimate {
    double car = 0.0;
    /// Set when no accidental was recorded; `car` is then the mean diagonal
    /// count, a conservative floor.
    bool lower_bound = false;
};

/// Mean diagonal count over mean off-diagonal count.
CarEstimate car_from_histogram(const CoincidenceHistogram& h);

struct DiagonalEntry {
    int j = 0;
    double value = 1.0;
    double sigma = 0.0;
};

struct VisibilityEntry {
    int j = 0;
    int k = 0;
    double v = 0.0;
    double sigma = 0.0;
};

struct BandEntry {
    int offset = 0;
    double v = 0.0;
    double sigma = 0.0;
};

enum class Experiment { TimeBin, EnergyTime };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

/// Contents of a measurement file, kept in file units so that saving and
/// reloading reproduces the constraint set exactly.
struct Measurement {
    Experiment experiment = Experiment::TimeBin;
    int n_modes = 0;
    double car = std::numeric_limits<double>::infinity();
    CarConvention car_convention = CarConvention::Relative;
    std::vector<DiagonalEntry> diagonal;
    std::vector<VisibilityEntry> visibilities;
    std::vector<BandEntry> band_averages;
    /// Slack mode the data calls for (rounded published values need Minimal).
    std::optional<SlackMode> pin_slack;
    /// Quoted sigmas are run-to-run scatter over this many runs; the sigma of
    /// the mean, sigma / sqrt(sigma_runs), is attached to the constraints.
    double sigma_runs = 1.0;
    std::string notes;

    ConstraintSet constraints() const;
    NoiseModel noise() const;
};

/// Parses and checks a measurement document. Errors name the offending field.
Measurement parse_measurement(const nlohmann::json& doc);
nlohmann::json to_json(const Measurement& m);

Measurement load_measurement_file(const std::filesystem::path& path);
void save_measurement_file(const Measurement& m, const std::filesystem::path& path);

/// CSV with header `j,k,count`.
CoincidenceHistogram load_histogram_csv(const std::filesystem::path& path);
/// CSV with header `phase,count,seconds`.
PhaseScanRecord load_phase_scan_csv(const std::filesystem::path& path);

}  // namespace ebitcert
