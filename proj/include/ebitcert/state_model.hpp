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

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ebitcert {

/// Raised for malformed inputs: bad files, invalid constraint sets, bad arguments.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 1-based temporal mode label.
class ModeIndex {
public:
    constexpr ModeIndex() = default;
    constexpr explicit ModeIndex(int value) : value_(value) {}

    constexpr int value() const { return value_; }
    /// Zero-based position for matrix access.
    constexpr int offset() const { return value_ - 1; }
    constexpr bool in_range(int n) const { return value_ >= 1 && value_ <= n; }

    friend constexpr auto operator<=>(ModeIndex, ModeIndex) = default;

private:
    int value_ = 1;
};

/// Unordered pair of modes (j < k after construction), used for objective sets.
struct IndexPair {
    ModeIndex j;
    ModeIndex k;

    static IndexPair ordered(ModeIndex a, ModeIndex b) { return a <= b ? IndexPair{a, b} : IndexPair{b, a}; }
    friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

/// Real symmetric n x n matrix of coherences, X[j][k] = n * Re<j,j|rho|k,k>.
///
/// The stored scale has mean diagonal 1 once solved; `raw_mean_diagonal`
/// records the mean diagonal of the matrix at construction so callers holding
/// sub-normalized data can renormalize.
class DensitySubmatrix {
public:
    DensitySubmatrix() = default;
    /// Symmetrizes the input by averaging with its transpose.
    explicit DensitySubmatrix(const Eigen::MatrixXd& entries);

    static DensitySubmatrix identity(int n);
    static DensitySubmatrix all_ones(int n);

    int n() const { return static_cast<int>(entries_.rows()); }
    double operator()(ModeIndex j, ModeIndex k) const { return entries_(j.offset(), k.offset()); }
    const Eigen::MatrixXd& entries() const { return entries_; }

    double mean_diagonal() const;
    double raw_mean_diagonal() const { return raw_mean_diagonal_; }
    /// Copy rescaled so the mean diagonal equals 1.
    DensitySubmatrix renormalized() const;

private:
    Eigen::MatrixXd entries_;
    double raw_mean_diagonal_ = 0.0;
};

/// Fixes X[j][k] (and X[k][j]).
struct PinElement {
    ModeIndex j;
    ModeIndex k;
    double value = 0.0;
    std::optional<double> sigma;

    friend bool operator==(const PinElement&, const PinElement&) = default;
};

/// Fixes the mean of the offset-th superdiagonal: (1/(n-i)) sum_j X[j][j+i] = value.
struct BandMean {
    int offset = 1;
    double value = 0.0;
    std::optional<double> sigma;

    friend bool operator==(const BandMean&, const BandMean&) = default;
};

/// Fixes the mean of the diagonal, (1/n) sum_j X[j][j] = value.
struct DiagMean {
    double value = 1.0;

    friend bool operator==(const DiagMean&, const DiagMean&) = default;
};

using Constraint = std::variant<PinElement, BandMean, DiagMean>;

std::string describe(const Constraint& c);

struct ConstraintSet {
    int n = 0;
    std::vector<Constraint> constraints;

    /// Band offsets (>= 1) that carry data, from either pins or band means.
    std::set<int> known_offsets() const;
    bool has_pins() const;
    bool has_band_means() const;
    /// True when every diagonal element 1..n is pinned.
    bool diagonal_fully_pinned() const;
    std::optional<double> diag_mean_target() const;
};

struct Violation {
    std::string constraint;
    std::string kind;
    std::string message;

    friend auto operator<=>(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

/// Checks the ConstraintSet invariants. Never throws; the result is sorted
/// so it does not depend on the order of the constraint list.
ValidationReport validate(const ConstraintSet& cs);

enum class CarConvention { Relative, Absolute };

std::string to_string(CarConvention c);
CarConvention car_convention_from_string(const std::string& s);

/// Cross terms <j,k|rho|j,k> from the coincidence-to-accidental ratio.
///
/// Relative: <j,k|rho|j,k> = <j,j|rho|j,j> / car.
/// Absolute: <j,k|rho|j,k> = 1 / car in the trace-1 density matrix.
/// car = +inf disables the cross terms.
struct NoiseModel {
    double car = std::numeric_limits<double>::infinity();
    CarConvention convention = CarConvention::Relative;

    /// sqrt(eps_jk * eps_kj) in trace-1 normalization, given the trace-1
    /// populations x_jj and x_kk.
    double cross_term(double x_jj, double x_kk) const;
};

enum class SolverStatus { Converged, MaxIter, Infeasible };

std::string to_string(SolverStatus s);

struct SolverDiagnostics {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double min_eigenvalue = 0.0;
    double constraint_residual = 0.0;
    double objective = 0.0;
    /// Objective lowered by the residual safety margin.
    double objective_margined = 0.0;
    /// Uniform relaxation applied to measured constraints (0 in strict mode).
    double pin_slack = 0.0;
    /// Dimension of the face the PSD iterate was confined to; n when no fully
    /// pinned block is singular.
    int face_dimension = 0;
    SolverStatus status = SolverStatus::MaxIter;
};

struct CertificationResult {
    int n = 0;
    ModeIndex window_start{1};
    /// B with the solver safety margin applied; this is what the bound uses.
    double b = 0.0;
    /// B from the raw solver objective, for reference.
    double b_raw = 0.0;
    double eof_ebits = 0.0;
    double eof_raw_ebits = 0.0;
    double concurrence = 0.0;
    int d_min = 1;
    DensitySubmatrix completed;
    SolverDiagnostics diagnostics;

    bool converged() const { return diagnostics.status == SolverStatus::Converged; }
};

/// Extracts X[j][k] = n * Re<j,j|rho|k,k> from a full bipartite density
/// matrix over n x n modes, basis ordering |j,k> -> (j-1)*n + (k-1).
///
/// The result is not renormalized; `raw_mean_diagonal()` reports the
/// population mean so a caller may renormalize.
DensitySubmatrix submatrix_from_full(const Eigen::MatrixXcd& rho);

/// Restricts `cs` to the contiguous window [start, start + size) and
/// reindexes pins to 1..size. Band means are kept for offsets < size.
/// `size` may exceed cs.n only when the set carries no pins.
ConstraintSet restrict_to_window(const ConstraintSet& cs, ModeIndex start, int size);

/// Shifts every pin by `shift` modes inside a set of `new_n` modes.
ConstraintSet translate(const ConstraintSet& cs, int shift, int new_n);

/// When the diagonal is fully pinned, rescales every pinned value (and its
/// sigma) so the pinned diagonal mean is exactly the DiagMean target (1 if
/// absent). Otherwise returns the set unchanged.
ConstraintSet renormalize_pins(const ConstraintSet& cs);

}  // namespace ebitcert
