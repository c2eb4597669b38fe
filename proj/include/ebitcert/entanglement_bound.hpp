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

#include <vector>

namespace ebitcert {

/// Raised when B reaches sqrt(2), which no valid density matrix produces.
class InvalidBoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BoundInputs {
    DensitySubmatrix completed;
    NoiseModel noise;
    std::vector<IndexPair> pairs;
    /// Amount (in X units, summed over C) by which the solver objective is
    /// lowered to stay a valid lower bound.
    double safety_margin = 0.0;
};

/// B = (2 / sqrt|C|) * sum_{(j,k) in C} (|x_jk| - sqrt(eps_jk * eps_kj)),
/// with x = X / n in trace-1 normalization, minus the margin contribution.
double b_quantity(const BoundInputs& in);

/// Lower bound on the entanglement of formation in ebits: -log2(1 - B^2/2),
/// 0 for B <= 0. Throws InvalidBoundError for B >= sqrt(2).
double eof_lower_bound(double b);

double concurrence_lower_bound(double b);

/// Smallest d with log2(d) >= eof, i.e. ceil(2^eof - 1e-9).
int dimension_certificate(double eof);

struct CertifyConfig {
    SolverConfig solver;
    /// Objective set; empty means all pairs.
    std::vector<IndexPair> pairs;
};

/// complete -> b_quantity -> eof_lower_bound -> dimension_certificate.
///
/// Pins are first renormalized to unit mean diagonal when the diagonal is
/// fully pinned. A non-converged solve is reported through
/// `diagnostics.status` with zero certified entanglement.
CertificationResult certify(const ConstraintSet& cs, const NoiseModel& noise, const CertifyConfig& config = {},
                            ModeIndex window_start = ModeIndex(1));

}  // namespace ebitcert
