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

#include "ebitcert/state_model.hpp"

#include <vector>

namespace ebitcert {

/// How measured constraints (pins and band means) are treated.
enum class SlackMode {
    /// Exact equality; data admitting no PSD completion is reported Infeasible.
    Strict,
    /// First find the smallest uniform relaxation t* of every measured
    /// constraint admitting a PSD completion, then complete within it.
    /// Used for rounded or noisy data. DiagMean is never relaxed.
    Minimal,
};

std::string to_string(SlackMode m);
SlackMode slack_mode_from_string(const std::string& s);

struct SolverConfig {
    double tol_eq = 1e-8;
    double tol_psd = 1e-8;
    int max_iter = 50000;
    double rho = 1.0;
    /// Residual balancing: rescale rho by `balance_factor` when one residual
    /// exceeds the other by `balance_ratio`.
    double balance_ratio = 10.0;
    double balance_factor = 2.0;
    int balance_interval = 10;
    /// ADMM over-relaxation in (0, 2).
    double relaxation = 1.6;
    /// Anderson acceleration history length; 0 disables it.
    int anderson_memory = 20;
    /// The Anderson history is cleared when the fixed-point residual has not
    /// halved within this many iterations.
    int anderson_restart = 500;
    SlackMode slack = SlackMode::Strict;
    /// Minimal mode relaxes by t* (1 + slack_headroom) + 1e-7, so the relaxed
    /// set keeps an interior for the iteration to work in.
    double slack_headroom = 0.1;
    /// Restoration slack above which strict-mode data is declared infeasible.
    double infeasibility_tol = 1e-6;
    /// Eigenvalues of a fully pinned principal block at most face_tol times
    /// its largest are treated as exact zeros, confining the iteration to the
    /// face they force.
    double face_tol = 1e-11;
};

struct CompletionProblem {
    ConstraintSet cs;
    /// Objective set C of pairs j < k.
    std::vector<IndexPair> objective;

    static std::vector<IndexPair> all_pairs(int n);
};

struct Completion {
    DensitySubmatrix matrix;
    SolverDiagnostics diagnostics;
};

/// Minimizes sum_{(j,k) in C} |X[j][k]| over PSD X satisfying the constraints.
///
/// The returned matrix satisfies every linear constraint to rounding; its
/// distance to the PSD cone is bounded by the final primal residual.
/// Throws InputError if the constraint set fails validation or C is empty.
Completion complete(const CompletionProblem& problem, const SolverConfig& config = {});

/// Smallest uniform relaxation of pins and band means that admits a PSD
/// completion (the Chebyshev restoration value), as computed by the solver.
struct Restoration {
    double slack = 0.0;
    int iterations = 0;
    bool converged = false;
};
Restoration restoration_slack(const ConstraintSet& cs, const SolverConfig& config = {});

/// Smallest eigenvalue of a symmetric matrix.
double psd_check(const DensitySubmatrix& x);
inline bool is_psd(const DensitySubmatrix& x, double tol) { return psd_check(x) >= -tol; }

}  // namespace ebitcert
