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

#include "ebitcert/entanglement_bound.hpp"

#include <cmath>

namespace ebitcert {

double b_quantity(const BoundInputs& in) {
    if (in.pairs.empty()) throw InputError("objective set C must be non-empty");
    const int n = in.completed.n();
    if (n < 2) throw InputError("B needs at least two modes");
    const double dim = static_cast<double>(n);
    double sum = 0.0;
    for (const auto& p : in.pairs) {
        const double x_jk = in.completed(p.j, p.k) / dim;
        const double x_jj = in.completed(p.j, p.j) / dim;
        const double x_kk = in.completed(p.k, p.k) / dim;
        sum += std::abs(x_jk) - in.noise.cross_term(x_jj, x_kk);
    }
    sum -= in.safety_margin / dim;
    return 2.0 / std::sqrt(static_cast<double>(in.pairs.size())) * sum;
}

double eof_lower_bound(double b) {
    if (!(b > 0.0)) return 0.0;
    if (b * b >= 2.0) {
        throw InvalidBoundError("B = " + std::to_string(b) + " >= sqrt(2); inputs are inconsistent");
    }
    return -std::log2(1.0 - 0.5 * b * b);
}

double concurrence_lower_bound(double b) { return std::max(b, 0.0); }

int dimension_certificate(double eof) {
    if (eof < 0.0) throw InputError("entanglement of formation must be non-negative");
    return std::max(1, static_cast<int>(std::ceil(std::exp2(eof) - 1e-9)));
}

CertificationResult certify(const ConstraintSet& cs, const NoiseModel& noise, const CertifyConfig& config,
                            ModeIndex window_start) {
    const ConstraintSet normalized = renormalize_pins(cs);
    CompletionProblem problem{normalized, config.pairs.empty() ? CompletionProblem::all_pairs(cs.n) : config.pairs};
    Completion completion = complete(problem, config.solver);

    CertificationResult out;
    out.n = cs.n;
    out.window_start = window_start;
    out.diagnostics = completion.diagnostics;
    out.completed = std::move(completion.matrix);
    if (!out.converged()) return out;

    const double margin = out.diagnostics.objective - out.diagnostics.objective_margined;
    BoundInputs in{out.completed, noise, problem.objective, 0.0};
    out.b_raw = b_quantity(in);
    in.safety_margin = margin;
    out.b = b_quantity(in);
    out.eof_raw_ebits = eof_lower_bound(out.b_raw);
    out.eof_ebits = eof_lower_bound(out.b);
    out.concurrence = concurrence_lower_bound(out.b);
    out.d_min = dimension_certificate(out.eof_ebits);
    return out;
}

}  // namespace ebitcert
