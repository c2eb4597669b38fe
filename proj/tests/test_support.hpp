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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>
#include <vector>

namespace ebitcert::testing {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, kept apart
/// from the library's eigensolver so it can serve as an oracle.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> out(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a(i, i);
    std::sort(out.begin(), out.end());
    return out;
}

inline double oracle_min_eigenvalue(const Eigen::MatrixXd& a) { return jacobi_eigenvalues(a).front(); }

/// Largest violation of the constraints by x beyond a relaxation of `slack`,
/// each measured in its own units.
inline double oracle_constraint_residual(const ConstraintSet& cs, const Eigen::MatrixXd& x, double slack = 0.0) {
    double worst = 0.0;
    const int n = cs.n;
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) {
            const double v = x(p->j.offset(), p->k.offset());
            worst = std::max(worst, std::abs(v - p->value) - slack);
        } else if (const auto* b = std::get_if<BandMean>(&c)) {
            double sum = 0.0;
            for (int j = 0; j + b->offset < n; ++j) sum += x(j, j + b->offset);
            worst = std::max(worst, std::abs(sum / (n - b->offset) - b->value) - slack);
        } else if (const auto* d = std::get_if<DiagMean>(&c)) {
            worst = std::max(worst, std::abs(x.trace() / n - d->value));
        }
    }
    return std::max(worst, 0.0);
}

/// Random correlation-like PSD matrix of the given rank with mean diagonal 1.
inline Eigen::MatrixXd random_psd(int n, int rank, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(n, rank);
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < rank; ++r) g(i, r) = gauss(rng);
    }
    Eigen::MatrixXd x = g * g.transpose();
    return x / (x.trace() / n);
}

/// Pins the diagonal and the given offsets of x, plus DiagMean.
inline ConstraintSet pin_offsets(const Eigen::MatrixXd& x, const std::vector<int>& offsets) {
    ConstraintSet cs;
    cs.n = static_cast<int>(x.rows());
    for (int j = 0; j < cs.n; ++j) {
        cs.constraints.emplace_back(PinElement{ModeIndex(j + 1), ModeIndex(j + 1), x(j, j), 0.0});
    }
    for (int i : offsets) {
        for (int j = 0; j + i < cs.n; ++j) {
            cs.constraints.emplace_back(PinElement{ModeIndex(j + 1), ModeIndex(j + i + 1), x(j, j + i), 0.0});
        }
    }
    cs.constraints.emplace_back(DiagMean{1.0});
    return cs;
}

/// All offsets 1..n-1 given as band means of 1: the maximally coherent case.
inline ConstraintSet perfect_bands(int n) {
    ConstraintSet cs;
    cs.n = n;
    for (int i = 1; i < n; ++i) cs.constraints.emplace_back(BandMean{i, 1.0, 0.0});
    cs.constraints.emplace_back(DiagMean{1.0});
    return cs;
}

/// The 3-mode chain with unit diagonal and both neighbour coherences a.
inline ConstraintSet chain3(double a) {
    ConstraintSet cs;
    cs.n = 3;
    for (int j = 1; j <= 3; ++j) cs.constraints.emplace_back(PinElement{ModeIndex(j), ModeIndex(j), 1.0, 0.0});
    cs.constraints.emplace_back(PinElement{ModeIndex(1), ModeIndex(2), a, 0.0});
    cs.constraints.emplace_back(PinElement{ModeIndex(2), ModeIndex(3), a, 0.0});
    return cs;
}

/// Entanglement entropy of populations p (summing to 1).
inline double entropy_bits(const std::vector<double>& p) {
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log2(x);
    }
    return h;
}

}  // namespace ebitcert::testing
