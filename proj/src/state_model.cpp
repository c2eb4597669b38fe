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

#include "ebitcert/state_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace ebitcert {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

DensitySubmatrix::DensitySubmatrix(const Eigen::MatrixXd& entries) {
    if (entries.rows() != entries.cols()) {
        throw InputError("density submatrix must be square");
    }
    entries_ = 0.5 * (entries + entries.transpose());
    // Averaging may round differently on either side; copy the upper triangle down.
    for (Eigen::Index j = 0; j < entries_.rows(); ++j) {
        for (Eigen::Index k = j + 1; k < entries_.cols(); ++k) {
            entries_(k, j) = entries_(j, k);
        }
    }
    raw_mean_diagonal_ = mean_diagonal();
}

DensitySubmatrix DensitySubmatrix::identity(int n) {
    return DensitySubmatrix(Eigen::MatrixXd::Identity(n, n));
}

DensitySubmatrix DensitySubmatrix::all_ones(int n) {
    return DensitySubmatrix(Eigen::MatrixXd::Ones(n, n));
}

double DensitySubmatrix::mean_diagonal() const {
    if (entries_.rows() == 0) return 0.0;
    return entries_.diagonal().mean();
}

DensitySubmatrix DensitySubmatrix::renormalized() const {
    const double m = mean_diagonal();
    if (!(m > 0.0)) throw InputError("cannot renormalize a submatrix with non-positive mean diagonal");
    return DensitySubmatrix(entries_ / m);
}

std::string describe(const Constraint& c) {
    return std::visit(overloaded{
                          [](const PinElement& p) {
                              return "PinElement(" + std::to_string(p.j.value()) + "," +
                                     std::to_string(p.k.value()) + ")=" + fmt_double(p.value);
                          },
                          [](const BandMean& b) {
                              return "BandMean(offset " + std::to_string(b.offset) + ")=" + fmt_double(b.value);
                          },
                          [](const DiagMean& d) { return "DiagMean=" + fmt_double(d.value); },
                      },
                      c);
}

std::set<int> ConstraintSet::known_offsets() const {
    std::set<int> out;
    for (const auto& c : constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) {
            const int off = std::abs(p->k.value() - p->j.value());
            if (off > 0) out.insert(off);
        } else if (const auto* b = std::get_if<BandMean>(&c)) {
            out.insert(b->offset);
        }
    }
    return out;
}

bool ConstraintSet::has_pins() const {
    return std::any_of(constraints.begin(), constraints.end(),
                       [](const Constraint& c) { return std::holds_alternative<PinElement>(c); });
}

bool ConstraintSet::has_band_means() const {
    return std::any_of(constraints.begin(), constraints.end(),
                       [](const Constraint& c) { return std::holds_alternative<BandMean>(c); });
}

bool ConstraintSet::diagonal_fully_pinned() const {
    if (n <= 0) return false;
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (const auto& c : constraints) {
        if (const auto* p = std::get_if<PinElement>(&c); p && p->j == p->k && p->j.in_range(n)) {
            seen[static_cast<size_t>(p->j.offset())] = true;
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

std::optional<double> ConstraintSet::diag_mean_target() const {
    for (const auto& c : constraints) {
        if (const auto* d = std::get_if<DiagMean>(&c)) return d->value;
    }
    return std::nullopt;
}

ValidationReport validate(const ConstraintSet& cs) {
    ValidationReport report;
    auto add = [&](const std::string& who, const std::string& kind, const std::string& msg) {
        report.violations.push_back({who, kind, msg});
    };

    if (cs.n < 1) add("ConstraintSet", "mode-count", "mode count must be at least 1");
    if (cs.constraints.empty()) report.warnings.push_back("no data");

    std::map<std::pair<int, int>, std::set<double>> pinned;
    std::map<int, std::set<double>> bands;
    std::set<double> diag_means;
    int diag_mean_count = 0;

    auto check_sigma = [&](const std::string& who, const std::optional<double>& sigma) {
        if (sigma && !(std::isfinite(*sigma) && *sigma >= 0.0)) {
            add(who, "sigma", "sigma must be finite and non-negative");
        }
    };

    for (const auto& c : cs.constraints) {
        const std::string who = describe(c);
        std::visit(overloaded{
                       [&](const PinElement& p) {
                           if (!p.j.in_range(cs.n) || !p.k.in_range(cs.n)) {
                               add(who, "out-of-range", "mode index outside 1.." + std::to_string(cs.n));
                               return;
                           }
                           if (!std::isfinite(p.value)) {
                               add(who, "value", "pinned value must be finite");
                               return;
                           }
                           if (p.j == p.k && !(p.value > 0.0)) {
                               add(who, "value", "pinned diagonal value must be positive");
                           }
                           check_sigma(who, p.sigma);
                           const int a = std::min(p.j.value(), p.k.value());
                           const int b = std::max(p.j.value(), p.k.value());
                           pinned[{a, b}].insert(p.value);
                       },
                       [&](const BandMean& b) {
                           if (b.offset < 1 || b.offset >= cs.n) {
                               add(who, "out-of-range", "band offset must lie in 1.." + std::to_string(cs.n - 1));
                               return;
                           }
                           if (!std::isfinite(b.value) || std::abs(b.value) > 1.0) {
                               add(who, "value", "band mean must lie in [-1, 1]");
                           }
                           check_sigma(who, b.sigma);
                           bands[b.offset].insert(b.value);
                       },
                       [&](const DiagMean& d) {
                           ++diag_mean_count;
                           if (!(std::isfinite(d.value) && d.value > 0.0)) {
                               add(who, "value", "diagonal mean target must be positive");
                           }
                           diag_means.insert(d.value);
                       },
                   },
                   c);
    }

    for (const auto& [key, values] : pinned) {
        if (values.size() > 1) {
            add("PinElement(" + std::to_string(key.first) + "," + std::to_string(key.second) + ")", "conflict",
                "element pinned to " + std::to_string(values.size()) + " different values");
        }
    }
    for (const auto& [offset, values] : bands) {
        if (values.size() > 1) {
            add("BandMean(offset " + std::to_string(offset) + ")", "conflict",
                "band mean given " + std::to_string(values.size()) + " different values");
        }
    }
    if (diag_mean_count > 1) {
        add("DiagMean", "duplicate", "at most one diagonal mean constraint is allowed");
    }

    std::sort(report.violations.begin(), report.violations.end());
    report.violations.erase(std::unique(report.violations.begin(), report.violations.end()),
                            report.violations.end());
    return report;
}

std::string to_string(CarConvention c) {
    return c == CarConvention::Relative ? "relative" : "absolute";
}

CarConvention car_convention_from_string(const std::string& s) {
    if (s == "relative") return CarConvention::Relative;
    if (s == "absolute") return CarConvention::Absolute;
    throw InputError("car convention must be 'relative' or 'absolute', got '" + s + "'");
}

double NoiseModel::cross_term(double x_jj, double x_kk) const {
    if (std::isinf(car)) return 0.0;
    if (convention == CarConvention::Absolute) return 1.0 / car;
    return std::sqrt(std::max(x_jj, 0.0) * std::max(x_kk, 0.0)) / car;
}

std::string to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Converged: return "converged";
        case SolverStatus::MaxIter: return "max_iter";
        case SolverStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

DensitySubmatrix submatrix_from_full(const Eigen::MatrixXcd& rho) {
    if (rho.rows() != rho.cols()) throw InputError("density matrix must be square");
    const auto dim = rho.rows();
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(dim))));
    if (n * n != dim || n == 0) throw InputError("density matrix dimension must be a perfect square n*n");
    const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InputError("density matrix is not Hermitian");
    }
    Eigen::MatrixXd x(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j; k < n; ++k) {
            const double v = static_cast<double>(n) * rho(j * n + j, k * n + k).real();
            x(j, k) = v;
            x(k, j) = v;
        }
    }
    return DensitySubmatrix(x);
}

ConstraintSet restrict_to_window(const ConstraintSet& cs, ModeIndex start, int size) {
    if (size < 1) throw InputError("window size must be positive");
    const bool pins = cs.has_pins();
    if (pins && (start.value() < 1 || start.value() + size - 1 > cs.n)) {
        throw InputError("window [" + std::to_string(start.value()) + ", " + std::to_string(start.value() + size - 1) +
                         "] exceeds the " + std::to_string(cs.n) + " available modes");
    }
    ConstraintSet out;
    out.n = size;
    const int lo = start.value();
    const int hi = start.value() + size - 1;
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) {
            const int j = p->j.value();
            const int k = p->k.value();
            if (j >= lo && j <= hi && k >= lo && k <= hi) {
                PinElement q = *p;
                q.j = ModeIndex(j - lo + 1);
                q.k = ModeIndex(k - lo + 1);
                out.constraints.emplace_back(q);
            }
        } else if (const auto* b = std::get_if<BandMean>(&c)) {
            if (b->offset < size) out.constraints.emplace_back(*b);
        } else {
            out.constraints.push_back(c);
        }
    }
    return out;
}

ConstraintSet translate(const ConstraintSet& cs, int shift, int new_n) {
    ConstraintSet out;
    out.n = new_n;
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) {
            PinElement q = *p;
            q.j = ModeIndex(p->j.value() + shift);
            q.k = ModeIndex(p->k.value() + shift);
            out.constraints.emplace_back(q);
        } else {
            out.constraints.push_back(c);
        }
    }
    return out;
}

ConstraintSet renormalize_pins(const ConstraintSet& cs) {
    if (!cs.diagonal_fully_pinned()) return cs;
    double diag_sum = 0.0;
    std::set<int> counted;
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c); p && p->j == p->k && counted.insert(p->j.value()).second) {
            diag_sum += p->value;
        }
    }
    const double target = cs.diag_mean_target().value_or(1.0);
    const double scale = target * cs.n / diag_sum;
    if (scale == 1.0) return cs;
    ConstraintSet out = cs;
    for (auto& c : out.constraints) {
        if (auto* p = std::get_if<PinElement>(&c)) {
            p->value *= scale;
            if (p->sigma) *p->sigma *= scale;
        }
    }
    return out;
}

}  // namespace ebitcert
