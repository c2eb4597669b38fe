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

#include "ebitcert/completion_solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <limits>

namespace ebitcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BandEntry {
    int row = 0;
    bool pinned = false;
    double pin = 0.0;
    double weight = 0.0;  // L1 weight, 1 if (row, row + offset) is in C
};

struct Band {
    int offset = 0;
    std::vector<BandEntry> entries;
    bool has_sum = false;
    double sum_target = 0.0;
    bool slackable = false;
    bool constrained = false;  // any pin, weight or sum on this band
};

// Constraints grouped by superdiagonal. Every constraint the solver accepts
// touches a single band, so the projection separates across bands.
class Layout {
public:
    Layout(const ConstraintSet& cs, const std::vector<IndexPair>& objective) : n_(cs.n) {
        bands_.resize(static_cast<size_t>(n_));
        for (int off = 0; off < n_; ++off) {
            Band& b = bands_[static_cast<size_t>(off)];
            b.offset = off;
            b.entries.resize(static_cast<size_t>(n_ - off));
            for (int r = 0; r < n_ - off; ++r) b.entries[static_cast<size_t>(r)].row = r;
        }
        for (const auto& c : cs.constraints) {
            if (const auto* p = std::get_if<PinElement>(&c)) {
                const int a = std::min(p->j.offset(), p->k.offset());
                const int off = std::abs(p->k.value() - p->j.value());
                Band& b = bands_[static_cast<size_t>(off)];
                auto& e = b.entries[static_cast<size_t>(a)];
                e.pinned = true;
                e.pin = p->value;
                b.constrained = true;
                ++measured_count_;
            } else if (const auto* m = std::get_if<BandMean>(&c)) {
                Band& b = bands_[static_cast<size_t>(m->offset)];
                b.has_sum = true;
                b.slackable = true;
                b.sum_target = m->value * static_cast<double>(n_ - m->offset);
                b.constrained = true;
                ++measured_count_;
            } else if (const auto* d = std::get_if<DiagMean>(&c)) {
                Band& b = bands_[0];
                b.has_sum = true;
                b.slackable = false;
                b.sum_target = d->value * static_cast<double>(n_);
                b.constrained = true;
            }
        }
        for (const auto& pair : objective) {
            const int a = pair.j.offset();
            const int off = pair.k.value() - pair.j.value();
            Band& b = bands_[static_cast<size_t>(off)];
            b.entries[static_cast<size_t>(a)].weight = 1.0;
            b.constrained = true;
        }
    }

    int n() const { return n_; }
    int measured_count() const { return measured_count_; }

    // Z = argmin sum_e w_e |z_e| / rho_scale + 1/2 ||z - y||^2_F over the
    // constraint set relaxed by `slack`. `l1_scale` = 0 disables the L1 term.
    void prox(const Eigen::MatrixXd& y, double l1_scale, double slack, Eigen::MatrixXd& z) const {
        z = y;
        for (const Band& b : bands_) {
            if (b.constrained) project_band(b, y, l1_scale, slack, z);
        }
    }

    // Largest deviation of a measured constraint (pins and band means).
    double measured_residual(const Eigen::MatrixXd& z) const {
        double worst = 0.0;
        for (const Band& b : bands_) {
            double sum = 0.0;
            for (const auto& e : b.entries) {
                const double v = z(e.row, e.row + b.offset);
                sum += v;
                if (e.pinned) worst = std::max(worst, std::abs(v - e.pin));
            }
            if (b.has_sum && b.slackable) {
                const double m = static_cast<double>(b.entries.size());
                worst = std::max(worst, std::abs(sum - b.sum_target) / m);
            }
        }
        return worst;
    }

    // Violation beyond the relaxation, including the unrelaxed diagonal mean.
    double constraint_violation(const Eigen::MatrixXd& z, double slack) const {
        double worst = 0.0;
        for (const Band& b : bands_) {
            double sum = 0.0;
            for (const auto& e : b.entries) {
                const double v = z(e.row, e.row + b.offset);
                sum += v;
                if (e.pinned) worst = std::max(worst, std::abs(v - e.pin) - slack);
            }
            if (b.has_sum) {
                const double m = static_cast<double>(b.entries.size());
                const double allowed = b.slackable ? slack : 0.0;
                worst = std::max(worst, std::abs(sum - b.sum_target) / m - allowed);
            }
        }
        for (Eigen::Index j = 0; j < z.rows(); ++j) {
            for (Eigen::Index k = j + 1; k < z.cols(); ++k) worst = std::max(worst, std::abs(z(j, k) - z(k, j)));
        }
        return std::max(worst, 0.0);
    }

    double diag_mean_violation(const Eigen::MatrixXd& z) const {
        const Band& b = bands_[0];
        if (!b.has_sum) return 0.0;
        return std::abs(z.diagonal().sum() - b.sum_target) / static_cast<double>(n_);
    }

    double objective(const Eigen::MatrixXd& z) const {
        double total = 0.0;
        for (const Band& b : bands_) {
            for (const auto& e : b.entries) total += e.weight * std::abs(z(e.row, e.row + b.offset));
        }
        return total;
    }

private:
    static void project_band(const Band& b, const Eigen::MatrixXd& y, double l1_scale, double slack,
                             Eigen::MatrixXd& z) {
        const size_t m = b.entries.size();
        // Off-diagonal entries appear twice in the Frobenius norm.
        const double multiplicity = b.offset == 0 ? 1.0 : 2.0;
        std::vector<double> yy(m), lo(m), hi(m), thr(m);
        for (size_t i = 0; i < m; ++i) {
            const auto& e = b.entries[i];
            yy[i] = y(e.row, e.row + b.offset);
            lo[i] = e.pinned ? e.pin - slack : -kInf;
            hi[i] = e.pinned ? e.pin + slack : kInf;
            thr[i] = e.weight * l1_scale / multiplicity;
        }
        auto x_of = [&](size_t i, double lam) {
            const double u = yy[i] - lam;
            const double a = std::abs(u) - thr[i];
            const double s = a > 0.0 ? std::copysign(a, u) : 0.0;
            return std::clamp(s, lo[i], hi[i]);
        };
        auto sum_at = [&](double lam) {
            double s = 0.0;
            for (size_t i = 0; i < m; ++i) s += x_of(i, lam);
            return s;
        };

        double lam = 0.0;
        if (b.has_sum) {
            const double half = b.slackable ? slack * static_cast<double>(m) : 0.0;
            const double slo = b.sum_target - half;
            const double shi = b.sum_target + half;
            const double s0 = sum_at(0.0);
            if (s0 < slo || s0 > shi) {
                lam = solve_multiplier(s0 < slo ? slo : shi, yy, thr, lo, hi, x_of, sum_at);
            }
        }
        for (size_t i = 0; i < m; ++i) {
            const auto& e = b.entries[i];
            const double v = x_of(i, lam);
            z(e.row, e.row + b.offset) = v;
            z(e.row + b.offset, e.row) = v;
        }
    }

    // Finds lam with sum_i x_i(lam) = target; the sum is continuous and
    // non-increasing in lam. Bisection locates the linear piece, then the
    // multiplier is solved exactly on it.
    template <class XOf, class SumAt>
    static double solve_multiplier(double target, const std::vector<double>& yy, const std::vector<double>& thr,
                                   const std::vector<double>& lo, const std::vector<double>& hi, XOf&& x_of,
                                   SumAt&& sum_at) {
        const size_t m = yy.size();
        double step = 1.0;
        for (size_t i = 0; i < m; ++i) step = std::max(step, std::abs(yy[i]) + thr[i]);
        step += std::abs(target) / static_cast<double>(std::max<size_t>(m, 1));
        double a = 0.0;  // sum_at(a) >= target
        double c = 0.0;  // sum_at(c) <= target
        const double s0 = sum_at(0.0);
        if (s0 < target) {
            a = -step;
            for (int k = 0; k < 64 && sum_at(a) < target; ++k) a *= 2.0;
        } else {
            c = step;
            for (int k = 0; k < 64 && sum_at(c) > target; ++k) c *= 2.0;
        }
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (a + c);
            if (mid <= a || mid >= c) break;
            if (sum_at(mid) >= target) {
                a = mid;
            } else {
                c = mid;
            }
        }
        const double lam = 0.5 * (a + c);
        // Exact solve on the linear piece containing lam.
        double fixed = 0.0;
        double linear = 0.0;
        int count = 0;
        for (size_t i = 0; i < m; ++i) {
            const double u = yy[i] - lam;
            const double x = x_of(i, lam);
            if (std::abs(u) > thr[i] && x > lo[i] && x < hi[i]) {
                linear += yy[i] - std::copysign(thr[i], u);
                ++count;
            } else {
                fixed += x;
            }
        }
        if (count == 0) return lam;
        const double exact = (fixed + linear - target) / count;
        // Keep the exact value only if it stays on the same piece.
        for (size_t i = 0; i < m; ++i) {
            const double u0 = yy[i] - lam;
            const double u1 = yy[i] - exact;
            const bool lin0 = std::abs(u0) > thr[i] && x_of(i, lam) > lo[i] && x_of(i, lam) < hi[i];
            const bool lin1 = std::abs(u1) > thr[i] && x_of(i, exact) > lo[i] && x_of(i, exact) < hi[i];
            if (lin0 != lin1 || (lin0 && std::signbit(u0) != std::signbit(u1))) return lam;
        }
        return exact;
    }

    int n_ = 0;
    int measured_count_ = 0;
    std::vector<Band> bands_;
};

// Maximal cliques of an undirected graph by Bron-Kerbosch with pivoting,
// stopping after `limit` cliques.
void maximal_cliques(const std::vector<std::vector<bool>>& adj, std::vector<int> r, std::vector<int> p,
                     std::vector<int> x, std::vector<std::vector<int>>& out, size_t limit) {
    if (out.size() >= limit) return;
    if (p.empty() && x.empty()) {
        out.push_back(std::move(r));
        return;
    }
    int pivot = p.empty() ? x.front() : p.front();
    size_t best = 0;
    for (const auto* set : {&p, &x}) {
        for (int u : *set) {
            const auto deg = static_cast<size_t>(
                std::count_if(p.begin(), p.end(), [&](int w) { return adj[static_cast<size_t>(u)][static_cast<size_t>(w)]; }));
            if (deg >= best) {
                best = deg;
                pivot = u;
            }
        }
    }
    const std::vector<int> candidates = p;
    for (int v : candidates) {
        if (adj[static_cast<size_t>(pivot)][static_cast<size_t>(v)]) continue;
        auto keep = [&](const std::vector<int>& s) {
            std::vector<int> o;
            for (int w : s) {
                if (adj[static_cast<size_t>(v)][static_cast<size_t>(w)]) o.push_back(w);
            }
            return o;
        };
        std::vector<int> rv = r;
        rv.push_back(v);
        maximal_cliques(adj, std::move(rv), keep(p), keep(x), out, limit);
        p.erase(std::find(p.begin(), p.end(), v));
        x.push_back(v);
    }
}

// A principal block whose entries are all pinned is fixed, and it must be PSD
// in every completion. When such a block is singular, each completion
// annihilates its kernel, so the feasible set lies in a proper face of the
// cone and has no interior there. Returns an orthonormal basis Q of the
// smallest face these kernels force (feasible X = Q W Q^T, W PSD), or nullopt
// when no block is singular. Confining the PSD step to that face restores an
// interior for the iteration.
std::optional<Eigen::MatrixXd> pinned_face(const ConstraintSet& cs, double tol) {
    const int n = cs.n;
    Eigen::MatrixXd value = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::vector<bool>> adj(static_cast<size_t>(n), std::vector<bool>(static_cast<size_t>(n), false));
    std::vector<bool> diag(static_cast<size_t>(n), false);
    for (const auto& c : cs.constraints) {
        const auto* p = std::get_if<PinElement>(&c);
        if (!p) continue;
        const int j = p->j.offset();
        const int k = p->k.offset();
        value(j, k) = value(k, j) = p->value;
        if (j == k) {
            diag[static_cast<size_t>(j)] = true;
        } else {
            adj[static_cast<size_t>(j)][static_cast<size_t>(k)] = adj[static_cast<size_t>(k)][static_cast<size_t>(j)] = true;
        }
    }
    std::vector<int> vertices;
    for (int j = 0; j < n; ++j) {
        if (diag[static_cast<size_t>(j)]) vertices.push_back(j);
    }
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            if (!diag[static_cast<size_t>(j)] || !diag[static_cast<size_t>(k)]) adj[static_cast<size_t>(j)][static_cast<size_t>(k)] = false;
        }
    }
    if (vertices.empty()) return std::nullopt;
    std::vector<std::vector<int>> cliques;
    maximal_cliques(adj, {}, vertices, {}, cliques, 4096);

    std::vector<Eigen::VectorXd> kernel;
    for (const auto& clique : cliques) {
        const auto m = static_cast<Eigen::Index>(clique.size());
        Eigen::MatrixXd block(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) block(a, b) = value(clique[static_cast<size_t>(a)], clique[static_cast<size_t>(b)]);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
        const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(es.eigenvalues()(i)) > tol * scale) continue;
            Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
            for (Eigen::Index a = 0; a < m; ++a) w(clique[static_cast<size_t>(a)]) = es.eigenvectors()(a, i);
            kernel.push_back(std::move(w));
        }
    }
    if (kernel.empty()) return std::nullopt;
    Eigen::MatrixXd span = Eigen::MatrixXd::Zero(n, n);
    for (const auto& w : kernel) span += w * w.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(span);
    const double top = es.eigenvalues()(n - 1);
    Eigen::Index free = 0;
    while (free < n && es.eigenvalues()(free) <= 1e-8 * top) ++free;
    return Eigen::MatrixXd(es.eigenvectors().leftCols(free));
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& v) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    const Eigen::VectorXd& lambda = es.eigenvalues();
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::Index first = 0;
    while (first < lambda.size() && lambda(first) <= 0.0) ++first;
    const Eigen::Index count = lambda.size() - first;
    if (count == 0) return Eigen::MatrixXd::Zero(v.rows(), v.cols());
    const Eigen::MatrixXd qp = q.rightCols(count);
    Eigen::MatrixXd x = qp * lambda.tail(count).asDiagonal() * qp.transpose();
    return 0.5 * (x + x.transpose());
}

// Projection onto {Q W Q^T : W PSD}; Q has orthonormal columns, so this is
// the PSD projection of the compressed matrix.
Eigen::MatrixXd project_face(const Eigen::MatrixXd& v, const Eigen::MatrixXd* face) {
    if (!face) return project_psd(v);
    if (face->cols() == 0) return Eigen::MatrixXd::Zero(v.rows(), v.cols());
    Eigen::MatrixXd x = *face * project_psd(face->transpose() * v * *face) * face->transpose();
    return 0.5 * (x + x.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

struct AdmmState {
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    int iterations = 0;
    double primal = 0.0;
    double dual = 0.0;
    bool converged = false;
    bool stopped = false;
};

using ProxFn = std::function<void(const Eigen::MatrixXd&, double rho, Eigen::MatrixXd&)>;
// Called every `kCheckpoint` iterations with the current state; returning
// true stops the iteration.
using StopFn = std::function<bool(const AdmmState&)>;
constexpr int kCheckpoint = 2000;

struct Step {
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    Eigen::MatrixXd u;
    double primal = 0.0;
    double dual = 0.0;
};

// One over-relaxed scaled-form ADMM step from (z, u).
Step admm_step(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u, const ProxFn& prox, double rho, double alpha,
               const Eigen::MatrixXd* face) {
    Step s;
    s.x = project_face(z - u, face);
    const Eigen::MatrixXd x_hat = alpha * s.x + (1.0 - alpha) * z;
    s.z = z;
    prox(x_hat + u, rho, s.z);
    s.u = u + x_hat - s.z;
    s.primal = (s.x - s.z).norm();
    s.dual = rho * (s.z - z).norm();
    return s;
}

Eigen::VectorXd pack(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u) {
    Eigen::VectorXd v(z.size() + u.size());
    v << z.reshaped(), u.reshaped();
    return v;
}

void unpack(const Eigen::VectorXd& v, Eigen::Index n, Eigen::MatrixXd& z, Eigen::MatrixXd& u) {
    z = v.head(n * n).reshaped(n, n);
    u = v.tail(n * n).reshaped(n, n);
}

// Type-II Anderson acceleration of the fixed-point map s -> T(s).
class Anderson {
public:
    explicit Anderson(int memory) : memory_(memory) {}

    // Given the iterate s and its residual g = T(s) - s, returns the
    // extrapolated next iterate, or nullopt while the history is empty.
    std::optional<Eigen::VectorXd> extrapolate(const Eigen::VectorXd& s, const Eigen::VectorXd& g) {
        if (memory_ <= 0) return std::nullopt;
        if (has_prev_) {
            ds_.push_back(s - s_prev_);
            dg_.push_back(g - g_prev_);
            if (static_cast<int>(ds_.size()) > memory_) {
                ds_.pop_front();
                dg_.pop_front();
            }
        }
        s_prev_ = s;
        g_prev_ = g;
        has_prev_ = true;
        if (ds_.empty()) return std::nullopt;

        const auto cols = static_cast<Eigen::Index>(ds_.size());
        Eigen::MatrixXd dg(g.size(), cols);
        Eigen::MatrixXd ds(s.size(), cols);
        for (Eigen::Index i = 0; i < cols; ++i) {
            dg.col(i) = dg_[static_cast<size_t>(i)];
            ds.col(i) = ds_[static_cast<size_t>(i)];
        }
        const Eigen::VectorXd gamma = dg.colPivHouseholderQr().solve(g);
        if (!gamma.allFinite()) {
            reset();
            return std::nullopt;
        }
        return Eigen::VectorXd(s + g - (ds + dg) * gamma);
    }

    void reset() {
        ds_.clear();
        dg_.clear();
        has_prev_ = false;
    }

private:
    int memory_;
    std::deque<Eigen::VectorXd> ds_;
    std::deque<Eigen::VectorXd> dg_;
    Eigen::VectorXd s_prev_;
    Eigen::VectorXd g_prev_;
    bool has_prev_ = false;
};

// Scaled-form ADMM for min ind_PSD(X) + g(Z) s.t. X = Z, with safeguarded
// Anderson acceleration: an extrapolated iterate is kept only when its
// fixed-point residual does not exceed that of the plain step.
AdmmState run_admm(Eigen::MatrixXd z0, const ProxFn& prox, const SolverConfig& cfg, const StopFn& stop = {},
                   const Eigen::MatrixXd* face = nullptr) {
    AdmmState st;
    const auto n = z0.rows();
    double rho = cfg.rho;
    const double alpha = cfg.relaxation;
    Anderson anderson(cfg.anderson_memory);

    Eigen::MatrixXd z = std::move(z0);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd s = pack(z, u);
    Step cur = admm_step(z, u, prox, rho, alpha, face);
    double best_residual = std::numeric_limits<double>::infinity();
    int best_at = 0;

    for (int it = 1; it <= cfg.max_iter; ++it) {
        st.iterations = it;
        st.primal = cur.primal;
        st.dual = cur.dual;
        st.x = cur.x;
        st.z = cur.z;
        const double eps_dual = cfg.tol_eq * std::max(1.0, rho * cur.u.norm());
        if (st.primal <= cfg.tol_psd && st.dual <= eps_dual) {
            st.converged = true;
            break;
        }
        if (stop && it % kCheckpoint == 0 && stop(st)) {
            st.stopped = true;
            break;
        }

        Eigen::VectorXd next_s = pack(cur.z, cur.u);
        std::optional<Step> next;
        const Eigen::VectorXd g = next_s - s;
        if (g.norm() < 0.5 * best_residual) {
            best_residual = g.norm();
            best_at = it;
        } else if (it - best_at >= cfg.anderson_restart) {
            // Accepted extrapolations can stall; plain steps resume progress.
            anderson.reset();
            best_residual = g.norm();
            best_at = it;
        }
        if (auto cand = anderson.extrapolate(s, g)) {
            unpack(*cand, n, z, u);
            Step trial = admm_step(z, u, prox, rho, alpha, face);
            if ((pack(trial.z, trial.u) - *cand).norm() <= g.norm()) {
                next_s = std::move(*cand);
                next = std::move(trial);
            }
        }

        if (cfg.balance_interval > 0 && it % cfg.balance_interval == 0) {
            double scale = 1.0;
            if (cur.primal > cfg.balance_ratio * cur.dual) {
                scale = cfg.balance_factor;
            } else if (cur.dual > cfg.balance_ratio * cur.primal) {
                scale = 1.0 / cfg.balance_factor;
            }
            if (scale != 1.0) {
                rho *= scale;
                next_s.tail(n * n) /= scale;
                next.reset();
                anderson.reset();
            }
        }

        s = std::move(next_s);
        if (next) {
            cur = std::move(*next);
        } else {
            unpack(s, n, z, u);
            cur = admm_step(z, u, prox, rho, alpha, face);
        }
    }
    return st;
}

void check_problem(const CompletionProblem& p) {
    const auto report = validate(p.cs);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw InputError("invalid constraint set: " + v.constraint + ": " + v.message);
    }
    if (p.objective.empty()) throw InputError("objective set C must be non-empty");
    for (const auto& pair : p.objective) {
        if (!(pair.j < pair.k) || !pair.j.in_range(p.cs.n) || !pair.k.in_range(p.cs.n)) {
            throw InputError("objective pair (" + std::to_string(pair.j.value()) + "," +
                             std::to_string(pair.k.value()) + ") must satisfy 1 <= j < k <= n");
        }
    }
}

Eigen::MatrixXd initial_point(const Layout& layout, const ConstraintSet& cs, double slack) {
    const int n = cs.n;
    Eigen::MatrixXd z;
    layout.prox(cs.diag_mean_target().value_or(1.0) * Eigen::MatrixXd::Identity(n, n), 0.0, slack, z);
    return z;
}

Restoration run_restoration(const Layout& layout, const ConstraintSet& cs, const SolverConfig& cfg) {
    Restoration out;
    if (layout.measured_count() == 0) {
        out.converged = true;
        return out;
    }
    // prox of g(Z) = h(Z), the Chebyshev residual of the measured constraints:
    // minimize over t the convex function t + rho/2 ||P_t(Y) - Y||^2.
    ProxFn prox = [&layout](const Eigen::MatrixXd& y, double rho, Eigen::MatrixXd& z) {
        auto phi = [&](double t, Eigen::MatrixXd& out) {
            layout.prox(y, 0.0, t, out);
            return t + 0.5 * rho * (out - y).squaredNorm();
        };
        double a = 0.0;
        double c = layout.measured_residual(y) + layout.diag_mean_violation(y) + 1e-15;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        Eigen::MatrixXd tmp;
        double t1 = c - g * (c - a);
        double t2 = a + g * (c - a);
        double f1 = phi(t1, tmp);
        double f2 = phi(t2, tmp);
        for (int k = 0; k < 80; ++k) {
            if (f1 <= f2) {
                c = t2;
                t2 = t1;
                f2 = f1;
                t1 = c - g * (c - a);
                f1 = phi(t1, tmp);
            } else {
                a = t1;
                t1 = t2;
                f1 = f2;
                t2 = a + g * (c - a);
                f2 = phi(t2, tmp);
            }
        }
        phi(0.5 * (a + c), z);
    };
    const AdmmState st = run_admm(initial_point(layout, cs, 0.0), prox, cfg);
    // The PSD iterate rescaled onto the diagonal-mean constraint is a feasible
    // point for slack h(X'), so h(X') bounds the restoration value from above.
    Eigen::MatrixXd feasible = st.x;
    if (const auto target = cs.diag_mean_target()) {
        const double trace = feasible.trace();
        if (trace > 0.0) feasible *= *target * cs.n / trace;
    }
    out.slack = layout.measured_residual(feasible);
    out.iterations = st.iterations;
    out.converged = st.converged;
    return out;
}

}  // namespace

std::string to_string(SlackMode m) { return m == SlackMode::Strict ? "strict" : "minimal"; }

SlackMode slack_mode_from_string(const std::string& s) {
    if (s == "strict") return SlackMode::Strict;
    if (s == "minimal") return SlackMode::Minimal;
    throw InputError("pin slack mode must be 'strict' or 'minimal', got '" + s + "'");
}

std::vector<IndexPair> CompletionProblem::all_pairs(int n) {
    std::vector<IndexPair> out;
    for (int j = 1; j <= n; ++j) {
        for (int k = j + 1; k <= n; ++k) out.push_back({ModeIndex(j), ModeIndex(k)});
    }
    return out;
}

Restoration restoration_slack(const ConstraintSet& cs, const SolverConfig& config) {
    check_problem({cs, CompletionProblem::all_pairs(std::max(cs.n, 2))});
    return run_restoration(Layout(cs, {}), cs, config);
}

Completion complete(const CompletionProblem& problem, const SolverConfig& config) {
    check_problem(problem);
    const ConstraintSet& cs = problem.cs;
    const Layout layout(cs, problem.objective);
    const Layout measured_only(cs, {});

    SolverDiagnostics diag;
    double slack = 0.0;
    int restoration_iterations = 0;
    if (config.slack == SlackMode::Minimal) {
        const Restoration r = run_restoration(measured_only, cs, config);
        restoration_iterations = r.iterations;
        if (r.slack > config.tol_psd) slack = r.slack * (1.0 + config.slack_headroom) + 1e-7;
    }

    bool infeasible = false;
    bool restoration_checked = false;
    double last_primal = kInf;
    StopFn stop = [&](const AdmmState& st) {
        if (config.slack != SlackMode::Strict || restoration_checked) return false;
        const bool stalled = st.primal > 1e3 * config.tol_psd && st.primal > 0.5 * last_primal;
        last_primal = st.primal;
        if (!stalled) return false;
        restoration_checked = true;
        const Restoration r = run_restoration(measured_only, cs, config);
        restoration_iterations += r.iterations;
        infeasible = r.converged && r.slack > config.infeasibility_tol;
        return infeasible;
    };

    // A relaxed set has an interior of its own.
    const std::optional<Eigen::MatrixXd> face =
        slack == 0.0 ? pinned_face(cs, config.face_tol) : std::optional<Eigen::MatrixXd>{};
    diag.face_dimension = face ? static_cast<int>(face->cols()) : cs.n;

    ProxFn prox = [&](const Eigen::MatrixXd& y, double rho, Eigen::MatrixXd& z) { layout.prox(y, 1.0 / rho, slack, z); };
    AdmmState st = run_admm(initial_point(layout, cs, slack), prox, config, stop, face ? &*face : nullptr);

    if (!st.converged && !infeasible && config.slack == SlackMode::Strict && !restoration_checked) {
        const Restoration r = run_restoration(measured_only, cs, config);
        restoration_iterations += r.iterations;
        infeasible = r.converged && r.slack > config.infeasibility_tol;
    }

    diag.iterations = st.iterations + restoration_iterations;
    diag.primal_residual = st.primal;
    diag.dual_residual = st.dual;
    diag.min_eigenvalue = min_eigenvalue(st.z);
    diag.constraint_residual = layout.constraint_violation(st.z, slack);
    diag.objective = layout.objective(st.z);
    diag.objective_margined =
        diag.objective -
        (diag.primal_residual + diag.constraint_residual) * std::sqrt(static_cast<double>(problem.objective.size()));
    diag.pin_slack = slack;
    if (infeasible) {
        diag.status = SolverStatus::Infeasible;
    } else if (st.converged && diag.min_eigenvalue >= -config.tol_psd && diag.constraint_residual <= config.tol_eq) {
        diag.status = SolverStatus::Converged;
    } else {
        diag.status = SolverStatus::MaxIter;
    }
    return {DensitySubmatrix(st.z), diag};
}

double psd_check(const DensitySubmatrix& x) { return min_eigenvalue(x.entries()); }

}  // namespace ebitcert
