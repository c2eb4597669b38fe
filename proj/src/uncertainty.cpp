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

#include "ebitcert/uncertainty.hpp"

#include "ebitcert/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace ebitcert {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double draw(std::mt19937_64& rng, double mean, double sigma) {
    if (sigma == 0.0) return mean;
    return std::normal_distribution<double>(mean, sigma)(rng);
}

// Sample mean and standard deviation; sd is 0 below two values.
std::pair<double, double> mean_sd(const std::vector<double>& values) {
    if (values.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ trial));
}

ConstraintSet perturb(const ConstraintSet& cs, std::mt19937_64& rng, bool clamp) {
    std::map<int, double> diag;
    std::map<int, double> diag_new;
    for (const auto& c : cs.constraints) {
        const std::string who = describe(c);
        if (const auto* p = std::get_if<PinElement>(&c)) {
            if (!p->sigma) throw InputError(who + " has no sigma to resample with");
            if (p->j == p->k) diag[p->j.value()] = p->value;
        } else if (const auto* b = std::get_if<BandMean>(&c)) {
            if (!b->sigma) throw InputError(who + " has no sigma to resample with");
        }
    }

    // Draws happen in constraint order, diagonals first, so a given rng state
    // maps to one perturbed set.
    ConstraintSet out = cs;
    for (auto& c : out.constraints) {
        if (auto* p = std::get_if<PinElement>(&c); p && p->j == p->k) {
            // A zero or negative intensity is unphysical; keep a positive floor.
            p->value = std::max(draw(rng, p->value, *p->sigma), 1e-12 * p->value);
            diag_new[p->j.value()] = p->value;
        }
    }
    for (auto& c : out.constraints) {
        if (auto* p = std::get_if<PinElement>(&c); p && p->j != p->k) {
            const auto dj = diag.find(p->j.value());
            const auto dk = diag.find(p->k.value());
            if (dj != diag.end() && dk != diag.end()) {
                const double scale = 0.5 * (dj->second + dk->second);
                double v = draw(rng, p->value / scale, *p->sigma / scale);
                if (clamp) v = std::clamp(v, 0.0, 1.0);
                p->value = v * 0.5 * (diag_new[p->j.value()] + diag_new[p->k.value()]);
            } else {
                p->value = draw(rng, p->value, *p->sigma);
            }
        } else if (auto* b = std::get_if<BandMean>(&c)) {
            b->value = draw(rng, b->value, *b->sigma);
            if (clamp) b->value = std::clamp(b->value, -1.0, 1.0);
        }
    }
    return out;
}

McResult mc_bound(const ConstraintSet& cs, const NoiseModel& noise, const McConfig& mc,
                  const CertifyConfig& certify_config, const std::optional<McScan>& scan_range) {
    if (mc.trials < 1) throw InputError("Monte Carlo needs at least one trial");
    const auto report = validate(cs);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw InputError("invalid constraint set: " + v.constraint + ": " + v.message);
    }
    // Fail on missing sigmas before starting any trial.
    {
        std::mt19937_64 probe(0);
        (void)perturb(cs, probe, mc.clamp);
    }

    McResult out;
    out.trials.resize(static_cast<std::size_t>(mc.trials));
    // Trials run one solve each, so parallelism goes across trials.
    parallel_for(out.trials.size(), mc.jobs, [&](std::size_t i) {
        auto rng = trial_rng(mc.seed, i);
        const ConstraintSet trial_cs = perturb(cs, rng, mc.clamp);
        McTrial t;
        t.trial = static_cast<int>(i);
        if (scan_range) {
            ScanConfig sc{scan_range->n_min, scan_range->n_max, certify_config, 1};
            const ScanResult r = scan(trial_cs, noise, sc);
            for (const auto& p : r.curve) t.curve.push_back(p.eof);
            if (const auto* best = r.best_entry()) {
                t.eof = best->eof_ebits;
                t.n_best = best->n;
                t.feasible = true;
            } else {
                const bool any_infeasible = std::any_of(r.entries.begin(), r.entries.end(), [](const auto& e) {
                    return e.diagnostics.status == SolverStatus::Infeasible;
                });
                t.status = any_infeasible ? SolverStatus::Infeasible : SolverStatus::MaxIter;
            }
        } else {
            const CertificationResult r = certify(trial_cs, noise, certify_config);
            t.status = r.diagnostics.status;
            t.feasible = r.converged();
            t.n_best = r.n;
            t.eof = t.feasible ? r.eof_ebits : 0.0;
        }
        out.trials[i] = t;
    });

    std::vector<double> values;
    for (const auto& t : out.trials) {
        if (t.feasible) {
            values.push_back(t.eof);
        } else if (t.status == SolverStatus::Infeasible) {
            ++out.infeasible;
        } else {
            ++out.max_iter;
        }
    }
    out.feasible = static_cast<int>(values.size());
    if (values.empty()) {
        throw NoFeasibleTrialsError("all " + std::to_string(mc.trials) + " Monte Carlo trials failed (" +
                         std::to_string(out.infeasible) + " infeasible, " + std::to_string(out.max_iter) +
                         " at the iteration limit)");
    }
    const auto [mean, sd] = mean_sd(values);
    out.mean = mean;
    out.sd = sd;

    if (scan_range) {
        for (int n = scan_range->n_min; n <= scan_range->n_max; ++n) out.curve_n.push_back(n);
        for (std::size_t i = 0; i < out.curve_n.size(); ++i) {
            std::vector<double> column;
            for (const auto& t : out.trials) {
                if (t.feasible && i < t.curve.size()) column.push_back(t.curve[i]);
            }
            out.curve_sd.push_back(mean_sd(column).second);
        }
    }
    return out;
}

void attach_sigma(ScanResult& scan_result, const McResult& mc) {
    for (auto& p : scan_result.curve) {
        for (std::size_t i = 0; i < mc.curve_n.size(); ++i) {
            if (mc.curve_n[i] == p.n) p.eof_sigma = mc.curve_sd[i];
        }
    }
}

void write_trials_csv(std::ostream& out, const McResult& result) {
    out << "trial,eof,n_best,feasible\n";
    char buf[64];
    for (const auto& t : result.trials) {
        std::snprintf(buf, sizeof buf, "%.6g", t.eof);
        out << t.trial << ',' << buf << ',' << t.n_best << ',' << (t.feasible ? 1 : 0) << '\n';
    }
}

}  // namespace ebitcert
