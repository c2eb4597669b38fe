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

#include "ebitcert/synthetic_source.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace ebitcert {

SyntheticStateSpec SyntheticStateSpec::from_populations(const std::vector<double>& c_squared) {
    double total = 0.0;
    for (double p : c_squared) {
        if (!(std::isfinite(p) && p >= 0.0)) throw InputError("populations c_j^2 must be finite and non-negative");
        total += p;
    }
    if (!(total > 0.0)) throw InputError("populations c_j^2 must not all be zero");
    SyntheticStateSpec spec;
    spec.n = static_cast<int>(c_squared.size());
    for (double p : c_squared) spec.c.push_back(std::sqrt(p / total));
    return spec;
}

void SyntheticStateSpec::check() const {
    if (n < 1) throw InputError("spec needs at least one mode");
    if (static_cast<int>(c.size()) != n) throw InputError("spec has " + std::to_string(c.size()) + " amplitudes for n = " + std::to_string(n));
    if (!phi.empty() && static_cast<int>(phi.size()) != n) throw InputError("spec phases must be empty or have n entries");
    double norm = 0.0;
    for (double cj : c) {
        if (!(std::isfinite(cj) && cj >= 0.0)) throw InputError("amplitudes must be finite and non-negative");
        norm += cj * cj;
    }
    if (std::abs(norm - 1.0) > 1e-12) throw InputError("amplitudes must satisfy sum c_j^2 = 1");
    for (double p : phi) {
        if (!std::isfinite(p)) throw InputError("phases must be finite");
    }
    if (!(v_dephase >= 0.0 && v_dephase <= 1.0)) throw InputError("v_dephase must lie in [0, 1]");
    for (const auto& [offset, v] : offset_damping) {
        if (offset < 1 || offset >= std::max(n, 2)) throw InputError("damping override offset out of range");
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("damping overrides must lie in [0, 1]");
    }
    if (!(p_white >= 0.0 && p_white <= 1.0)) throw InputError("p_white must lie in [0, 1]");
    if (!(car > 0.0)) throw InputError("car must be positive");
}

double SyntheticStateSpec::damping(int offset) const {
    const auto it = offset_damping.find(offset);
    return it == offset_damping.end() ? v_dephase : it->second;
}

bool SyntheticStateSpec::pure() const {
    if (p_white != 0.0 || v_dephase != 1.0) return false;
    for (const auto& [offset, v] : offset_damping) {
        if (v != 1.0) return false;
    }
    return true;
}

namespace {

double phase(const SyntheticStateSpec& spec, int j) { return spec.phi.empty() ? 0.0 : spec.phi[static_cast<size_t>(j)]; }

// Complex coherence <j,j|rho|k,k> / (1 - p_white) scaled by n, 0-based j != k.
std::complex<double> coherence(const SyntheticStateSpec& spec, int j, int k) {
    const double mag = spec.n * (1.0 - spec.p_white) * spec.c[static_cast<size_t>(j)] * spec.c[static_cast<size_t>(k)] *
                       spec.damping(std::abs(k - j));
    return std::polar(mag, phase(spec, j) - phase(spec, k));
}

void check_offsets(const SyntheticStateSpec& spec, const std::vector<int>& offsets) {
    if (offsets.empty()) throw InputError("no offsets to measure");
    for (int i : offsets) {
        if (i < 1 || i >= spec.n) throw InputError("offset " + std::to_string(i) + " outside 1.." + std::to_string(spec.n - 1));
    }
    if (std::set<int>(offsets.begin(), offsets.end()).size() != offsets.size()) throw InputError("duplicate offset");
}

}  // namespace

DensitySubmatrix ideal_submatrix(const SyntheticStateSpec& spec) {
    spec.check();
    const int n = spec.n;
    Eigen::MatrixXd x(n, n);
    for (int j = 0; j < n; ++j) {
        const double cj = spec.c[static_cast<size_t>(j)];
        x(j, j) = n * (1.0 - spec.p_white) * cj * cj + spec.p_white;
        for (int k = j + 1; k < n; ++k) {
            x(j, k) = coherence(spec, j, k).real();
            x(k, j) = x(j, k);
        }
    }
    return DensitySubmatrix(x).renormalized();
}

double exact_eof_pure(const SyntheticStateSpec& spec) {
    spec.check();
    if (!spec.pure()) throw InputError("exact entanglement is only defined here for pure specs");
    double h = 0.0;
    for (double cj : spec.c) {
        const double p = cj * cj;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

SyntheticConstraints to_constraints(const SyntheticStateSpec& spec, Experiment experiment,
                                    const std::vector<int>& offsets, double sigma_v) {
    check_offsets(spec, offsets);
    if (!(sigma_v >= 0.0)) throw InputError("sigma_v must be non-negative");
    const DensitySubmatrix x = ideal_submatrix(spec);
    const int n = spec.n;
    SyntheticConstraints out;
    out.cs.n = n;
    out.noise = NoiseModel{spec.car, CarConvention::Relative};
    if (experiment == Experiment::TimeBin) {
        for (int j = 1; j <= n; ++j) {
            out.cs.constraints.emplace_back(PinElement{ModeIndex(j), ModeIndex(j), x(ModeIndex(j), ModeIndex(j)), 0.0});
        }
        for (int i : offsets) {
            for (int j = 1; j + i <= n; ++j) {
                const ModeIndex a(j);
                const ModeIndex b(j + i);
                const double dj = x(a, a);
                const double dk = x(b, b);
                const double v = visibility_from_offdiag(x(a, b), dj, dk);
                out.cs.constraints.emplace_back(
                    PinElement{a, b, offdiag_from_visibility(v, dj, dk), offdiag_from_visibility(sigma_v, dj, dk)});
            }
        }
    } else {
        for (int i : offsets) {
            double sum = 0.0;
            for (int j = 1; j + i <= n; ++j) sum += x(ModeIndex(j), ModeIndex(j + i));
            out.cs.constraints.emplace_back(BandMean{i, sum / (n - i), sigma_v});
        }
    }
    out.cs.constraints.emplace_back(DiagMean{1.0});
    return out;
}

SyntheticCounts generate_counts(const SyntheticStateSpec& spec, Experiment experiment,
                                const std::vector<int>& offsets, const ScanSettings& settings, std::uint64_t seed) {
    if (!(settings.mean_counts > 0.0)) throw InputError("mean_counts must be positive");
    if (!(settings.integration_s > 0.0)) throw InputError("integration time must be positive");
    if (settings.phase_points < 5) throw InputError("phase scans need at least 5 points");
    check_offsets(spec, offsets);
    const DensitySubmatrix x = ideal_submatrix(spec);
    const int n = spec.n;
    const double scale = settings.mean_counts * settings.integration_s;
    std::mt19937_64 rng(seed);
    auto poisson = [&](double mean) -> std::uint64_t {
        if (mean <= 0.0) return 0;
        return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(rng));
    };

    SyntheticCounts out;
    std::vector<double> lambda(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) lambda[static_cast<size_t>(j)] = scale * x.entries()(j, j);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            double mean = lambda[static_cast<size_t>(j)];
            if (j != k) {
                mean = std::isinf(spec.car)
                           ? 0.0
                           : std::sqrt(lambda[static_cast<size_t>(j)] * lambda[static_cast<size_t>(k)]) / spec.car;
            }
            out.histogram.counts[{j + 1, k + 1}] = poisson(mean);
        }
    }

    auto scan = [&](double mid, std::complex<double> coh) {
        PhaseScanRecord rec;
        for (int m = 0; m < settings.phase_points; ++m) {
            const double ph = 2.0 * std::numbers::pi * m / settings.phase_points;
            const double mean = scale * (mid + std::abs(coh) * std::cos(ph - std::arg(coh)));
            rec.samples.push_back({ph, static_cast<double>(poisson(mean)), settings.integration_s});
        }
        return rec;
    };
    // The unnormalized diagonal already has mean 1, so coherences need no
    // rescaling. Fringes follow the modulus of the complex coherence; the
    // real part entering the submatrix is at most that.
    for (int i : offsets) {
        if (experiment == Experiment::TimeBin) {
            for (int j = 0; j + i < n; ++j) {
                const double mid = 0.5 * (x.entries()(j, j) + x.entries()(j + i, j + i));
                PhaseScanRecord rec = scan(mid, coherence(spec, j, j + i));
                rec.pair = IndexPair{ModeIndex(j + 1), ModeIndex(j + i + 1)};
                out.scans.push_back(std::move(rec));
            }
        } else {
            std::complex<double> coh = 0.0;
            double mid = 0.0;
            for (int j = 0; j + i < n; ++j) {
                coh += coherence(spec, j, j + i);
                mid += 0.5 * (x.entries()(j, j) + x.entries()(j + i, j + i));
            }
            PhaseScanRecord rec = scan(mid / (n - i), coh / static_cast<double>(n - i));
            rec.offset = i;
            out.scans.push_back(std::move(rec));
        }
    }
    return out;
}

Measurement measurement_from_counts(const SyntheticCounts& counts, int n, Experiment experiment) {
    Measurement m;
    m.experiment = experiment;
    m.n_modes = n;
    m.car_convention = CarConvention::Relative;
    m.car = car_from_histogram(counts.histogram).car;

    if (experiment == Experiment::TimeBin) {
        double total = 0.0;
        for (int j = 1; j <= n; ++j) total += static_cast<double>(counts.histogram.counts.at({j, j}));
        const double mean = total / n;
        if (!(mean > 0.0)) throw InputError("histogram has no diagonal coincidences");
        for (int j = 1; j <= n; ++j) {
            const auto c = static_cast<double>(counts.histogram.counts.at({j, j}));
            m.diagonal.push_back({j, c / mean, std::sqrt(std::max(c, 1.0)) / mean});
        }
        // Fitted visibilities scatter around the truth, so exact pins may
        // admit no PSD completion.
        m.pin_slack = SlackMode::Minimal;
    }
    for (const auto& rec : counts.scans) {
        const VisibilityEstimate v = visibility_from_scan(rec);
        if (rec.pair) {
            m.visibilities.push_back({rec.pair->j.value(), rec.pair->k.value(), v.v, v.sigma});
        } else if (rec.offset) {
            m.band_averages.push_back({*rec.offset, v.v, v.sigma});
        }
    }
    m.notes = "synthetic";
    return m;
}

SyntheticStateSpec parse_spec(const nlohmann::json& doc) {
    auto fail = [](const std::string& field, const std::string& msg) -> void {
        throw InputError("spec schema: " + field + ": " + msg);
    };
    if (!doc.is_object()) fail("<root>", "expected an object");
    static const std::set<std::string> allowed{"n",   "c_squared", "phi", "v_dephase", "offset_damping",
                                               "p_white", "car", "delta_ns"};
    for (const auto& [key, _] : doc.items()) {
        if (!allowed.contains(key)) fail(key, "unknown field");
    }
    auto number = [&](const std::string& key, double fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_number()) fail(key, "expected a number");
        return doc[key].get<double>();
    };
    auto numbers = [&](const std::string& key) {
        std::vector<double> out;
        if (!doc.contains(key)) return out;
        if (!doc[key].is_array()) fail(key, "expected an array of numbers");
        for (const auto& v : doc[key]) {
            if (!v.is_number()) fail(key, "expected an array of numbers");
            out.push_back(v.get<double>());
        }
        return out;
    };

    if (!doc.contains("n") || !doc["n"].is_number_integer()) fail("n", "missing or not an integer");
    if (!doc.contains("c_squared")) fail("c_squared", "missing required field");
    const int n = doc["n"].get<int>();
    const auto pops = numbers("c_squared");
    if (static_cast<int>(pops.size()) != n) fail("c_squared", "expected " + std::to_string(n) + " entries");

    SyntheticStateSpec spec;
    try {
        spec = SyntheticStateSpec::from_populations(pops);
    } catch (const InputError& e) {
        fail("c_squared", e.what());
    }
    spec.phi = numbers("phi");
    spec.v_dephase = number("v_dephase", 1.0);
    spec.p_white = number("p_white", 0.0);
    spec.delta_ns = number("delta_ns", 0.0);
    if (doc.contains("car")) {
        if (doc["car"].is_string() && doc["car"].get<std::string>() == "inf") {
            spec.car = std::numeric_limits<double>::infinity();
        } else {
            spec.car = number("car", 0.0);
        }
    }
    if (doc.contains("offset_damping")) {
        if (!doc["offset_damping"].is_array()) fail("offset_damping", "expected an array of {offset, v}");
        for (const auto& e : doc["offset_damping"]) {
            if (!e.is_object() || !e.contains("offset") || !e["offset"].is_number_integer() || !e.contains("v") ||
                !e["v"].is_number()) {
                fail("offset_damping", "expected entries {offset: integer, v: number}");
            }
            spec.offset_damping[e["offset"].get<int>()] = e["v"].get<double>();
        }
    }
    try {
        spec.check();
    } catch (const InputError& e) {
        fail("<root>", e.what());
    }
    return spec;
}

SyntheticStateSpec load_spec_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open spec file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("spec file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_spec(doc);
}

}  // namespace ebitcert
