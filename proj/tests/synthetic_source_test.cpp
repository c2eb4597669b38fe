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

#include <gtest/gtest.h>

#include "ebitcert/entanglement_bound.hpp"
#include "ebitcert/uncertainty.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_support.hpp"

namespace ebitcert {
namespace {

SyntheticStateSpec uniform(int n) { return SyntheticStateSpec::from_populations(std::vector<double>(n, 1.0)); }

int count_pins(const ConstraintSet& cs, bool diagonal) {
    int out = 0;
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) out += (p->j == p->k) == diagonal;
    }
    return out;
}

TEST(IdealSubmatrix, Examples) {
    EXPECT_TRUE(ideal_submatrix(uniform(4)).entries().isApprox(Eigen::MatrixXd::Ones(4, 4), 1e-14));

    auto flat = uniform(5);
    flat.v_dephase = 0.0;
    EXPECT_TRUE(ideal_submatrix(flat).entries().isApprox(Eigen::MatrixXd::Identity(5, 5), 1e-14));

    const auto x = ideal_submatrix(SyntheticStateSpec::from_populations({0.7, 0.3})).entries();
    EXPECT_NEAR(x(0, 0), 1.4, 1e-14);
    EXPECT_NEAR(x(1, 1), 0.6, 1e-14);
    EXPECT_NEAR(x(0, 1), 2 * std::sqrt(0.21), 1e-14);
}

TEST(IdealSubmatrix, MatchesFullDensityMatrix) {
    auto spec = SyntheticStateSpec::from_populations({0.5, 0.2, 0.3});
    spec.phi = {0.0, 1.1, -0.4};
    const int n = 3;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n * n);
    for (int j = 0; j < n; ++j) psi(j * n + j) = std::polar(spec.c[j], spec.phi[j]);
    const Eigen::MatrixXcd rho = psi * psi.adjoint();
    EXPECT_TRUE(ideal_submatrix(spec).entries().isApprox(submatrix_from_full(rho).renormalized().entries(), 1e-12));
}

TEST(IdealSubmatrix, PsdForRandomSpecs) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const int n = std::uniform_int_distribution<int>(2, 12)(rng);
        std::vector<double> p(n);
        for (auto& v : p) v = u(rng);
        auto spec = SyntheticStateSpec::from_populations(p);
        for (int j = 0; j < n; ++j) spec.phi.push_back(6.3 * u(rng));
        spec.v_dephase = u(rng);
        spec.p_white = u(rng);
        EXPECT_GE(testing::oracle_min_eigenvalue(ideal_submatrix(spec).entries()), -1e-12) << t;
    }
}

TEST(ExactEof, Examples) {
    EXPECT_NEAR(exact_eof_pure(uniform(4)), 2.0, 1e-14);
    EXPECT_NEAR(exact_eof_pure(SyntheticStateSpec::from_populations({0.5, 0.5, 0.0, 0.0})), 1.0, 1e-14);
    EXPECT_NEAR(exact_eof_pure(SyntheticStateSpec::from_populations({0.7, 0.3})), 0.8813, 1e-4);
    auto noisy = uniform(4);
    noisy.p_white = 0.1;
    EXPECT_THROW(exact_eof_pure(noisy), InputError);
}

TEST(ToConstraints, Examples) {
    const auto tb = to_constraints(uniform(8), Experiment::TimeBin, {1, 2}, 0.01);
    EXPECT_EQ(count_pins(tb.cs, false), 13);
    EXPECT_EQ(count_pins(tb.cs, true), 8);
    for (const auto& c : tb.cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c)) EXPECT_NEAR(p->value, 1.0, 1e-14);
    }
    EXPECT_TRUE(validate(tb.cs).ok());

    auto damped = uniform(30);
    damped.v_dephase = 0.98;
    std::vector<int> offsets;
    for (int i = 12; i <= 29; ++i) offsets.push_back(i);
    const auto et = to_constraints(damped, Experiment::EnergyTime, offsets, 0.008);
    int bands = 0;
    for (const auto& c : et.cs.constraints) {
        if (const auto* b = std::get_if<BandMean>(&c)) {
            ++bands;
            EXPECT_NEAR(b->value, 0.98, 1e-14);
            EXPECT_EQ(b->sigma, 0.008);
        }
    }
    EXPECT_EQ(bands, 18);

    EXPECT_EQ(count_pins(to_constraints(uniform(3), Experiment::TimeBin, {1}, 0.0).cs, false), 2);
    EXPECT_THROW(to_constraints(uniform(3), Experiment::TimeBin, {3}, 0.0), InputError);
}

TEST(ToConstraints, PinsRoundTripThroughVisibility) {
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 50; ++t) {
        const int n = std::uniform_int_distribution<int>(3, 10)(rng);
        std::vector<double> p(n);
        for (auto& v : p) v = u(rng);
        auto spec = SyntheticStateSpec::from_populations(p);
        spec.v_dephase = u(rng);
        const auto x = ideal_submatrix(spec);
        const auto sc = to_constraints(spec, Experiment::TimeBin, {1, 2}, 0.0);
        for (const auto& c : sc.cs.constraints) {
            const auto* pin = std::get_if<PinElement>(&c);
            if (!pin || pin->j == pin->k) continue;
            const double dj = x(pin->j, pin->j);
            const double dk = x(pin->k, pin->k);
            EXPECT_NEAR(pin->value, x(pin->j, pin->k), 1e-12);
            EXPECT_NEAR(offdiag_from_visibility(visibility_from_offdiag(pin->value, dj, dk), dj, dk), pin->value, 1e-12);
            // The fringe of a noiseless scan with this midpoint and amplitude
            // has contrast equal to the visibility.
            const double mid = 0.5 * (dj + dk);
            const auto v = visibility_from_extrema(mid + pin->value, mid - pin->value);
            EXPECT_NEAR(v.v, visibility_from_offdiag(pin->value, dj, dk), 1e-12);
        }
    }
}

TEST(GenerateCounts, NoAccidentalsWithoutNoise) {
    const auto counts = generate_counts(uniform(6), Experiment::TimeBin, {1, 2}, {}, 5);
    for (const auto& [jk, c] : counts.histogram.counts) {
        if (jk.first != jk.second) EXPECT_EQ(c, 0u);
    }
    EXPECT_EQ(counts.scans.size(), 5u + 4u);
}

TEST(GenerateCounts, DeterministicGivenSeed) {
    auto spec = uniform(5);
    spec.car = 50.0;
    const auto a = generate_counts(spec, Experiment::TimeBin, {1}, {}, 9);
    const auto b = generate_counts(spec, Experiment::TimeBin, {1}, {}, 9);
    EXPECT_EQ(a.histogram.counts, b.histogram.counts);
    for (std::size_t i = 0; i < a.scans.size(); ++i) {
        for (std::size_t m = 0; m < a.scans[i].samples.size(); ++m) {
            EXPECT_EQ(a.scans[i].samples[m].count, b.scans[i].samples[m].count);
        }
    }
}

TEST(GenerateCounts, RejectsBadSettings) {
    ScanSettings s;
    s.mean_counts = 0.0;
    EXPECT_THROW(generate_counts(uniform(4), Experiment::TimeBin, {1}, s, 1), InputError);
}

TEST(GenerateCounts, IngestRecoversVisibilities) {
    for (double v_dephase : {1.0, 0.9}) {
        auto spec = uniform(8);
        spec.v_dephase = v_dephase;
        const auto counts = generate_counts(spec, Experiment::TimeBin, {1, 2}, {}, 17);
        const auto m = measurement_from_counts(counts, 8, Experiment::TimeBin);
        ASSERT_EQ(m.visibilities.size(), 13u);
        for (const auto& v : m.visibilities) {
            ASSERT_GT(v.sigma, 0.0);
            EXPECT_LE(std::abs(v.v - v_dephase), 3 * v.sigma) << v.j << "," << v.k;
        }
        EXPECT_TRUE(m.car == std::numeric_limits<double>::infinity() || m.car > 1e3);
    }
}

TEST(GenerateCounts, EnergyTimeShape) {
    auto spec = uniform(30);
    spec.v_dephase = 0.98;
    spec.car = 5650.0;
    std::vector<int> offsets;
    for (int i = 12; i <= 29; ++i) offsets.push_back(i);
    const auto m = measurement_from_counts(generate_counts(spec, Experiment::EnergyTime, offsets, {}, 3), 30,
                                           Experiment::EnergyTime);
    EXPECT_EQ(m.band_averages.size(), 18u);
    EXPECT_TRUE(m.diagonal.empty());
    EXPECT_TRUE(validate(m.constraints()).ok());
}

TEST(SpecFile, Loads) {
    const auto path = std::filesystem::temp_directory_path() / "ebitcert_spec_test.json";
    {
        std::ofstream out(path);
        out << R"({"n": 3, "c_squared": [2, 1, 1], "v_dephase": 0.9, "car": "inf", "delta_ns": 2.3,
                   "offset_damping": [{"offset": 1, "v": 0.5}]})";
    }
    const auto spec = load_spec_file(path);
    EXPECT_EQ(spec.n, 3);
    EXPECT_NEAR(spec.c[0] * spec.c[0], 0.5, 1e-15);
    EXPECT_EQ(spec.damping(1), 0.5);
    EXPECT_EQ(spec.damping(2), 0.9);
    EXPECT_TRUE(std::isinf(spec.car));
    std::filesystem::remove(path);

    EXPECT_THROW(load_spec_file("/nonexistent/spec.json"), InputError);
    EXPECT_THROW(parse_spec(nlohmann::json::parse(R"({"n": 2, "c_squared": [1]})")), InputError);
    EXPECT_THROW(parse_spec(nlohmann::json::parse(R"({"n": 2, "c_squared": [1, 1], "v_dephase": 1.5})")), InputError);
    EXPECT_THROW(parse_spec(nlohmann::json::parse(R"({"n": 2, "c_squared": [1, 1], "colour": 1})")), InputError);
}

TEST(SpecFile, ShippedSpecsLoad) {
    const std::filesystem::path data = EBITCERT_DATA_DIR;
    EXPECT_EQ(load_spec_file(data / "uniform_n8_spec.json").n, 8);
    EXPECT_EQ(load_spec_file(data / "energy_time_like_spec.json").n, 30);
}

CertifyConfig config_for(const Measurement& m) {
    CertifyConfig c;
    c.solver.slack = m.pin_slack.value_or(SlackMode::Strict);
    return c;
}

TEST(Closure, PureSpecsStayBelowEntropyWithinNoise) {
    std::mt19937_64 rng(41);
    std::gamma_distribution<double> shape(1.0);
    for (int n = 4; n <= 6; ++n) {
        std::vector<double> p(static_cast<size_t>(n));
        for (auto& v : p) v = shape(rng) + 0.05;
        const auto spec = SyntheticStateSpec::from_populations(p);
        const auto counts = generate_counts(spec, Experiment::TimeBin, {1, 2}, {}, static_cast<std::uint64_t>(100 + n));
        const auto m = measurement_from_counts(counts, n, Experiment::TimeBin);
        const auto cs = m.constraints();
        const auto r = certify(cs, m.noise(), config_for(m));
        ASSERT_TRUE(r.converged()) << n;
        const auto mc = mc_bound(cs, m.noise(), {30, 5, true, 0}, config_for(m));
        EXPECT_LE(r.eof_ebits, exact_eof_pure(spec) + 3 * mc.sd) << n;
    }
}

TEST(Closure, UniformSpecsRecoverLog2n) {
    // No accidentals are recorded, so the CAR is floored at the mean diagonal
    // count; at 1e4 counts that floor alone costs about 2e-3 ebits.
    ScanSettings settings;
    settings.mean_counts = 1e5;
    for (int n : {4, 8}) {
        std::vector<int> offsets;
        for (int i = 1; i < n; ++i) offsets.push_back(i);
        const auto m = measurement_from_counts(generate_counts(uniform(n), Experiment::TimeBin, offsets, settings, 1),
                                               n, Experiment::TimeBin);
        const auto r = certify(m.constraints(), m.noise(), config_for(m));
        ASSERT_TRUE(r.converged()) << n;
        EXPECT_NEAR(r.eof_ebits, std::log2(n), 1e-3) << n;
    }
}

}  // namespace
}  // namespace ebitcert
