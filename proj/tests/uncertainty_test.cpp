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

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "test_support.hpp"

namespace ebitcert {
namespace {

// Unit-diagonal chain with neighbour coherence a, every value carrying sigma.
ConstraintSet noisy_chain(double a, double sigma_diag, double sigma_off, int n = 3) {
    ConstraintSet cs;
    cs.n = n;
    for (int j = 1; j <= n; ++j) cs.constraints.emplace_back(PinElement{ModeIndex(j), ModeIndex(j), 1.0, sigma_diag});
    for (int j = 1; j < n; ++j) cs.constraints.emplace_back(PinElement{ModeIndex(j), ModeIndex(j + 1), a, sigma_off});
    cs.constraints.emplace_back(DiagMean{1.0});
    return cs;
}

double only_offdiag(const ConstraintSet& cs) {
    for (const auto& c : cs.constraints) {
        if (const auto* p = std::get_if<PinElement>(&c); p && p->j != p->k) return p->value;
    }
    return 0.0;
}

TEST(Perturb, ZeroSigmaIsIdentity) {
    const auto cs = noisy_chain(0.9, 0.0, 0.0);
    auto rng = trial_rng(1, 0);
    EXPECT_EQ(perturb(cs, rng).constraints, cs.constraints);
}

TEST(Perturb, ReproducibleForFixedSeed) {
    ConstraintSet cs;
    cs.n = 2;
    cs.constraints = {PinElement{ModeIndex(1), ModeIndex(2), 0.98, 0.02}};
    auto a = trial_rng(7, 3);
    auto b = trial_rng(7, 3);
    auto c = trial_rng(7, 4);
    const double va = only_offdiag(perturb(cs, a));
    EXPECT_EQ(va, only_offdiag(perturb(cs, b)));
    EXPECT_NE(va, only_offdiag(perturb(cs, c)));
    EXPECT_NE(va, 0.98);
}

TEST(Perturb, ClampKeepsVisibilitiesAtMostOne) {
    const auto cs = noisy_chain(0.999, 0.0, 0.02, 2);
    auto rng = trial_rng(11, 0);
    double worst = 0.0;
    int clamped = 0;
    for (int i = 0; i < 100000; ++i) {
        const double v = only_offdiag(perturb(cs, rng));
        worst = std::max(worst, v);
        clamped += v == 1.0;
    }
    EXPECT_LE(worst, 1.0);
    EXPECT_GT(clamped, 40000);
}

TEST(Perturb, VisibilityFollowsResampledDiagonal) {
    // With the coherence at full visibility, any diagonal draw keeps V = 1.
    const auto cs = noisy_chain(1.0, 0.05, 0.0, 2);
    auto rng = trial_rng(12, 0);
    for (int i = 0; i < 100; ++i) {
        const auto p = perturb(cs, rng);
        const double d1 = std::get<PinElement>(p.constraints[0]).value;
        const double d2 = std::get<PinElement>(p.constraints[1]).value;
        EXPECT_NEAR(only_offdiag(p), 0.5 * (d1 + d2), 1e-15);
    }
}

TEST(Perturb, MissingSigmaNamesConstraint) {
    ConstraintSet cs = noisy_chain(0.9, 0.01, 0.01);
    std::get<PinElement>(cs.constraints[4]).sigma.reset();
    auto rng = trial_rng(0, 0);
    try {
        perturb(cs, rng);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(describe(cs.constraints[4])), std::string::npos) << e.what();
    }
}

TEST(McBound, ZeroSigmaHasZeroSpread) {
    const auto r = mc_bound(noisy_chain(0.9, 0.0, 0.0), {}, {10, 5, true, 1});
    EXPECT_EQ(r.feasible, 10);
    EXPECT_EQ(r.sd, 0.0);
}

TEST(McBound, MissingSigmaFailsUpFront) {
    ConstraintSet cs = noisy_chain(0.9, 0.0, 0.0);
    std::get<PinElement>(cs.constraints[0]).sigma.reset();
    EXPECT_THROW(mc_bound(cs, {}, {5, 1, true, 1}), InputError);
}

TEST(McBound, DeterministicAcrossJobs) {
    const auto cs = noisy_chain(0.9, 0.02, 0.02, 4);
    const auto a = mc_bound(cs, {}, {24, 99, true, 1});
    const auto b = mc_bound(cs, {}, {24, 99, true, 4});
    std::ostringstream sa;
    std::ostringstream sb;
    write_trials_csv(sa, a);
    write_trials_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    for (std::size_t i = 0; i < a.trials.size(); ++i) EXPECT_EQ(a.trials[i].eof, b.trials[i].eof);
    EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "trial,eof,n_best,feasible");
}

TEST(McBound, SpreadScalesWithSigma) {
    const auto full = mc_bound(noisy_chain(0.9, 0.0, 0.02), {}, {1000, 21, true, 0});
    const auto half = mc_bound(noisy_chain(0.9, 0.0, 0.01), {}, {1000, 21, true, 0});
    ASSERT_GT(full.sd, 0.0);
    const double ratio = half.sd / full.sd;
    EXPECT_GE(ratio, 0.3);
    EXPECT_LE(ratio, 0.7);
}

TEST(McBound, MeanNeverAboveLargestTrial) {
    const auto r = mc_bound(noisy_chain(0.95, 0.03, 0.03, 5), {200.0, CarConvention::Relative}, {50, 8, true, 0});
    double top = 0.0;
    for (const auto& t : r.trials) {
        if (t.feasible) top = std::max(top, t.eof);
    }
    EXPECT_LE(r.mean, top);
    EXPECT_EQ(r.feasible + r.infeasible + r.max_iter, 50);
}

TEST(McBound, InfeasibleTrialsAreCountedAndExcluded) {
    // With the unit diagonal and both neighbours pinned, the corner sits on
    // its PSD boundary 2a^2 - 1, so about half of the draws fall below it.
    auto cs = testing::chain3(0.95);
    cs.constraints.emplace_back(PinElement{ModeIndex(1), ModeIndex(3), 2 * 0.95 * 0.95 - 1, 0.03});
    const auto r = mc_bound(cs, {}, {60, 3, true, 0});
    EXPECT_GT(r.infeasible, 0);
    EXPECT_GT(r.feasible, 0);
    EXPECT_EQ(r.feasible + r.infeasible + r.max_iter, 60);
}

TEST(McBound, ScanRangeFillsCurveSigma) {
    const auto cs = noisy_chain(0.9, 0.01, 0.01, 4);
    const auto r = mc_bound(cs, {}, {20, 4, true, 0}, {}, McScan{2, 4});
    ASSERT_EQ(r.curve_n, (std::vector<int>{2, 3, 4}));
    ASSERT_EQ(r.curve_sd.size(), 3u);
    for (const auto& t : r.trials) EXPECT_EQ(t.curve.size(), 3u);

    ScanConfig sc;
    sc.n_min = 2;
    sc.n_max = 4;
    auto s = scan(cs, {}, sc);
    attach_sigma(s, r);
    for (std::size_t i = 0; i < s.curve.size(); ++i) EXPECT_EQ(s.curve[i].eof_sigma, r.curve_sd[i]);
}

}  // namespace
}  // namespace ebitcert
