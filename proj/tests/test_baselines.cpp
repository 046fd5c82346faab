#include <gtest/gtest.h>

#include <cmath>

#include "peformer/baselines.hpp"
#include "peformer/wireless.hpp"

using namespace peformer;

namespace {

ChannelConfig sv_config(double snr_db = 10.0) {
    ChannelConfig cfg;
    cfg.model = ChannelConfig::Model::SalehValenzuela;
    cfg.snr_db = snr_db;
    return cfg;
}

}  // namespace

TEST(ComplexSolve, IdentityAndScaling) {
    Rng rng(61);
    ComplexMatrix b(3, 2);
    for (auto& v : b.re) v = rng.normal();
    for (auto& v : b.im) v = rng.normal();
    auto x1 = complex_solve(cx_identity(3), b);
    EXPECT_EQ(x1.re, b.re);
    auto x2 = complex_solve(cx_scale(cx_identity(3), 2.0), b);
    for (std::size_t i = 0; i < b.re.size(); ++i) EXPECT_NEAR(x2.re[i], b.re[i] / 2.0, 1e-12);
}

TEST(ComplexSolve, ResidualBelowTolerance) {
    Rng rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        ComplexMatrix a(4, 4), b(4, 3);
        for (auto& v : a.re) v = rng.normal();
        for (auto& v : a.im) v = rng.normal();
        for (auto& v : b.re) v = rng.normal();
        for (auto& v : b.im) v = rng.normal();
        auto x = complex_solve(a, b);
        ComplexMatrix resid = cx_add(cx_matmul(a, x), cx_scale(b, -1.0));
        EXPECT_LT(std::sqrt(cx_fro_norm_sq(resid) / cx_fro_norm_sq(b)), 1e-10);
    }
}

TEST(ComplexSolve, SingularRejectedWithConditionEstimate) {
    ComplexMatrix a(2, 2);
    a.set(0, 0, 1.0);
    a.set(0, 1, 2.0);
    a.set(1, 0, 2.0);
    a.set(1, 1, 4.0);
    try {
        complex_solve(a, cx_identity(2));
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("condition estimate"), std::string::npos);
    }
}

TEST(ZeroForcing, SingleUserIsMatchedFilter) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 1;
    auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 3);
    auto zf = zero_forcing(inst);
    auto mf = matched_filter(inst);
    for (std::size_t i = 0; i < zf.re.size(); ++i) {
        EXPECT_NEAR(zf.re[i], mf.re[i], 1e-9);
        EXPECT_NEAR(zf.im[i], mf.im[i], 1e-9);
    }
}

TEST(ZeroForcing, CrossTermsVanish) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, seed);
        auto v = zero_forcing(inst);
        for (std::int64_t k = 0; k < sz.k; ++k)
            for (std::int64_t j = 0; j < sz.k; ++j) {
                if (j == k) continue;
                cxd cross{};
                for (std::int64_t n = 0; n < sz.n_t; ++n) cross += std::conj(inst.h.at(n, k)) * v.at(n, j);
                EXPECT_LT(std::abs(cross), 1e-9);
            }
    }
}

TEST(ZeroForcing, PowerBudgetRespected) {
    SizeSpec sz;
    sz.n_t = 6;
    sz.k = 3;
    auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 17);
    auto v = zero_forcing(inst);
    EXPECT_NEAR(cx_fro_norm_sq(v), inst.p_t, 1e-9);
}

TEST(Wmmse, SingleUserConvergesToMatchedFilterRate) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, seed);
        auto result = wmmse(inst);
        const double expect = std::log2(1.0 + inst.p_t * cx_fro_norm_sq(inst.h) / inst.sigma2);
        EXPECT_NEAR(result.se, expect, 1e-6 * expect);
    }
}

TEST(Wmmse, MonotoneTraceAndBeatsLinearBaselines) {
    SizeSpec sz;
    sz.n_t = 8;
    sz.k = 3;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, seed);
        auto result = wmmse(inst);
        for (std::size_t i = 1; i < result.trace.size(); ++i)
            EXPECT_GE(result.trace[i], result.trace[i - 1] - 1e-9);
        EXPECT_GE(result.se, se_objective(inst, zero_forcing(inst)) - 1e-9);
        EXPECT_GE(result.se, se_objective(inst, matched_filter(inst)) - 1e-9);
    }
}

TEST(Wmmse, PowerFeasibleAllTasks) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 2;
    sz.m = 2;
    sz.n_r = 2;
    sz.n_rb = 2;
    {
        auto inst = sample_instance(Task::CoordinatedBeamforming, sv_config(), sz, 5);
        auto r = wmmse(inst);
        for (std::int64_t m = 0; m < sz.m; ++m) {
            double p = 0.0;
            for (std::int64_t s = m * sz.k; s < (m + 1) * sz.k; ++s)
                for (std::int64_t n = 0; n < sz.n_t; ++n) p += std::norm(r.v.at(n, s));
            EXPECT_LE(p, inst.p_t * (1.0 + 1e-6));
        }
        EXPECT_NEAR(r.se, se_objective(inst, r.v), 1e-9);
    }
    {
        auto inst = sample_instance(Task::MuMimoPrecoding, sv_config(), sz, 6);
        auto r = wmmse(inst);
        EXPECT_LE(cx_fro_norm_sq(r.v), inst.p_t * (1.0 + 1e-6));
        for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-9);
        EXPECT_NEAR(r.se, se_objective(inst, r.v), 1e-9);
    }
    {
        auto inst = sample_instance(Task::WidebandMuMisoPrecoding, sv_config(), sz, 7);
        auto r = wmmse(inst);
        EXPECT_LE(cx_fro_norm_sq(r.v), inst.p_t * (1.0 + 1e-6));
        EXPECT_NEAR(r.se, se_objective(inst, r.v), 1e-9);
        EXPECT_GE(r.se, se_objective(inst, zero_forcing(inst)) - 1e-9);
    }
    {
        auto inst = sample_instance(Task::PowerAllocation, sv_config(), sz, 8);
        auto r = wmmse(inst);
        for (std::int64_t m = 0; m < sz.m; ++m) {
            double p = 0.0;
            for (std::int64_t s = m * sz.k; s < (m + 1) * sz.k; ++s) p += std::norm(r.v.at(0, s));
            EXPECT_LE(p, inst.p_t * (1.0 + 1e-6));
        }
        EXPECT_NEAR(r.se, se_objective(inst, r.v), 1e-9);
        EXPECT_GE(r.se, se_objective(inst, zero_forcing(inst)) - 1e-9);
    }
}

TEST(Wmmse, PermutationConsistent) {
    SizeSpec sz;
    sz.n_t = 6;
    sz.k = 3;
    auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 91);
    auto base = wmmse(inst);

    const std::vector<std::int64_t> src = {1, 2, 0};
    ProblemInstance permuted = inst;
    for (std::int64_t c = 0; c < sz.k; ++c)
        for (std::int64_t n = 0; n < sz.n_t; ++n)
            permuted.h.set(n, c, inst.h.at(n, src[static_cast<std::size_t>(c)]));
    auto perm = wmmse(permuted);
    EXPECT_NEAR(perm.se, base.se, 1e-9 * std::abs(base.se));
    for (std::int64_t c = 0; c < sz.k; ++c)
        for (std::int64_t n = 0; n < sz.n_t; ++n) {
            EXPECT_NEAR(perm.v.at(n, c).real(), base.v.at(n, src[static_cast<std::size_t>(c)]).real(), 1e-6);
            EXPECT_NEAR(perm.v.at(n, c).imag(), base.v.at(n, src[static_cast<std::size_t>(c)]).imag(), 1e-6);
        }
}

TEST(Lmmse, ScalarWienerFilter) {
    LmmseStats stats;
    stats.covariance = cx_identity(1);
    stats.sigma2 = 1.0;
    ComplexMatrix y(1, 1);
    y.set(0, 0, {0.8, -0.4});
    auto est = lmmse_estimate(y, stats);
    EXPECT_NEAR(est.at(0, 0).real(), 0.4, 1e-12);
    EXPECT_NEAR(est.at(0, 0).imag(), -0.2, 1e-12);
}

TEST(Lmmse, NoiselessLimitReturnsObservation) {
    Rng rng(73);
    LmmseStats stats;
    stats.covariance = cx_identity(3);
    stats.sigma2 = 1e-12;
    ComplexMatrix y(3, 2);
    for (auto& v : y.re) v = rng.normal();
    auto est = lmmse_estimate(y, stats);
    for (std::size_t i = 0; i < y.re.size(); ++i) EXPECT_NEAR(est.re[i], y.re[i], 1e-9);
}

TEST(Lmmse, BeatsRawObservationOnMonteCarlo) {
    SizeSpec sz;
    sz.n_t = 8;
    sz.k = 1;
    auto cfg = sv_config(10.0);
    auto stats = estimate_lmmse_stats(cfg, sz, 10000, 12345);
    double mse_lmmse = 0.0, mse_raw = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto inst = make_estimation_instance(cfg, sz, static_cast<std::uint64_t>(i) + 777000);
        mse_lmmse += estimation_mse(lmmse_estimate(inst.h, stats), inst.label);
        mse_raw += estimation_mse(inst.h, inst.label);
    }
    EXPECT_LT(mse_lmmse / draws, mse_raw / draws);
    // Raw observation MSE per entry is the noise power (0.1 at 10 dB).
    EXPECT_NEAR(mse_raw / draws, 0.1, 0.01);
}

TEST(Lmmse, MseStableAcrossSeeds) {
    SizeSpec sz;
    sz.n_t = 8;
    sz.k = 2;
    auto cfg = sv_config(10.0);
    std::vector<double> mses;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto stats = estimate_lmmse_stats(cfg, sz, 10000, seed * 101 + 1);
        double mse = 0.0;
        const int draws = 2000;
        for (int i = 0; i < draws; ++i) {
            auto inst = make_estimation_instance(cfg, sz, derive_seed(seed, i));
            mse += estimation_mse(lmmse_estimate(inst.h, stats), inst.label);
        }
        mses.push_back(mse / draws);
    }
    double mean = 0.0;
    for (double m : mses) mean += m;
    mean /= static_cast<double>(mses.size());
    double var = 0.0;
    for (double m : mses) var += (m - mean) * (m - mean);
    var /= static_cast<double>(mses.size());
    EXPECT_LT(std::sqrt(var) / mean, 0.05);  // coefficient of variation < 5%
}
