#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "peformer/diff_objective.hpp"
#include "peformer/wireless.hpp"

using namespace peformer;

namespace {

ChannelConfig sv_config(double snr_db = 10.0) {
    ChannelConfig cfg;
    cfg.model = ChannelConfig::Model::SalehValenzuela;
    cfg.snr_db = snr_db;
    return cfg;
}

ChannelConfig rayleigh_config(double snr_db = 10.0) {
    ChannelConfig cfg;
    cfg.model = ChannelConfig::Model::Rayleigh;
    cfg.snr_db = snr_db;
    return cfg;
}

/// Straight-line evaluation of the sum of log2(1 + S/(I + sigma^2)) for a
/// single-cell MISO instance, forming every interference sum explicitly.
double brute_force_miso_se(const ComplexMatrix& h, const ComplexMatrix& v, double sigma2) {
    double se = 0.0;
    for (std::int64_t k = 0; k < h.cols; ++k) {
        std::complex<double> desired{};
        for (std::int64_t n = 0; n < h.rows; ++n) desired += std::conj(h.at(n, k)) * v.at(n, k);
        double interference = 0.0;
        for (std::int64_t j = 0; j < h.cols; ++j) {
            if (j == k) continue;
            std::complex<double> cross{};
            for (std::int64_t n = 0; n < h.rows; ++n) cross += std::conj(h.at(n, k)) * v.at(n, j);
            interference += std::norm(cross);
        }
        se += std::log2(1.0 + std::norm(desired) / (interference + sigma2));
    }
    return se;
}

ComplexMatrix random_cx(std::int64_t r, std::int64_t c, Rng& rng) {
    ComplexMatrix m(r, c);
    for (auto& v : m.re) v = rng.normal();
    for (auto& v : m.im) v = rng.normal();
    return m;
}

}  // namespace

TEST(Channel, RayleighUnitPower) {
    SizeSpec sz;
    sz.n_t = 1;
    sz.k = 1;
    double acc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        auto inst = sample_instance(Task::MuMisoPrecoding, rayleigh_config(), sz, static_cast<std::uint64_t>(i));
        acc += std::norm(inst.h.at(0, 0));
    }
    EXPECT_NEAR(acc / draws, 1.0, 0.02);
}

TEST(Channel, SvAveragePowerIsNt) {
    SizeSpec sz;
    sz.n_t = 8;
    sz.k = 1;
    double acc = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, static_cast<std::uint64_t>(i));
        acc += cx_fro_norm_sq(inst.h);
    }
    EXPECT_NEAR(acc / draws / static_cast<double>(sz.n_t), 1.0, 0.05);
}

TEST(Channel, SingleClusterSingleRayIsSteeringVector) {
    // One cluster, one ray: |h_n| identical across antennas and unit-modulus
    // phase progression.
    ChannelConfig cfg = sv_config();
    cfg.clusters = 1;
    cfg.rays = 1;
    SizeSpec sz;
    sz.n_t = 6;
    sz.k = 1;
    auto inst = sample_instance(Task::MuMisoPrecoding, cfg, sz, 3);
    const double mag = std::abs(inst.h.at(0, 0));
    for (std::int64_t n = 1; n < sz.n_t; ++n) EXPECT_NEAR(std::abs(inst.h.at(n, 0)), mag, 1e-9);
}

TEST(Channel, SingleTapGivesFlatResponse) {
    ChannelConfig cfg = sv_config();
    cfg.model = ChannelConfig::Model::TapDelay;
    cfg.taps = 1;
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 2;
    sz.n_rb = 3;
    auto inst = sample_instance(Task::WidebandMuMisoPrecoding, cfg, sz, 11);
    for (std::int64_t rb = 1; rb < sz.n_rb; ++rb)
        for (std::int64_t n = 0; n < sz.n_t; ++n)
            for (std::int64_t k = 0; k < sz.k; ++k) {
                EXPECT_NEAR(inst.h.at(rb * sz.n_t + n, k).real(), inst.h.at(n, k).real(), 1e-12);
                EXPECT_NEAR(inst.h.at(rb * sz.n_t + n, k).imag(), inst.h.at(n, k).imag(), 1e-12);
            }
}

TEST(Channel, DeterministicPerSeed) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 3;
    auto a = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 42);
    auto b = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 42);
    EXPECT_EQ(a.h.re, b.h.re);
    EXPECT_EQ(a.h.im, b.h.im);
}

TEST(Channel, CrossCellGainRatiosInsideRange) {
    SizeSpec sz;
    sz.m = 3;
    sz.k = 2;
    sz.n_t = 4;
    std::vector<double> ratios;
    sample_instance(Task::CoordinatedBeamforming, sv_config(), sz, 5, &ratios);
    EXPECT_EQ(ratios.size(), static_cast<std::size_t>(sz.m * (sz.m - 1) * sz.k));
    for (double g : ratios) {
        EXPECT_GT(g, 0.5);
        EXPECT_LT(g, 1.0);
    }
}

TEST(Estimation, InfiniteSnrObservationEqualsLabel) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 2;
    auto inst = make_estimation_instance(sv_config(300.0), sz, 7);
    for (std::size_t i = 0; i < inst.h.re.size(); ++i) {
        EXPECT_NEAR(inst.h.re[i], inst.label.re[i], 1e-6);
        EXPECT_NEAR(inst.h.im[i], inst.label.im[i], 1e-6);
    }
}

TEST(Estimation, ZeroDbNoisePowerEqualsSignalPower) {
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 1;
    double sig = 0.0, noise = 0.0;
    const int draws = 100000 / 4;
    for (int i = 0; i < draws; ++i) {
        auto inst = make_estimation_instance(sv_config(0.0), sz, static_cast<std::uint64_t>(i));
        sig += cx_fro_norm_sq(inst.label);
        ComplexMatrix diff = cx_add(inst.h, cx_scale(inst.label, -1.0));
        noise += cx_fro_norm_sq(diff);
    }
    EXPECT_NEAR(noise / sig, 1.0, 0.02);
}

TEST(SeObjective, SingleUserScalar) {
    ProblemInstance inst;
    inst.task = Task::MuMisoPrecoding;
    inst.sizes.n_t = 1;
    inst.sizes.k = 1;
    inst.sigma2 = 1.0;
    inst.p_t = 1.0;
    inst.h = ComplexMatrix(1, 1);
    inst.h.set(0, 0, 1.0);
    ComplexMatrix v(1, 1);
    v.set(0, 0, 1.0);
    EXPECT_NEAR(se_objective(inst, v), 1.0, 1e-12);
}

TEST(SeObjective, OrthogonalChannelsMatchedFilter) {
    // Orthogonal channels, matched filter at equal power: no interference.
    const std::int64_t n_t = 4, k = 2;
    ProblemInstance inst;
    inst.task = Task::MuMisoPrecoding;
    inst.sizes.n_t = n_t;
    inst.sizes.k = k;
    inst.sigma2 = 0.5;
    inst.p_t = 2.0;
    inst.h = ComplexMatrix(n_t, k);
    inst.h.set(0, 0, {1.0, 1.0});
    inst.h.set(2, 1, {0.0, 2.0});
    ComplexMatrix v(n_t, k);
    double expect = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
        double nrm = 0.0;
        for (std::int64_t n = 0; n < n_t; ++n) nrm += std::norm(inst.h.at(n, j));
        const double p = inst.p_t / k;
        for (std::int64_t n = 0; n < n_t; ++n) v.set(n, j, inst.h.at(n, j) * std::sqrt(p / nrm));
        expect += std::log2(1.0 + p * nrm / inst.sigma2);
    }
    EXPECT_NEAR(se_objective(inst, v), expect, 1e-12);
}

TEST(SeObjective, MatchesBruteForceOnRandomInstances) {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        SizeSpec sz;
        sz.n_t = 3;
        sz.k = 2;
        auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, rng.next_u64());
        auto v = random_cx(sz.n_t, sz.k, rng);
        EXPECT_NEAR(se_objective(inst, v), brute_force_miso_se(inst.h, v, inst.sigma2), 1e-10);
    }
}

TEST(SeObjective, UserPermutationInvariance) {
    Rng rng(29);
    SizeSpec sz;
    sz.n_t = 4;
    sz.k = 3;
    auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 31);
    auto v = random_cx(sz.n_t, sz.k, rng);
    const double base = se_objective(inst, v);
    // Relabel users 0->2->1->0 consistently in H and V.
    const std::vector<std::int64_t> src = {2, 0, 1};
    ProblemInstance permuted = inst;
    ComplexMatrix pv(sz.n_t, sz.k);
    for (std::int64_t c = 0; c < sz.k; ++c)
        for (std::int64_t n = 0; n < sz.n_t; ++n) {
            permuted.h.set(n, c, inst.h.at(n, src[static_cast<std::size_t>(c)]));
            pv.set(n, c, v.at(n, src[static_cast<std::size_t>(c)]));
        }
    EXPECT_NEAR(se_objective(permuted, pv), base, 1e-9);
}

TEST(SeObjective, DifferentiablePathAgreesWithPlain) {
    Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        SizeSpec sz;
        sz.n_t = 3;
        sz.k = 2;
        sz.n_r = 2;
        sz.m = 2;
        sz.n_rb = 2;

        {
            auto inst = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, rng.next_u64());
            auto v = random_cx(sz.n_t, sz.k, rng);
            Graph g;
            auto se = se_diff_miso(g, inst, cx_const(v));
            EXPECT_NEAR(se->data[0], se_objective(inst, v), 1e-9);
        }
        {
            auto inst = sample_instance(Task::CoordinatedBeamforming, sv_config(), sz, rng.next_u64());
            auto v = random_cx(sz.n_t, sz.m * sz.k, rng);
            Graph g;
            auto se = se_diff_miso(g, inst, cx_const(v));
            EXPECT_NEAR(se->data[0], se_objective(inst, v), 1e-9);
        }
        {
            auto inst = sample_instance(Task::MuMimoPrecoding, sv_config(), sz, rng.next_u64());
            auto v = random_cx(sz.n_t, sz.k * sz.n_r, rng);
            Graph g;
            auto se = se_diff_mimo(g, inst, cx_const(v));
            EXPECT_NEAR(se->data[0], se_objective(inst, v), 1e-9);
        }
        {
            auto inst = sample_instance(Task::PowerAllocation, sv_config(), sz, rng.next_u64());
            auto amp = zeros({1, sz.m * sz.k});
            for (auto& x : amp->data) x = std::abs(rng.normal()) + 0.1;
            ComplexMatrix v(1, sz.m * sz.k);
            for (std::int64_t s = 0; s < sz.m * sz.k; ++s) v.set(0, s, amp->data[static_cast<std::size_t>(s)]);
            Graph g;
            auto se = se_diff_power_allocation(g, inst, amp);
            EXPECT_NEAR(se->data[0], se_objective(inst, v), 1e-9);
        }
        {
            auto inst = sample_instance(Task::WidebandMuMisoPrecoding, sv_config(), sz, rng.next_u64());
            auto v = random_cx(sz.n_rb * sz.n_t, sz.k, rng);
            std::vector<CxTensor> parts;
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb)
                parts.push_back(cx_const(v.block(rb * sz.n_t, 0, sz.n_t, sz.k)));
            Graph g;
            auto se = se_diff_wideband(g, inst, parts);
            EXPECT_NEAR(se->data[0], se_objective(inst, v), 1e-9);
        }
    }
}

TEST(SeObjective, LogdetRealEmbeddingIdentity) {
    Rng rng(41);
    for (std::int64_t n = 1; n <= 4; ++n)
        for (int trial = 0; trial < 20; ++trial) {
            // Random Hermitian PD: A = B B^H + I.
            auto b = random_cx(n, n, rng);
            ComplexMatrix a = cx_add(cx_matmul(b, cx_herm(b)), cx_identity(n));
            const double ld_c = logdet_hermitian_pd(a);

            std::vector<double> emb(static_cast<std::size_t>(4 * n * n));
            for (std::int64_t r = 0; r < n; ++r)
                for (std::int64_t c = 0; c < n; ++c) {
                    const auto v = a.at(r, c);
                    emb[static_cast<std::size_t>(r * 2 * n + c)] = v.real();
                    emb[static_cast<std::size_t>(r * 2 * n + n + c)] = -v.imag();
                    emb[static_cast<std::size_t>((n + r) * 2 * n + c)] = v.imag();
                    emb[static_cast<std::size_t>((n + r) * 2 * n + n + c)] = v.real();
                }
            EXPECT_NEAR(ld_c, 0.5 * logdet_real_spd(emb, 2 * n), 1e-9);
        }
}

TEST(SeObjective, DifferentiableCholeskyGradientCorrect) {
    Rng rng(43);
    auto b = zeros({3, 3});
    for (auto& v : b->data) v = rng.normal();
    const double err = finite_difference_check(
        [&](Graph& g, const TensorPtr& t) {
            // A = t t' + 3I is SPD for the probe neighborhood.
            auto a = g.add(g.matmul(t, g.transpose(t)), g.scale(identity(3), 3.0));
            return logdet_spd_diff(g, a);
        },
        b, 1e-5);
    EXPECT_LT(err, 1e-6);
}

TEST(Tokens, MuMisoLayoutReThenIm) {
    ProblemInstance inst;
    inst.task = Task::MuMisoPrecoding;
    inst.sizes.n_t = 2;
    inst.sizes.k = 1;
    inst.h = ComplexMatrix(2, 1);
    inst.h.set(0, 0, {1.0, 2.0});
    inst.h.set(1, 0, {3.0, 4.0});
    auto tokens = build_tokens(inst);
    ASSERT_EQ(tokens.parts.size(), 1u);
    EXPECT_EQ(tokens.parts[0].reps->data, (std::vector<double>{1.0, 3.0, 2.0, 4.0}));
    EXPECT_EQ(tokens.parts[0].n_block, 2);
    EXPECT_EQ(tokens.parts[0].feat_j, 2);
}

TEST(Tokens, MimoWithSingleReceiveAntennaMatchesMiso) {
    SizeSpec sz;
    sz.n_t = 3;
    sz.k = 2;
    sz.n_r = 1;
    auto miso = sample_instance(Task::MuMisoPrecoding, sv_config(), sz, 9);
    ProblemInstance mimo = miso;
    mimo.task = Task::MuMimoPrecoding;
    auto a = build_tokens(miso);
    auto b = build_tokens(mimo);
    EXPECT_EQ(a.parts[0].reps->data, b.parts[0].reps->data);
    EXPECT_EQ(b.parts[0].token_structure.n_sub(), 2);
}

TEST(Tokens, CbSingleCellCollapsesToMiso) {
    SizeSpec sz;
    sz.n_t = 3;
    sz.k = 2;
    sz.m = 1;
    auto cb = sample_instance(Task::CoordinatedBeamforming, sv_config(), sz, 13);
    auto tokens = build_tokens(cb);
    ASSERT_EQ(tokens.parts.size(), 1u);
    EXPECT_EQ(tokens.parts[0].n_reps, 1);
    EXPECT_EQ(tokens.parts[0].n_tokens, 2);
    EXPECT_EQ(tokens.parts[0].width(), 6);
}

TEST(Duality, SingleUserRecoversMatchedFilter) {
    Rng rng(47);
    auto h = random_cx(4, 1, rng);
    auto v = duality_recover(h, {1.0}, {1.0}, 0.5, 1.0);
    // Direction parallel to h, norm^2 = P_t.
    EXPECT_NEAR(cx_fro_norm_sq(v), 1.0, 1e-9);
    cxd ratio = v.at(0, 0) / h.at(0, 0);
    for (std::int64_t n = 1; n < 4; ++n) {
        cxd r = v.at(n, 0) / h.at(n, 0);
        EXPECT_NEAR(r.real(), ratio.real(), 1e-9);
        EXPECT_NEAR(r.imag(), ratio.imag(), 1e-9);
    }
}

TEST(Duality, VanishingLambdaOverSigmaGivesPerColumnMatchedFilter) {
    // lambda/sigma^2 -> 0 sends the inverse to identity, leaving the
    // per-column matched filter with powers p_k.
    Rng rng(53);
    auto h = random_cx(3, 2, rng);
    auto v = duality_recover(h, {0.5, 0.5}, {0.5, 0.5}, 1e12, 1.0);
    for (std::int64_t c = 0; c < 2; ++c) {
        double p = 0.0;
        for (std::int64_t n = 0; n < 3; ++n) p += std::norm(v.at(n, c));
        EXPECT_NEAR(p, 0.5, 1e-9);
        const cxd ratio = v.at(0, c) / h.at(0, c);
        for (std::int64_t n = 1; n < 3; ++n) {
            const cxd r = v.at(n, c) / h.at(n, c);
            EXPECT_NEAR(r.real(), ratio.real(), 1e-6);
            EXPECT_NEAR(std::abs(r.imag()), std::abs(ratio.imag()), 1e-6);
        }
    }
}

TEST(Duality, InvalidInputsRejected) {
    Rng rng(59);
    auto h = random_cx(3, 2, rng);
    EXPECT_THROW(duality_recover(h, {0.5, -0.5}, {0.5, 0.5}, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(duality_recover(h, {0.9, 0.5}, {0.5, 0.5}, 1.0, 1.0), std::invalid_argument);
}

TEST(Tasks, ParseAndNames) {
    for (Task t : all_tasks()) EXPECT_EQ(parse_task(task_name(t)), t);
    try {
        parse_task("uplink_tomography");
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("mu_miso_precoding"), std::string::npos);
    }
}
