#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/complex_linalg.hpp"
#include "peformer/wireless.hpp"

namespace peformer {

struct WmmseConfig {
    std::int64_t max_iters = 200;
    double tol = 1e-6;          // relative SE improvement threshold
    double bisect_tol = 1e-8;   // power-multiplier bisection tolerance
};

struct WmmseResult {
    ComplexMatrix v;            // task layout (power allocation: [1, M*K] amplitudes)
    double se = 0.0;
    std::vector<double> trace;  // SE after every full iteration
};

namespace detail {

/// Canonical scalar-receiver problem: streams with an owner transmitter
/// block, per-stream power group, and per-(owner, receiver) channel vectors.
/// A zero channel means the pair does not interfere (different RBs).
struct MisoProblem {
    std::int64_t n_t = 1;
    std::int64_t s_total = 0;
    std::int64_t n_owners = 1;
    std::int64_t n_groups = 1;
    std::vector<std::int64_t> owner;          // per stream
    std::vector<std::int64_t> group;          // per stream; constant per owner
    std::vector<std::vector<ComplexMatrix>> chan;  // [owner][receiver] (n_t x 1)
    double sigma2 = 0.1;
    double p_t = 1.0;
};

inline MisoProblem canonical_miso(const ProblemInstance& inst) {
    const auto& sz = inst.sizes;
    MisoProblem p;
    p.sigma2 = inst.sigma2;
    p.p_t = inst.p_t;
    switch (inst.task) {
        case Task::MuMisoPrecoding: {
            p.n_t = sz.n_t;
            p.s_total = sz.k;
            p.n_owners = 1;
            p.n_groups = 1;
            p.owner.assign(static_cast<std::size_t>(sz.k), 0);
            p.group.assign(static_cast<std::size_t>(sz.k), 0);
            p.chan.resize(1);
            for (std::int64_t r = 0; r < sz.k; ++r) p.chan[0].push_back(inst.h.column(r));
            break;
        }
        case Task::CoordinatedBeamforming: {
            const std::int64_t s_total = sz.m * sz.k;
            p.n_t = sz.n_t;
            p.s_total = s_total;
            p.n_owners = sz.m;
            p.n_groups = sz.m;
            p.chan.resize(static_cast<std::size_t>(sz.m));
            for (std::int64_t s = 0; s < s_total; ++s) {
                p.owner.push_back(s / sz.k);
                p.group.push_back(s / sz.k);
            }
            for (std::int64_t b = 0; b < sz.m; ++b)
                for (std::int64_t r = 0; r < s_total; ++r)
                    p.chan[static_cast<std::size_t>(b)].push_back(inst.h.block(b * sz.n_t, r, sz.n_t, 1));
            break;
        }
        case Task::PowerAllocation: {
            const std::int64_t s_total = sz.m * sz.k;
            p.n_t = 1;
            p.s_total = s_total;
            p.n_owners = s_total;  // every stream has its own scalar equivalent channel
            p.n_groups = sz.m;
            p.chan.resize(static_cast<std::size_t>(s_total));
            for (std::int64_t s = 0; s < s_total; ++s) {
                p.owner.push_back(s);
                p.group.push_back(s / sz.k);
                for (std::int64_t r = 0; r < s_total; ++r) {
                    ComplexMatrix c(1, 1);
                    c.set(0, 0, inst.h.at(s, r));
                    p.chan[static_cast<std::size_t>(s)].push_back(c);
                }
            }
            break;
        }
        case Task::WidebandMuMisoPrecoding: {
            const std::int64_t s_total = sz.n_rb * sz.k;
            p.n_t = sz.n_t;
            p.s_total = s_total;
            p.n_owners = sz.n_rb;  // streams in different RBs never interfere
            p.n_groups = 1;        // one power budget couples all RBs
            p.chan.resize(static_cast<std::size_t>(sz.n_rb));
            for (std::int64_t s = 0; s < s_total; ++s) {
                p.owner.push_back(s / sz.k);
                p.group.push_back(0);
            }
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb)
                for (std::int64_t r = 0; r < s_total; ++r) {
                    if (r / sz.k == rb)
                        p.chan[static_cast<std::size_t>(rb)].push_back(
                            inst.h.block(rb * sz.n_t, r % sz.k, sz.n_t, 1));
                    else
                        p.chan[static_cast<std::size_t>(rb)].push_back(ComplexMatrix(sz.n_t, 1));
                }
            break;
        }
        default:
            throw std::invalid_argument("canonical_miso: task is not a scalar-receiver task");
    }
    return p;
}

inline double miso_se(const MisoProblem& p, const std::vector<ComplexMatrix>& v) {
    ComplexMatrix gains(p.s_total, p.s_total);
    for (std::int64_t s = 0; s < p.s_total; ++s)
        for (std::int64_t r = 0; r < p.s_total; ++r) {
            cxd acc{};
            const ComplexMatrix& h = p.chan[static_cast<std::size_t>(p.owner[static_cast<std::size_t>(s)])]
                                           [static_cast<std::size_t>(r)];
            for (std::int64_t n = 0; n < p.n_t; ++n)
                acc += std::conj(h.at(n, 0)) * v[static_cast<std::size_t>(s)].at(n, 0);
            gains.set(r, s, acc);
        }
    return se_from_gains(gains, p.sigma2);
}

/// Matched-filter initialization: own-channel direction, equal power split
/// inside each power group.
inline std::vector<ComplexMatrix> miso_matched_filter(const MisoProblem& p) {
    std::vector<std::int64_t> group_count(static_cast<std::size_t>(p.n_groups), 0);
    for (std::int64_t s = 0; s < p.s_total; ++s) group_count[static_cast<std::size_t>(p.group[static_cast<std::size_t>(s)])]++;
    std::vector<ComplexMatrix> v;
    for (std::int64_t s = 0; s < p.s_total; ++s) {
        ComplexMatrix h = p.chan[static_cast<std::size_t>(p.owner[static_cast<std::size_t>(s)])]
                                [static_cast<std::size_t>(s)];
        const double nrm = std::sqrt(cx_fro_norm_sq(h));
        const double power = p.p_t / static_cast<double>(group_count[static_cast<std::size_t>(p.group[static_cast<std::size_t>(s)])]);
        v.push_back(cx_scale(h, std::sqrt(power) / nrm));
    }
    return v;
}

}  // namespace detail

/// Block-coordinate WMMSE for every scalar-receiver task. Receive scalars,
/// error weights and transmit vectors are updated in turn; the transmit step
/// uses one bisection per power group. The SE trace is recorded after every
/// full iteration and is non-decreasing.
inline WmmseResult wmmse_miso(const ProblemInstance& inst, const WmmseConfig& cfg = {}) {
    const detail::MisoProblem p = detail::canonical_miso(inst);
    std::vector<ComplexMatrix> v = detail::miso_matched_filter(p);

    WmmseResult result;
    double last_se = detail::miso_se(p, v);

    std::vector<cxd> u(static_cast<std::size_t>(p.s_total));
    std::vector<double> w(static_cast<std::size_t>(p.s_total));
    for (std::int64_t iter = 0; iter < cfg.max_iters; ++iter) {
        // Receive scalars and error weights.
        for (std::int64_t r = 0; r < p.s_total; ++r) {
            double total = p.sigma2;
            cxd own{};
            for (std::int64_t s = 0; s < p.s_total; ++s) {
                const ComplexMatrix& h = p.chan[static_cast<std::size_t>(p.owner[static_cast<std::size_t>(s)])]
                                               [static_cast<std::size_t>(r)];
                cxd g{};
                for (std::int64_t n = 0; n < p.n_t; ++n)
                    g += std::conj(h.at(n, 0)) * v[static_cast<std::size_t>(s)].at(n, 0);
                total += std::norm(g);
                if (s == r) own = g;
            }
            u[static_cast<std::size_t>(r)] = own / total;
            const double err = 1.0 - std::norm(own) / total;
            w[static_cast<std::size_t>(r)] = 1.0 / std::max(err, 1e-14);
        }

        // Per-owner interference-plus-noise weighted covariance A0.
        std::vector<ComplexMatrix> a0(static_cast<std::size_t>(p.n_owners));
        for (std::int64_t b = 0; b < p.n_owners; ++b) {
            ComplexMatrix a(p.n_t, p.n_t);
            for (std::int64_t r = 0; r < p.s_total; ++r) {
                const ComplexMatrix& h = p.chan[static_cast<std::size_t>(b)][static_cast<std::size_t>(r)];
                const double c = w[static_cast<std::size_t>(r)] * std::norm(u[static_cast<std::size_t>(r)]);
                for (std::int64_t i = 0; i < p.n_t; ++i)
                    for (std::int64_t j = 0; j < p.n_t; ++j)
                        a.add(i, j, c * h.at(i, 0) * std::conj(h.at(j, 0)));
            }
            a0[static_cast<std::size_t>(b)] = a;
        }

        // v(mu) for all streams of one group, and the resulting group power.
        auto solve_group = [&](std::int64_t grp, double mu, std::vector<ComplexMatrix>& out) {
            double power = 0.0;
            for (std::int64_t s = 0; s < p.s_total; ++s) {
                if (p.group[static_cast<std::size_t>(s)] != grp) continue;
                const std::int64_t b = p.owner[static_cast<std::size_t>(s)];
                ComplexMatrix a = a0[static_cast<std::size_t>(b)];
                for (std::int64_t i = 0; i < p.n_t; ++i) a.add(i, i, mu);
                const ComplexMatrix rhs =
                    cx_scale(p.chan[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)],
                             u[static_cast<std::size_t>(s)] * w[static_cast<std::size_t>(s)]);
                ComplexMatrix vs = hermitian_solve(a, rhs);
                power += cx_fro_norm_sq(vs);
                out[static_cast<std::size_t>(s)] = vs;
            }
            return power;
        };

        for (std::int64_t grp = 0; grp < p.n_groups; ++grp) {
            std::vector<ComplexMatrix> trial(static_cast<std::size_t>(p.s_total));
            bool solved_at_zero = true;
            double power0 = 0.0;
            try {
                power0 = solve_group(grp, 0.0, trial);
            } catch (const std::invalid_argument&) {
                solved_at_zero = false;  // singular at mu = 0
            }
            if (solved_at_zero && power0 <= p.p_t) {
                for (std::int64_t s = 0; s < p.s_total; ++s)
                    if (p.group[static_cast<std::size_t>(s)] == grp) v[static_cast<std::size_t>(s)] = trial[static_cast<std::size_t>(s)];
                continue;
            }
            // Bisection on mu: power is strictly decreasing in mu.
            double lo = 0.0, hi = 1.0;
            int expand = 0;
            while (solve_group(grp, hi, trial) > p.p_t) {
                hi *= 4.0;
                if (++expand > 200)
                    throw std::runtime_error("wmmse: bisection failed to bracket the power constraint, mu=" +
                                             std::to_string(hi) + " power still above budget");
            }
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double pw = solve_group(grp, mid, trial);
                if (pw > p.p_t)
                    lo = mid;
                else
                    hi = mid;
                if (std::abs(pw - p.p_t) <= cfg.bisect_tol * p.p_t) break;
            }
            solve_group(grp, hi, trial);  // final feasible multiplier
            for (std::int64_t s = 0; s < p.s_total; ++s)
                if (p.group[static_cast<std::size_t>(s)] == grp) v[static_cast<std::size_t>(s)] = trial[static_cast<std::size_t>(s)];
        }

        const double se = detail::miso_se(p, v);
        result.trace.push_back(se);
        if (se - last_se < cfg.tol * std::max(1.0, std::abs(last_se)) && iter > 0) {
            last_se = std::max(last_se, se);
            break;
        }
        last_se = std::max(last_se, se);
    }
    result.se = result.trace.empty() ? last_se : result.trace.back();

    // Pack the stream precoders back into the task layout.
    const auto& sz = inst.sizes;
    if (inst.task == Task::MuMisoPrecoding) {
        result.v = ComplexMatrix(sz.n_t, sz.k);
        for (std::int64_t s = 0; s < sz.k; ++s) result.v.set_block(0, s, v[static_cast<std::size_t>(s)]);
    } else if (inst.task == Task::CoordinatedBeamforming) {
        result.v = ComplexMatrix(sz.n_t, sz.m * sz.k);
        for (std::int64_t s = 0; s < sz.m * sz.k; ++s) result.v.set_block(0, s, v[static_cast<std::size_t>(s)]);
    } else if (inst.task == Task::PowerAllocation) {
        result.v = ComplexMatrix(1, sz.m * sz.k);
        for (std::int64_t s = 0; s < sz.m * sz.k; ++s)
            result.v.set(0, s, std::sqrt(cx_fro_norm_sq(v[static_cast<std::size_t>(s)])));
    } else {  // wideband: stack per-RB blocks
        result.v = ComplexMatrix(sz.n_rb * sz.n_t, sz.k);
        for (std::int64_t rb = 0; rb < sz.n_rb; ++rb)
            for (std::int64_t k = 0; k < sz.k; ++k)
                result.v.set_block(rb * sz.n_t, k, v[static_cast<std::size_t>(rb * sz.k + k)]);
    }
    return result;
}

/// WMMSE for single-cell MU-MIMO with N_r streams per user.
inline WmmseResult wmmse_mimo(const ProblemInstance& inst, const WmmseConfig& cfg = {}) {
    if (inst.task != Task::MuMimoPrecoding) throw std::invalid_argument("wmmse_mimo: wrong task");
    const auto& sz = inst.sizes;
    const std::int64_t d = sz.n_r;

    std::vector<ComplexMatrix> hk, vk;
    for (std::int64_t k = 0; k < sz.k; ++k) {
        hk.push_back(inst.h.block(0, k * d, sz.n_t, d));
        // Matched-filter init at equal per-user power.
        ComplexMatrix v0 = hk.back();
        v0 = cx_scale(v0, std::sqrt(inst.p_t / static_cast<double>(sz.k) / cx_fro_norm_sq(v0)));
        vk.push_back(v0);
    }

    auto collect = [&](const std::vector<ComplexMatrix>& v) {
        ComplexMatrix out(sz.n_t, sz.k * d);
        for (std::int64_t k = 0; k < sz.k; ++k) out.set_block(0, k * d, v[static_cast<std::size_t>(k)]);
        return out;
    };

    WmmseResult result;
    double last_se = se_objective(inst, collect(vk));

    for (std::int64_t iter = 0; iter < cfg.max_iters; ++iter) {
        // Receive filters and weights.
        std::vector<ComplexMatrix> uk(static_cast<std::size_t>(sz.k)), wk(static_cast<std::size_t>(sz.k));
        for (std::int64_t k = 0; k < sz.k; ++k) {
            ComplexMatrix cov = cx_scale(cx_identity(d), inst.sigma2);
            for (std::int64_t j = 0; j < sz.k; ++j) {
                const ComplexMatrix g = cx_matmul(cx_herm(hk[static_cast<std::size_t>(k)]), vk[static_cast<std::size_t>(j)]);
                cov = cx_add(cov, cx_matmul(g, cx_herm(g)));
            }
            const ComplexMatrix own = cx_matmul(cx_herm(hk[static_cast<std::size_t>(k)]), vk[static_cast<std::size_t>(k)]);
            uk[static_cast<std::size_t>(k)] = hermitian_solve(cov, own);
            // W = (I - U^H (H^H V))^{-1}
            ComplexMatrix e = cx_identity(d);
            const ComplexMatrix uhv = cx_matmul(cx_herm(uk[static_cast<std::size_t>(k)]), own);
            e = cx_add(e, cx_scale(uhv, -1.0));
            wk[static_cast<std::size_t>(k)] = complex_solve(e, cx_identity(d));
        }

        // Transmit update with one bisection on the shared power multiplier.
        ComplexMatrix a0(sz.n_t, sz.n_t);
        for (std::int64_t j = 0; j < sz.k; ++j) {
            const ComplexMatrix hu = cx_matmul(hk[static_cast<std::size_t>(j)], uk[static_cast<std::size_t>(j)]);
            a0 = cx_add(a0, cx_matmul(cx_matmul(hu, wk[static_cast<std::size_t>(j)]), cx_herm(hu)));
        }
        auto solve_all = [&](double mu, std::vector<ComplexMatrix>& out) {
            ComplexMatrix a = a0;
            for (std::int64_t i = 0; i < sz.n_t; ++i) a.add(i, i, mu);
            double power = 0.0;
            for (std::int64_t k = 0; k < sz.k; ++k) {
                const ComplexMatrix rhs = cx_matmul(cx_matmul(hk[static_cast<std::size_t>(k)], uk[static_cast<std::size_t>(k)]),
                                                    wk[static_cast<std::size_t>(k)]);
                out[static_cast<std::size_t>(k)] = hermitian_solve(a, rhs);
                power += cx_fro_norm_sq(out[static_cast<std::size_t>(k)]);
            }
            return power;
        };
        std::vector<ComplexMatrix> trial(static_cast<std::size_t>(sz.k));
        bool at_zero = true;
        double p0 = 0.0;
        try {
            p0 = solve_all(0.0, trial);
        } catch (const std::invalid_argument&) {
            at_zero = false;
        }
        if (!(at_zero && p0 <= inst.p_t)) {
            double lo = 0.0, hi = 1.0;
            int expand = 0;
            while (solve_all(hi, trial) > inst.p_t) {
                hi *= 4.0;
                if (++expand > 200) throw std::runtime_error("wmmse_mimo: bisection failed to bracket");
            }
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double pw = solve_all(mid, trial);
                if (pw > inst.p_t)
                    lo = mid;
                else
                    hi = mid;
                if (std::abs(pw - inst.p_t) <= cfg.bisect_tol * inst.p_t) break;
            }
            solve_all(hi, trial);
        }
        vk = trial;

        const double se = se_objective(inst, collect(vk));
        result.trace.push_back(se);
        if (se - last_se < cfg.tol * std::max(1.0, std::abs(last_se)) && iter > 0) {
            last_se = std::max(last_se, se);
            break;
        }
        last_se = std::max(last_se, se);
    }
    result.v = collect(vk);
    result.se = result.trace.empty() ? last_se : result.trace.back();
    return result;
}

inline WmmseResult wmmse(const ProblemInstance& inst, const WmmseConfig& cfg = {}) {
    return inst.task == Task::MuMimoPrecoding ? wmmse_mimo(inst, cfg) : wmmse_miso(inst, cfg);
}

/// Zero-forcing baseline in the task layout, with equal power per stream.
inline ComplexMatrix zero_forcing(const ProblemInstance& inst) {
    const auto& sz = inst.sizes;
    auto scaled_zf = [](const ComplexMatrix& h, double per_stream_power) {
        ComplexMatrix w = zf_directions(h);
        return cx_scale(w, std::sqrt(per_stream_power));
    };
    switch (inst.task) {
        case Task::MuMisoPrecoding:
            return scaled_zf(inst.h, inst.p_t / static_cast<double>(sz.k));
        case Task::MuMimoPrecoding:
            return scaled_zf(inst.h, inst.p_t / static_cast<double>(sz.k * sz.n_r));
        case Task::CoordinatedBeamforming: {
            ComplexMatrix v(sz.n_t, sz.m * sz.k);
            for (std::int64_t m = 0; m < sz.m; ++m) {
                const ComplexMatrix own = inst.h.block(m * sz.n_t, m * sz.k, sz.n_t, sz.k);
                v.set_block(0, m * sz.k, scaled_zf(own, inst.p_t / static_cast<double>(sz.k)));
            }
            return v;
        }
        case Task::WidebandMuMisoPrecoding: {
            ComplexMatrix v(sz.n_rb * sz.n_t, sz.k);
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb) {
                const ComplexMatrix h_rb = inst.h.block(rb * sz.n_t, 0, sz.n_t, sz.k);
                v.set_block(rb * sz.n_t, 0, scaled_zf(h_rb, inst.p_t / static_cast<double>(sz.n_rb * sz.k)));
            }
            return v;
        }
        case Task::PowerAllocation: {
            ComplexMatrix v(1, sz.m * sz.k);
            for (std::int64_t s = 0; s < sz.m * sz.k; ++s)
                v.set(0, s, std::sqrt(inst.p_t / static_cast<double>(sz.k)));
            return v;
        }
        default:
            throw std::invalid_argument("zero_forcing: not defined for this task");
    }
}

/// Matched-filter baseline in the task layout, equal power per stream.
inline ComplexMatrix matched_filter(const ProblemInstance& inst) {
    const auto& sz = inst.sizes;
    auto mf_columns = [](const ComplexMatrix& h, double per_stream_power) {
        ComplexMatrix v = h;
        for (std::int64_t c = 0; c < h.cols; ++c) {
            double nrm = 0.0;
            for (std::int64_t r = 0; r < h.rows; ++r) nrm += std::norm(h.at(r, c));
            const double s = std::sqrt(per_stream_power / nrm);
            for (std::int64_t r = 0; r < h.rows; ++r) v.set(r, c, h.at(r, c) * s);
        }
        return v;
    };
    switch (inst.task) {
        case Task::MuMisoPrecoding:
            return mf_columns(inst.h, inst.p_t / static_cast<double>(sz.k));
        case Task::MuMimoPrecoding:
            return mf_columns(inst.h, inst.p_t / static_cast<double>(sz.k * sz.n_r));
        case Task::CoordinatedBeamforming: {
            ComplexMatrix v(sz.n_t, sz.m * sz.k);
            for (std::int64_t m = 0; m < sz.m; ++m) {
                const ComplexMatrix own = inst.h.block(m * sz.n_t, m * sz.k, sz.n_t, sz.k);
                v.set_block(0, m * sz.k, mf_columns(own, inst.p_t / static_cast<double>(sz.k)));
            }
            return v;
        }
        case Task::WidebandMuMisoPrecoding: {
            ComplexMatrix v(sz.n_rb * sz.n_t, sz.k);
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb) {
                const ComplexMatrix h_rb = inst.h.block(rb * sz.n_t, 0, sz.n_t, sz.k);
                v.set_block(rb * sz.n_t, 0, mf_columns(h_rb, inst.p_t / static_cast<double>(sz.n_rb * sz.k)));
            }
            return v;
        }
        case Task::PowerAllocation:
            return zero_forcing(inst);  // equal amplitudes
        default:
            throw std::invalid_argument("matched_filter: not defined for this task");
    }
}

// ---------------------------------------------------------------------------
// LMMSE channel estimation
// ---------------------------------------------------------------------------

struct LmmseStats {
    ComplexMatrix covariance;  // per-user channel covariance R_h
    double sigma2 = 0.1;       // observation noise power per entry
};

/// Empirical covariance from a pool of channel draws of the same config.
inline LmmseStats estimate_lmmse_stats(const ChannelConfig& cfg, const SizeSpec& sz, std::int64_t draws,
                                       std::uint64_t seed) {
    LmmseStats stats;
    stats.sigma2 = std::pow(10.0, -cfg.snr_db / 10.0);
    stats.covariance = ComplexMatrix(sz.n_t, sz.n_t);
    Rng rng(derive_seed(seed, "lmmse_covariance"));
    std::int64_t count = 0;
    ComplexMatrix h(sz.n_t, 1);
    for (std::int64_t i = 0; i < draws; ++i) {
        for (auto& v : h.re) v = 0.0;
        for (auto& v : h.im) v = 0.0;
        detail::draw_vector(h, 0, sz.n_t, cfg, rng);
        for (std::int64_t r = 0; r < sz.n_t; ++r)
            for (std::int64_t c = 0; c < sz.n_t; ++c) stats.covariance.add(r, c, h.at(r, 0) * std::conj(h.at(c, 0)));
        ++count;
    }
    stats.covariance = cx_scale(stats.covariance, 1.0 / static_cast<double>(count));
    return stats;
}

/// h_hat = R (R + sigma^2 I)^{-1} y, per column of the observation.
inline ComplexMatrix lmmse_estimate(const ComplexMatrix& y, const LmmseStats& stats) {
    if (stats.covariance.rows != y.rows)
        throw std::invalid_argument("lmmse_estimate: covariance dimension does not match observation");
    ComplexMatrix a = stats.covariance;
    for (std::int64_t i = 0; i < a.rows; ++i) a.add(i, i, stats.sigma2);
    // X = (R + s I)^{-1} y, then R * X.
    return cx_matmul(stats.covariance, hermitian_solve(a, y));
}

/// Mean squared error per complex entry.
inline double estimation_mse(const ComplexMatrix& estimate, const ComplexMatrix& truth) {
    if (estimate.rows != truth.rows || estimate.cols != truth.cols)
        throw std::invalid_argument("estimation_mse: shape mismatch");
    double acc = 0.0;
    for (std::int64_t r = 0; r < truth.rows; ++r)
        for (std::int64_t c = 0; c < truth.cols; ++c) acc += std::norm(estimate.at(r, c) - truth.at(r, c));
    return acc / static_cast<double>(truth.rows * truth.cols);
}

}  // namespace peformer
