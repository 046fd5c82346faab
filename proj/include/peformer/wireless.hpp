#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/complex_linalg.hpp"
#include "peformer/modules.hpp"
#include "peformer/rng.hpp"

namespace peformer {

enum class Task {
    MuMisoPrecoding,
    MuMimoPrecoding,
    CoordinatedBeamforming,
    PowerAllocation,
    WidebandMuMisoPrecoding,
    ChannelEstimation,
};

inline const char* task_name(Task t) {
    switch (t) {
        case Task::MuMisoPrecoding: return "mu_miso_precoding";
        case Task::MuMimoPrecoding: return "mu_mimo_precoding";
        case Task::CoordinatedBeamforming: return "coordinated_beamforming";
        case Task::PowerAllocation: return "power_allocation";
        case Task::WidebandMuMisoPrecoding: return "wideband_mu_miso_precoding";
        case Task::ChannelEstimation: return "channel_estimation";
    }
    return "?";
}

inline const std::vector<Task>& all_tasks() {
    static const std::vector<Task> tasks = {
        Task::MuMisoPrecoding,    Task::MuMimoPrecoding,           Task::CoordinatedBeamforming,
        Task::PowerAllocation,    Task::WidebandMuMisoPrecoding,   Task::ChannelEstimation,
    };
    return tasks;
}

inline Task parse_task(const std::string& name) {
    for (Task t : all_tasks())
        if (name == task_name(t)) return t;
    std::string known;
    for (Task t : all_tasks()) known += std::string(known.empty() ? "" : ", ") + task_name(t);
    throw std::invalid_argument("unknown task '" + name + "', supported: " + known);
}

struct SizeSpec {
    std::int64_t m = 1;     // cells
    std::int64_t k = 1;     // users per cell
    std::int64_t n_t = 1;   // BS antennas
    std::int64_t n_r = 1;   // UE antennas
    std::int64_t n_rb = 1;  // resource blocks (wideband)
};

struct ChannelConfig {
    enum class Model { SalehValenzuela, Rayleigh, TapDelay };
    Model model = Model::SalehValenzuela;
    std::int64_t clusters = 4;
    std::int64_t rays = 5;
    std::int64_t taps = 2;       // TapDelay only
    double snr_db = 10.0;
    double gain_lo = 0.5;        // cross-cell gain ratio range
    double gain_hi = 1.0;
    double p_t = 1.0;

    void validate() const {
        if (clusters < 1 || rays < 1 || taps < 1)
            throw std::invalid_argument("ChannelConfig: clusters, rays and taps must be >= 1");
        if (!(gain_lo > 0.0 && gain_lo <= gain_hi))
            throw std::invalid_argument("ChannelConfig: need 0 < gain_lo <= gain_hi");
        if (p_t <= 0.0) throw std::invalid_argument("ChannelConfig: p_t must be positive");
    }
};

/// One sampled wireless scenario. Channel layout by task:
///   mu_miso:      [N_t, K]
///   mu_mimo:      [N_t, K*N_r]          (column (k,n) = antenna n of UE k)
///   cb:           [M*N_t, M*K]          (row block i = BS i, column (m,k) = UE m_k)
///   power_alloc:  [M*K, M*K]            (equivalent gain from stream (i,j) in row,
///                                        to UE (m,k) in column, after in-cell ZF)
///   wideband:     [n_rb*N_t, K]         (row block = RB)
///   estimation:   [N_t, K] observation; label holds the true channel
struct ProblemInstance {
    Task task = Task::MuMisoPrecoding;
    SizeSpec sizes;
    double sigma2 = 0.1;
    double p_t = 1.0;
    std::uint64_t seed = 0;
    ComplexMatrix h;
    ComplexMatrix label;  // estimation only
};

namespace detail {

/// Saleh-Valenzuela draw: sum of cluster/ray paths on a half-wavelength
/// uniform linear array, normalized so E||h||^2 = n_t.
inline void sv_vector(ComplexMatrix& dst, std::int64_t col, std::int64_t n_t, std::int64_t clusters,
                      std::int64_t rays, Rng& rng, double amp = 1.0) {
    const double path_std = std::sqrt(1.0 / (2.0 * static_cast<double>(clusters * rays)));
    for (std::int64_t c = 0; c < clusters; ++c)
        for (std::int64_t r = 0; r < rays; ++r) {
            const cxd alpha{path_std * rng.normal(), path_std * rng.normal()};
            const double theta = rng.uniform(-1.5707963267948966, 1.5707963267948966);
            const double phase_step = 3.141592653589793 * std::sin(theta);
            for (std::int64_t n = 0; n < n_t; ++n) {
                const cxd steer{std::cos(phase_step * static_cast<double>(n)),
                                std::sin(phase_step * static_cast<double>(n))};
                dst.add(n, col, amp * alpha * steer);
            }
        }
}

inline void rayleigh_vector(ComplexMatrix& dst, std::int64_t col, std::int64_t n_t, Rng& rng, double amp = 1.0) {
    const double s = std::sqrt(0.5);
    for (std::int64_t n = 0; n < n_t; ++n)
        dst.add(n, col, amp * cxd{s * rng.normal(), s * rng.normal()});
}

inline void draw_vector(ComplexMatrix& dst, std::int64_t col, std::int64_t n_t, const ChannelConfig& cfg,
                        Rng& rng, double amp = 1.0) {
    if (cfg.model == ChannelConfig::Model::Rayleigh)
        rayleigh_vector(dst, col, n_t, rng, amp);
    else
        sv_vector(dst, col, n_t, cfg.clusters, cfg.rays, rng, amp);
}

}  // namespace detail

inline double snr_to_sigma2(double p_t, double snr_db) { return p_t / std::pow(10.0, snr_db / 10.0); }

/// Physical multi-cell MISO channel [M*N_t, M*K]; cross-cell links are scaled
/// by a per-link gain ratio drawn from the configured range. Captured ratios
/// can be returned for inspection.
inline ComplexMatrix sample_multicell_channel(const ChannelConfig& cfg, const SizeSpec& sz, Rng& rng,
                                              std::vector<double>* gain_ratios = nullptr) {
    ComplexMatrix h(sz.m * sz.n_t, sz.m * sz.k);
    for (std::int64_t i = 0; i < sz.m; ++i)
        for (std::int64_t m = 0; m < sz.m; ++m)
            for (std::int64_t k = 0; k < sz.k; ++k) {
                double amp = 1.0;
                if (i != m) {
                    amp = rng.uniform(cfg.gain_lo, cfg.gain_hi);
                    if (gain_ratios) gain_ratios->push_back(amp);
                }
                ComplexMatrix tmp(sz.n_t, 1);
                detail::draw_vector(tmp, 0, sz.n_t, cfg, rng, amp);
                for (std::int64_t n = 0; n < sz.n_t; ++n) h.set(i * sz.n_t + n, m * sz.k + k, tmp.at(n, 0));
            }
    return h;
}

/// Deterministic instance sampler; a given (task, cfg, sizes, seed) always
/// reproduces the same draw.
inline ProblemInstance sample_instance(Task task, const ChannelConfig& cfg, const SizeSpec& sz,
                                       std::uint64_t seed, std::vector<double>* gain_ratios = nullptr) {
    cfg.validate();
    Rng rng(derive_seed(seed, std::string("instance/") + task_name(task)));
    ProblemInstance inst;
    inst.task = task;
    inst.sizes = sz;
    inst.p_t = cfg.p_t;
    inst.sigma2 = snr_to_sigma2(cfg.p_t, cfg.snr_db);
    inst.seed = seed;

    switch (task) {
        case Task::MuMisoPrecoding: {
            inst.sizes.m = 1;
            inst.sizes.n_r = 1;
            inst.h = ComplexMatrix(sz.n_t, sz.k);
            for (std::int64_t k = 0; k < sz.k; ++k) detail::draw_vector(inst.h, k, sz.n_t, cfg, rng);
            break;
        }
        case Task::MuMimoPrecoding: {
            inst.sizes.m = 1;
            inst.h = ComplexMatrix(sz.n_t, sz.k * sz.n_r);
            for (std::int64_t c = 0; c < sz.k * sz.n_r; ++c) detail::draw_vector(inst.h, c, sz.n_t, cfg, rng);
            break;
        }
        case Task::CoordinatedBeamforming: {
            inst.sizes.n_r = 1;
            inst.h = sample_multicell_channel(cfg, inst.sizes, rng, gain_ratios);
            break;
        }
        case Task::PowerAllocation: {
            inst.sizes.n_r = 1;
            const ComplexMatrix phys = sample_multicell_channel(cfg, inst.sizes, rng, gain_ratios);
            // In-cell zero-forcing directions turn the physical channel into
            // per-stream equivalent scalar gains.
            const std::int64_t s_total = sz.m * sz.k;
            ComplexMatrix heq(s_total, s_total);
            std::vector<ComplexMatrix> w(static_cast<std::size_t>(sz.m));
            for (std::int64_t i = 0; i < sz.m; ++i) {
                const ComplexMatrix own = phys.block(i * sz.n_t, i * sz.k, sz.n_t, sz.k);
                w[static_cast<std::size_t>(i)] = zf_directions(own);
            }
            for (std::int64_t i = 0; i < sz.m; ++i)
                for (std::int64_t j = 0; j < sz.k; ++j)
                    for (std::int64_t m = 0; m < sz.m; ++m)
                        for (std::int64_t k = 0; k < sz.k; ++k) {
                            // gain from stream (i,j) to UE (m,k)
                            cxd acc{};
                            for (std::int64_t n = 0; n < sz.n_t; ++n)
                                acc += std::conj(phys.at(i * sz.n_t + n, m * sz.k + k)) *
                                       w[static_cast<std::size_t>(i)].at(n, j);
                            heq.set(i * sz.k + j, m * sz.k + k, acc);
                        }
            inst.h = heq;
            break;
        }
        case Task::WidebandMuMisoPrecoding: {
            inst.sizes.m = 1;
            inst.sizes.n_r = 1;
            const std::int64_t taps = cfg.taps;
            const double tap_amp = std::sqrt(1.0 / static_cast<double>(taps));
            // Per-tap channels, then per-RB response by DFT over taps.
            std::vector<ComplexMatrix> tap_h(static_cast<std::size_t>(taps), ComplexMatrix(sz.n_t, sz.k));
            for (std::int64_t k = 0; k < sz.k; ++k)
                for (std::int64_t t = 0; t < taps; ++t)
                    detail::draw_vector(tap_h[static_cast<std::size_t>(t)], k, sz.n_t, cfg, rng, tap_amp);
            inst.h = ComplexMatrix(sz.n_rb * sz.n_t, sz.k);
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb)
                for (std::int64_t t = 0; t < taps; ++t) {
                    const double ang = -2.0 * 3.141592653589793 * static_cast<double>(rb * t) /
                                       static_cast<double>(sz.n_rb);
                    const cxd w{std::cos(ang), std::sin(ang)};
                    for (std::int64_t n = 0; n < sz.n_t; ++n)
                        for (std::int64_t k = 0; k < sz.k; ++k)
                            inst.h.add(rb * sz.n_t + n, k, w * tap_h[static_cast<std::size_t>(t)].at(n, k));
                }
            break;
        }
        case Task::ChannelEstimation: {
            inst.sizes.m = 1;
            inst.sizes.n_r = 1;
            inst.label = ComplexMatrix(sz.n_t, sz.k);
            for (std::int64_t k = 0; k < sz.k; ++k) detail::draw_vector(inst.label, k, sz.n_t, cfg, rng);
            // Additive observation noise with power set by SNR relative to
            // the unit per-entry channel power.
            const double noise_std = std::sqrt(0.5 * std::pow(10.0, -cfg.snr_db / 10.0));
            inst.h = inst.label;
            for (std::int64_t n = 0; n < sz.n_t; ++n)
                for (std::int64_t k = 0; k < sz.k; ++k)
                    inst.h.add(n, k, cxd{noise_std * rng.normal(), noise_std * rng.normal()});
            inst.sigma2 = std::pow(10.0, -cfg.snr_db / 10.0);
            break;
        }
    }
    return inst;
}

inline ProblemInstance make_estimation_instance(const ChannelConfig& cfg, const SizeSpec& sz,
                                                std::uint64_t seed) {
    return sample_instance(Task::ChannelEstimation, cfg, sz, seed);
}

// ---------------------------------------------------------------------------
// Spectral efficiency (plain, non-differentiable path)
// ---------------------------------------------------------------------------

namespace detail {

/// Scalar-receiver SINR sum from an effective gain matrix: g[r][s] is the
/// complex gain of stream s at receiver r, and stream r is receiver r's own.
inline double se_from_gains(const ComplexMatrix& gains, double sigma2) {
    const std::int64_t s_total = gains.rows;
    double se = 0.0;
    for (std::int64_t r = 0; r < s_total; ++r) {
        double desired = 0.0, interference = 0.0;
        for (std::int64_t s = 0; s < s_total; ++s) {
            const double p = std::norm(gains.at(r, s));
            if (s == r)
                desired = p;
            else
                interference += p;
        }
        se += std::log2(1.0 + desired / (interference + sigma2));
    }
    return se;
}

}  // namespace detail

/// Exact objective value over all users:
///   sum log2 det(I + H^H V V^H H (interference + sigma^2 I)^{-1}).
/// V layout must match the task layout documented on ProblemInstance; for
/// power allocation V is the 1 x M*K row of real amplitudes.
inline double se_objective(const ProblemInstance& inst, const ComplexMatrix& v) {
    const auto& sz = inst.sizes;
    switch (inst.task) {
        case Task::MuMisoPrecoding: {
            if (v.rows != sz.n_t || v.cols != sz.k)
                throw std::invalid_argument("se_objective: V must be [N_t, K]");
            ComplexMatrix gains = cx_matmul(cx_herm(inst.h), v);  // [K, K]
            return detail::se_from_gains(gains, inst.sigma2);
        }
        case Task::CoordinatedBeamforming: {
            const std::int64_t s_total = sz.m * sz.k;
            if (v.rows != sz.n_t || v.cols != s_total)
                throw std::invalid_argument("se_objective: V must be [N_t, M*K]");
            ComplexMatrix gains(s_total, s_total);
            for (std::int64_t s = 0; s < s_total; ++s) {
                const std::int64_t owner = s / sz.k;
                for (std::int64_t r = 0; r < s_total; ++r) {
                    cxd acc{};
                    for (std::int64_t n = 0; n < sz.n_t; ++n)
                        acc += std::conj(inst.h.at(owner * sz.n_t + n, r)) * v.at(n, s);
                    gains.set(r, s, acc);
                }
            }
            return detail::se_from_gains(gains, inst.sigma2);
        }
        case Task::PowerAllocation: {
            const std::int64_t s_total = sz.m * sz.k;
            if (v.rows != 1 || v.cols != s_total)
                throw std::invalid_argument("se_objective: V must be [1, M*K] amplitudes");
            ComplexMatrix gains(s_total, s_total);
            for (std::int64_t r = 0; r < s_total; ++r)
                for (std::int64_t s = 0; s < s_total; ++s) gains.set(r, s, inst.h.at(s, r) * v.at(0, s));
            return detail::se_from_gains(gains, inst.sigma2);
        }
        case Task::WidebandMuMisoPrecoding: {
            if (v.rows != sz.n_rb * sz.n_t || v.cols != sz.k)
                throw std::invalid_argument("se_objective: V must be [n_rb*N_t, K]");
            double se = 0.0;
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb) {
                const ComplexMatrix h_rb = inst.h.block(rb * sz.n_t, 0, sz.n_t, sz.k);
                const ComplexMatrix v_rb = v.block(rb * sz.n_t, 0, sz.n_t, sz.k);
                se += detail::se_from_gains(cx_matmul(cx_herm(h_rb), v_rb), inst.sigma2);
            }
            return se;
        }
        case Task::MuMimoPrecoding: {
            if (v.rows != sz.n_t || v.cols != sz.k * sz.n_r)
                throw std::invalid_argument("se_objective: V must be [N_t, K*N_r]");
            double se = 0.0;
            for (std::int64_t k = 0; k < sz.k; ++k) {
                const ComplexMatrix hk = inst.h.block(0, k * sz.n_r, sz.n_t, sz.n_r);
                ComplexMatrix b = cx_scale(cx_identity(sz.n_r), inst.sigma2);
                ComplexMatrix signal(sz.n_r, sz.n_r);
                for (std::int64_t j = 0; j < sz.k; ++j) {
                    const ComplexMatrix vj = v.block(0, j * sz.n_r, sz.n_t, sz.n_r);
                    const ComplexMatrix g = cx_matmul(cx_herm(hk), vj);
                    const ComplexMatrix gg = cx_matmul(g, cx_herm(g));
                    if (j == k)
                        signal = gg;
                    else
                        b = cx_add(b, gg);
                }
                se += (logdet_hermitian_pd(cx_add(b, signal)) - logdet_hermitian_pd(b)) / std::log(2.0);
            }
            return se;
        }
        case Task::ChannelEstimation:
            throw std::invalid_argument("se_objective: not defined for the estimation task");
    }
    throw std::logic_error("se_objective: unreachable");
}

// ---------------------------------------------------------------------------
// Token construction
// ---------------------------------------------------------------------------

/// Tokens for one instance. Wideband yields one batch per resource block
/// (parameters are shared across them); every other task yields one batch.
struct TaskTokens {
    std::vector<TokenBatch> parts;
};

namespace detail {

/// Column c of src as a feature-major [Re over rows; Im over rows] token row.
inline void write_token_row(TensorPtr& reps, std::int64_t row, const ComplexMatrix& src, std::int64_t col) {
    for (std::int64_t n = 0; n < src.rows; ++n) {
        reps->at(row, n) = src.at(n, col).real();
        reps->at(row, src.rows + n) = src.at(n, col).imag();
    }
}

}  // namespace detail

inline TaskTokens build_tokens(const ProblemInstance& inst) {
    const auto& sz = inst.sizes;
    TaskTokens out;
    switch (inst.task) {
        case Task::MuMisoPrecoding:
        case Task::ChannelEstimation: {
            auto reps = zeros({sz.k, 2 * sz.n_t});
            for (std::int64_t k = 0; k < sz.k; ++k) detail::write_token_row(reps, k, inst.h, k);
            out.parts.push_back(TokenBatch::flat(sz.k, sz.n_t, 2, reps));
            break;
        }
        case Task::MuMimoPrecoding: {
            auto reps = zeros({sz.k * sz.n_r, 2 * sz.n_t});
            for (std::int64_t c = 0; c < sz.k * sz.n_r; ++c) detail::write_token_row(reps, c, inst.h, c);
            out.parts.push_back(TokenBatch::nested(SetStructure::nested(sz.k, sz.n_r), sz.n_t, 2, reps));
            break;
        }
        case Task::CoordinatedBeamforming: {
            const std::int64_t s_total = sz.m * sz.k;
            auto reps = zeros({sz.m * s_total, 2 * sz.n_t});
            for (std::int64_t rep = 0; rep < sz.m; ++rep) {
                const ComplexMatrix from_bs = inst.h.block(rep * sz.n_t, 0, sz.n_t, s_total);
                for (std::int64_t t = 0; t < s_total; ++t)
                    detail::write_token_row(reps, rep * s_total + t, from_bs, t);
            }
            out.parts.push_back(
                TokenBatch::multi_rep(sz.m, SetStructure::nested(sz.m, sz.k), sz.n_t, 2, reps));
            break;
        }
        case Task::PowerAllocation: {
            const std::int64_t s_total = sz.m * sz.k;
            auto reps = zeros({s_total, 2 * s_total});
            for (std::int64_t t = 0; t < s_total; ++t) detail::write_token_row(reps, t, inst.h, t);
            out.parts.push_back(TokenBatch::nested(SetStructure::nested(sz.m, sz.k), s_total, 2, reps));
            break;
        }
        case Task::WidebandMuMisoPrecoding: {
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb) {
                const ComplexMatrix h_rb = inst.h.block(rb * sz.n_t, 0, sz.n_t, sz.k);
                auto reps = zeros({sz.k, 2 * sz.n_t});
                for (std::int64_t k = 0; k < sz.k; ++k) detail::write_token_row(reps, k, h_rb, k);
                out.parts.push_back(TokenBatch::flat(sz.k, sz.n_t, 2, reps));
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Duality recovery (optimal MU-MISO precoding structure)
// ---------------------------------------------------------------------------

/// V = (I + H Lambda H^H / sigma^2)^{-1} H P^{1/2}, with the k-th diagonal of
/// P equal to p_k / ||(I + H Lambda H^H / sigma^2)^{-1} h_k||^2.
inline ComplexMatrix duality_recover(const ComplexMatrix& h, const std::vector<double>& p,
                                     const std::vector<double>& lambda, double sigma2, double p_t) {
    const std::int64_t k = h.cols;
    if (static_cast<std::int64_t>(p.size()) != k || static_cast<std::int64_t>(lambda.size()) != k)
        throw std::invalid_argument("duality_recover: p and lambda must have K entries");
    double sum_p = 0.0, sum_l = 0.0;
    for (std::int64_t i = 0; i < k; ++i) {
        if (p[static_cast<std::size_t>(i)] <= 0.0 || lambda[static_cast<std::size_t>(i)] <= 0.0)
            throw std::invalid_argument("duality_recover: p and lambda must be positive");
        sum_p += p[static_cast<std::size_t>(i)];
        sum_l += lambda[static_cast<std::size_t>(i)];
    }
    if (std::abs(sum_p - p_t) > 1e-9 * p_t || std::abs(sum_l - p_t) > 1e-9 * p_t)
        throw std::invalid_argument("duality_recover: p and lambda must each sum to the power budget");

    // A = I + H Lambda H^H / sigma^2
    ComplexMatrix a = cx_identity(h.rows);
    for (std::int64_t i = 0; i < k; ++i) {
        const ComplexMatrix hi = h.column(i);
        const ComplexMatrix outer = cx_matmul(hi, cx_herm(hi));
        a = cx_add(a, cx_scale(outer, lambda[static_cast<std::size_t>(i)] / sigma2));
    }
    const ComplexMatrix ainv_h = complex_solve(a, h);  // columns: A^{-1} h_k
    ComplexMatrix v(h.rows, k);
    for (std::int64_t i = 0; i < k; ++i) {
        double nrm_sq = 0.0;
        for (std::int64_t r = 0; r < h.rows; ++r) nrm_sq += std::norm(ainv_h.at(r, i));
        const double scale = std::sqrt(p[static_cast<std::size_t>(i)] / nrm_sq);
        for (std::int64_t r = 0; r < h.rows; ++r) v.set(r, i, ainv_h.at(r, i) * scale);
    }
    return v;
}

}  // namespace peformer
