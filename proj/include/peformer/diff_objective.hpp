#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "peformer/complex_linalg.hpp"
#include "peformer/tensor.hpp"
#include "peformer/wireless.hpp"

namespace peformer {

/// Complex value on the differentiation graph: stacked real and imaginary
/// parts of equal shape.
struct CxTensor {
    TensorPtr re;
    TensorPtr im;
};

inline CxTensor cx_const(const ComplexMatrix& m) {
    auto re = zeros({m.rows, m.cols});
    auto im = zeros({m.rows, m.cols});
    re->data = m.re;
    im->data = m.im;
    return {re, im};
}

inline CxTensor cx_herm_const(const ComplexMatrix& m) { return cx_const(cx_herm(m)); }

inline CxTensor cx_mm(Graph& g, const CxTensor& a, const CxTensor& b) {
    return {g.sub(g.matmul(a.re, b.re), g.matmul(a.im, b.im)),
            g.add(g.matmul(a.re, b.im), g.matmul(a.im, b.re))};
}

inline CxTensor cx_herm_var(Graph& g, const CxTensor& a) {
    return {g.transpose(a.re), g.scale(g.transpose(a.im), -1.0)};
}

/// G * G^H for a complex matrix variable; the result is Hermitian.
inline CxTensor cx_gram(Graph& g, const CxTensor& x) {
    auto re_t = g.transpose(x.re);
    auto im_t = g.transpose(x.im);
    return {g.add(g.matmul(x.re, re_t), g.matmul(x.im, im_t)),
            g.sub(g.matmul(x.im, re_t), g.matmul(x.re, im_t))};
}

/// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian variable.
inline TensorPtr cx_real_embedding(Graph& g, const CxTensor& a) {
    auto top = g.concat({a.re, g.scale(a.im, -1.0)}, 1);
    auto bottom = g.concat({a.im, a.re}, 1);
    return g.concat({top, bottom}, 0);
}

/// Differentiable log det of a symmetric positive definite matrix via an
/// element-level Cholesky decomposition composed from graph primitives.
inline TensorPtr logdet_spd_diff(Graph& g, const TensorPtr& a) {
    if (a->shape.size() != 2 || a->shape[0] != a->shape[1])
        throw std::invalid_argument("logdet_spd_diff: matrix must be square, got " + shape_str(a->shape));
    const std::int64_t n = a->shape[0];
    std::vector<std::vector<TensorPtr>> l(static_cast<std::size_t>(n),
                                          std::vector<TensorPtr>(static_cast<std::size_t>(n)));
    std::vector<TensorPtr> log_diag;
    log_diag.reserve(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        auto s = g.slice(a, j, j, 1, 1);
        for (std::int64_t k = 0; k < j; ++k) {
            auto ljk = l[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            s = g.sub(s, g.square(ljk));
        }
        auto ljj = g.sqrt(s);
        l[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = ljj;
        log_diag.push_back(g.log(ljj));
        auto inv_ljj = g.reciprocal(ljj);
        for (std::int64_t i = j + 1; i < n; ++i) {
            auto v = g.slice(a, i, j, 1, 1);
            for (std::int64_t k = 0; k < j; ++k)
                v = g.sub(v, g.elementwise_mul(l[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                                               l[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]));
            l[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = g.elementwise_mul(v, inv_ljj);
        }
    }
    return g.scale(g.sum(g.concat(log_diag, 0)), 2.0);
}

namespace detail {

inline constexpr double kInvLog2 = 1.4426950408889634073599246810019;

/// Scalar-receiver SINR sum from a complex gain variable g_var[r][s] (gain of
/// stream s at receiver r; stream r is receiver r's own signal).
inline TensorPtr se_from_gains_diff(Graph& g, const CxTensor& gains, double sigma2) {
    const std::int64_t s_total = gains.re->shape[0];
    auto power = g.add(g.square(gains.re), g.square(gains.im));  // [S, S]
    auto ones_col = full({s_total, 1}, 1.0);
    auto total = g.matmul(power, ones_col);
    auto sig = g.matmul(g.elementwise_mul(power, identity(s_total)), ones_col);
    auto interference = g.add(g.sub(total, sig), full({s_total, 1}, sigma2));
    auto sinr = g.elementwise_mul(sig, g.reciprocal(interference));
    auto rates = g.log(g.add(full({s_total, 1}, 1.0), sinr));
    return g.scale(g.sum(rates), kInvLog2);
}

}  // namespace detail

/// Differentiable spectral efficiency for the scalar-receiver tasks.
/// v is [N_t, K] (MU-MISO) or [N_t, M*K] with columns grouped per BS (CB).
inline TensorPtr se_diff_miso(Graph& g, const ProblemInstance& inst, const CxTensor& v) {
    const auto& sz = inst.sizes;
    if (inst.task == Task::MuMisoPrecoding) {
        auto gains = cx_mm(g, cx_herm_const(inst.h), v);
        return detail::se_from_gains_diff(g, gains, inst.sigma2);
    }
    if (inst.task == Task::CoordinatedBeamforming) {
        const std::int64_t s_total = sz.m * sz.k;
        std::vector<TensorPtr> re_blocks, im_blocks;
        for (std::int64_t i = 0; i < sz.m; ++i) {
            auto hh = cx_herm_const(inst.h.block(i * sz.n_t, 0, sz.n_t, s_total));  // [S, N_t]
            CxTensor vi{g.slice(v.re, 0, i * sz.k, sz.n_t, sz.k), g.slice(v.im, 0, i * sz.k, sz.n_t, sz.k)};
            auto gi = cx_mm(g, hh, vi);  // [S, K]
            re_blocks.push_back(gi.re);
            im_blocks.push_back(gi.im);
        }
        CxTensor gains{g.concat(re_blocks, 1), g.concat(im_blocks, 1)};
        return detail::se_from_gains_diff(g, gains, inst.sigma2);
    }
    throw std::invalid_argument("se_diff_miso: task is not a scalar-receiver precoding task");
}

/// Differentiable SE for power allocation; amp is the [1, M*K] row of real
/// amplitudes (transmit power of stream s is amp[s]^2).
inline TensorPtr se_diff_power_allocation(Graph& g, const ProblemInstance& inst, const TensorPtr& amp) {
    const std::int64_t s_total = inst.sizes.m * inst.sizes.k;
    if (amp->shape != Shape{1, s_total})
        throw std::invalid_argument("se_diff_power_allocation: amplitudes must be [1, M*K]");
    // |g_eq[r][s]|^2 * amp[s]^2
    auto gain_pow = zeros({s_total, s_total});
    for (std::int64_t r = 0; r < s_total; ++r)
        for (std::int64_t s = 0; s < s_total; ++s) gain_pow->at(r, s) = std::norm(inst.h.at(s, r));
    auto asq = g.square(amp);
    auto power = g.elementwise_mul(gain_pow, g.matmul(full({s_total, 1}, 1.0), asq));
    auto ones_col = full({s_total, 1}, 1.0);
    auto total = g.matmul(power, ones_col);
    auto sig = g.matmul(g.elementwise_mul(power, identity(s_total)), ones_col);
    auto interference = g.add(g.sub(total, sig), full({s_total, 1}, inst.sigma2));
    auto sinr = g.elementwise_mul(sig, g.reciprocal(interference));
    return g.scale(g.sum(g.log(g.add(full({s_total, 1}, 1.0), sinr))), detail::kInvLog2);
}

/// Differentiable SE for wideband precoding; one [N_t, K] precoder per RB.
inline TensorPtr se_diff_wideband(Graph& g, const ProblemInstance& inst, const std::vector<CxTensor>& v_rb) {
    const auto& sz = inst.sizes;
    if (static_cast<std::int64_t>(v_rb.size()) != sz.n_rb)
        throw std::invalid_argument("se_diff_wideband: need one precoder per resource block");
    TensorPtr se;
    for (std::int64_t rb = 0; rb < sz.n_rb; ++rb) {
        auto hh = cx_herm_const(inst.h.block(rb * sz.n_t, 0, sz.n_t, sz.k));
        auto gains = cx_mm(g, hh, v_rb[static_cast<std::size_t>(rb)]);
        auto part = detail::se_from_gains_diff(g, gains, inst.sigma2);
        se = se ? g.add(se, part) : part;
    }
    return se;
}

/// Differentiable SE for MU-MIMO via the real symmetric embedding of the
/// per-user log dets: log det_C(A) = 0.5 * log det_R(embedding).
inline TensorPtr se_diff_mimo(Graph& g, const ProblemInstance& inst, const CxTensor& v) {
    const auto& sz = inst.sizes;
    if (v.re->shape != Shape{sz.n_t, sz.k * sz.n_r})
        throw std::invalid_argument("se_diff_mimo: V must be [N_t, K*N_r]");
    TensorPtr se;
    for (std::int64_t k = 0; k < sz.k; ++k) {
        auto hkh = cx_herm_const(inst.h.block(0, k * sz.n_r, sz.n_t, sz.n_r));  // [N_r, N_t]
        CxTensor signal{};
        CxTensor noise{full({sz.n_r, sz.n_r}, 0.0), full({sz.n_r, sz.n_r}, 0.0)};
        auto sigma_eye = zeros({sz.n_r, sz.n_r});
        for (std::int64_t d = 0; d < sz.n_r; ++d) sigma_eye->at(d, d) = inst.sigma2;
        noise.re = sigma_eye;
        for (std::int64_t j = 0; j < sz.k; ++j) {
            CxTensor vj{g.slice(v.re, 0, j * sz.n_r, sz.n_t, sz.n_r),
                        g.slice(v.im, 0, j * sz.n_r, sz.n_t, sz.n_r)};
            auto gram = cx_gram(g, cx_mm(g, hkh, vj));
            if (j == k) {
                signal = gram;
            } else {
                noise.re = g.add(noise.re, gram.re);
                noise.im = g.add(noise.im, gram.im);
            }
        }
        CxTensor both{g.add(noise.re, signal.re), g.add(noise.im, signal.im)};
        auto ld_total = logdet_spd_diff(g, cx_real_embedding(g, both));
        auto ld_noise = logdet_spd_diff(g, cx_real_embedding(g, noise));
        auto part = g.scale(g.sub(ld_total, ld_noise), 0.5 * detail::kInvLog2);
        se = se ? g.add(se, part) : part;
    }
    return se;
}

}  // namespace peformer
