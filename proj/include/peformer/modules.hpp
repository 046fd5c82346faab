#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/permutation.hpp"
#include "peformer/rng.hpp"
#include "peformer/tensor.hpp"

namespace peformer {

/// A batch of token representations. Rows are tokens (rep-major for
/// multi-representation batches), columns are the token width. The width is
/// feature-major: feat_j segments of n_block entries each, so permuting the
/// width-block set means permuting positions inside every segment at once.
/// For channel tokens the first segment is Re over antennas, the second Im.
struct TokenBatch {
    enum class Layout { Flat, Nested, MultiRep };

    Layout layout = Layout::Flat;
    std::int64_t n_tokens = 0;  // tokens per representation
    std::int64_t n_reps = 1;    // MultiRep only; 1 otherwise
    SetStructure token_structure;  // Nested/MultiRep: subset structure of the tokens
    std::int64_t n_block = 1;   // width-block count (the AN^BS-side set size)
    std::int64_t feat_j = 1;    // features per width block
    TensorPtr reps;             // [n_reps*n_tokens, feat_j*n_block]

    std::int64_t width() const { return feat_j * n_block; }
    std::int64_t rows() const { return n_reps * n_tokens; }

    TokenBatch with_reps(TensorPtr r, std::int64_t new_feat_j) const {
        TokenBatch out = *this;
        out.feat_j = new_feat_j;
        out.reps = std::move(r);
        return out;
    }

    static TokenBatch flat(std::int64_t n_tokens, std::int64_t n_block, std::int64_t feat_j, TensorPtr reps) {
        TokenBatch b;
        b.layout = Layout::Flat;
        b.n_tokens = n_tokens;
        b.token_structure = SetStructure::normal(n_tokens);
        b.n_block = n_block;
        b.feat_j = feat_j;
        b.reps = std::move(reps);
        return b;
    }

    static TokenBatch nested(const SetStructure& s, std::int64_t n_block, std::int64_t feat_j, TensorPtr reps) {
        TokenBatch b;
        b.layout = Layout::Nested;
        b.n_tokens = s.total();
        b.token_structure = s;
        b.n_block = n_block;
        b.feat_j = feat_j;
        b.reps = std::move(reps);
        return b;
    }

    static TokenBatch multi_rep(std::int64_t n_reps, const SetStructure& s, std::int64_t n_block,
                                std::int64_t feat_j, TensorPtr reps) {
        TokenBatch b;
        b.layout = Layout::MultiRep;
        b.n_tokens = s.total();
        b.n_reps = n_reps;
        b.token_structure = s;
        b.n_block = n_block;
        b.feat_j = feat_j;
        b.reps = std::move(reps);
        return b;
    }
};

/// Weight with identical diagonal blocks u1 and identical off-diagonal
/// blocks u2. Parameter count 2*j_out*j_in regardless of the block count.
struct SharedWeight {
    TensorPtr u1;  // [j_out, j_in]
    TensorPtr u2;  // [j_out, j_in]

    std::int64_t j_out() const { return u1->shape[0]; }
    std::int64_t j_in() const { return u1->shape[1]; }

    /// Dense realization in block-major layout: an n_block x n_block grid of
    /// j_out x j_in blocks, diagonal u1, off-diagonal u2.
    TensorPtr realize_dense(std::int64_t n_block) const {
        const std::int64_t jo = j_out(), ji = j_in();
        auto m = zeros({jo * n_block, ji * n_block});
        for (std::int64_t br = 0; br < n_block; ++br)
            for (std::int64_t bc = 0; bc < n_block; ++bc) {
                const TensorPtr& blk = br == bc ? u1 : u2;
                for (std::int64_t r = 0; r < jo; ++r)
                    for (std::int64_t c = 0; c < ji; ++c)
                        m->at(br * jo + r, bc * ji + c) = blk->at(r, c);
            }
        return m;
    }
};

inline SharedWeight make_shared_weight(std::int64_t j_out, std::int64_t j_in, Rng& rng, double init_scale) {
    auto draw = [&](Shape s) {
        auto t = zeros(std::move(s), true);
        for (auto& v : t->data) v = rng.uniform(-init_scale, init_scale);
        return t;
    };
    return SharedWeight{draw({j_out, j_in}), draw({j_out, j_in})};
}

inline TensorPtr make_dense_weight(std::int64_t rows, std::int64_t cols, Rng& rng, double init_scale) {
    auto t = zeros({rows, cols}, true);
    for (auto& v : t->data) v = rng.uniform(-init_scale, init_scale);
    return t;
}

/// Block-major shared matvec: output block n = (u1-u2)*d_n + u2*sum_m d_m.
/// Agrees with realize_dense(n_block) * d.
inline std::vector<double> shared_matvec(const SharedWeight& w, const std::vector<double>& d,
                                         std::int64_t n_block) {
    const std::int64_t ji = w.j_in(), jo = w.j_out();
    if (static_cast<std::int64_t>(d.size()) != ji * n_block)
        throw std::invalid_argument("shared_matvec: vector length " + std::to_string(d.size()) +
                                    " not divisible into " + std::to_string(n_block) + " blocks of " +
                                    std::to_string(ji));
    std::vector<double> total(static_cast<std::size_t>(ji), 0.0);
    for (std::int64_t n = 0; n < n_block; ++n)
        for (std::int64_t p = 0; p < ji; ++p) total[static_cast<std::size_t>(p)] += d[static_cast<std::size_t>(n * ji + p)];
    std::vector<double> out(static_cast<std::size_t>(jo * n_block), 0.0);
    for (std::int64_t n = 0; n < n_block; ++n)
        for (std::int64_t q = 0; q < jo; ++q) {
            double acc = 0.0;
            for (std::int64_t p = 0; p < ji; ++p) {
                const double a = w.u1->at(q, p) - w.u2->at(q, p);
                acc += a * d[static_cast<std::size_t>(n * ji + p)] + w.u2->at(q, p) * total[static_cast<std::size_t>(p)];
            }
            out[static_cast<std::size_t>(n * jo + q)] = acc;
        }
    return out;
}

namespace detail {

/// Constant selector I_j (x) 1_{1 x n}: row p sums feature segment p.
inline TensorPtr segment_sum_selector(std::int64_t j, std::int64_t n) {
    auto t = zeros({j, j * n});
    for (std::int64_t p = 0; p < j; ++p)
        for (std::int64_t q = 0; q < n; ++q) t->at(p, p * n + q) = 1.0;
    return t;
}

/// Constant broadcaster I_j (x) 1_{n x 1}: expands one value per feature to
/// the whole segment.
inline TensorPtr segment_broadcast_selector(std::int64_t j, std::int64_t n) {
    auto t = zeros({j * n, j});
    for (std::int64_t p = 0; p < j; ++p)
        for (std::int64_t q = 0; q < n; ++q) t->at(p * n + q, p) = 1.0;
    return t;
}

}  // namespace detail

/// Column action of a shared weight on a matrix of column vectors in
/// feature-major layout: xt is [j_in*n_block, cols], result
/// [j_out*n_block, cols]. Equivalent to the block-major dense realization
/// conjugated by the feature/block interleave.
inline TensorPtr shared_matmat_cols(Graph& g, const SharedWeight& w, const TensorPtr& xt,
                                    std::int64_t n_block) {
    const std::int64_t ji = w.j_in(), jo = w.j_out();
    if (xt->shape[0] != ji * n_block)
        throw std::invalid_argument("shared weight expects width " + std::to_string(ji * n_block) +
                                    ", got " + std::to_string(xt->shape[0]));
    const std::int64_t cols = xt->shape[1];
    auto grid = g.reshape(xt, {ji, n_block * cols});
    auto y1 = g.reshape(g.matmul(g.sub(w.u1, w.u2), grid), {jo * n_block, cols});
    auto sums = g.matmul(detail::segment_sum_selector(ji, n_block), xt);       // [ji, cols]
    auto y2 = g.matmul(detail::segment_broadcast_selector(jo, n_block), g.matmul(w.u2, sums));
    return g.add(y1, y2);
}

/// Row action: tokens are rows of x ([rows, j_in*n_block]).
inline TensorPtr shared_apply_rows(Graph& g, const SharedWeight& w, const TensorPtr& x,
                                   std::int64_t n_block) {
    return g.transpose(shared_matmat_cols(g, w, g.transpose(x), n_block));
}

enum class Activation { Tanh, Identity };

inline TensorPtr activate(Graph& g, Activation a, const TensorPtr& x) {
    return a == Activation::Tanh ? g.tanh(x) : x;
}

// ---------------------------------------------------------------------------
// Attention sub-layers. Scores are raw bilinear forms; there is deliberately
// no softmax and no scaling anywhere in the attention path.
// ---------------------------------------------------------------------------

struct AttParams {
    TensorPtr uk;  // [W, W]
    TensorPtr uv;  // [W, W]
};

struct AttPsParams {
    SharedWeight uk;
    SharedWeight uv;
};

struct NattParams {
    TensorPtr us_k, us_v;  // local branch
    TensorPtr ud_k, ud_v;  // global branch
};

struct NattPsParams {
    SharedWeight us_k, us_v;
    SharedWeight ud_k, ud_v;
};

struct FfnParams {
    // Stored as [W_in, W_out]; rows of (tokens + context) are multiplied on
    // the right, which matches applying the paper-orientation matrix on
    // column vectors.
    TensorPtr uf;
};

struct FfnPsParams {
    SharedWeight uf;  // j_in -> j_out per block
};

namespace detail {

inline void require_width(const TokenBatch& b, std::int64_t w, const char* module) {
    if (b.width() != w)
        throw std::invalid_argument(std::string(module) + ": token width " + std::to_string(b.width()) +
                                    " does not match parameter width " + std::to_string(w));
}

/// Constant 0/1 token mask with all-ones blocks per subset.
inline TensorPtr local_mask(const SetStructure& s) {
    const IntMat m = mask_matrix(s);
    auto t = zeros({m.rows, m.cols});
    for (std::size_t i = 0; i < m.a.size(); ++i) t->data[i] = static_cast<double>(m.a[i]);
    return t;
}

/// Context for one representation: rows [T, W].
inline TensorPtr att_core(Graph& g, const TensorPtr& x, const TensorPtr& uk, const TensorPtr& uv) {
    auto xt = g.transpose(x);                // [W, T]
    auto scores = g.matmul(x, g.matmul(uk, xt));  // [T, T], scores[k][i] = d_k' Uk d_i
    auto values = g.transpose(g.matmul(uv, xt));  // [T, W], row i = (Uv d_i)'
    return g.matmul(scores, values);
}

inline TensorPtr att_core_ps(Graph& g, const TensorPtr& x, const AttPsParams& p, std::int64_t n_block) {
    auto xt = g.transpose(x);
    auto scores = g.matmul(x, shared_matmat_cols(g, p.uk, xt, n_block));
    auto values = g.transpose(shared_matmat_cols(g, p.uv, xt, n_block));
    return g.matmul(scores, values);
}

inline TensorPtr natt_core(Graph& g, const TensorPtr& x, const TensorPtr& mask, const TensorPtr& us_k,
                           const TensorPtr& us_v, const TensorPtr& ud_k, const TensorPtr& ud_v) {
    auto xt = g.transpose(x);
    auto local_scores = g.elementwise_mul(g.matmul(x, g.matmul(us_k, xt)), mask);
    auto local = g.matmul(local_scores, g.transpose(g.matmul(us_v, xt)));
    auto global_scores = g.matmul(x, g.matmul(ud_k, xt));
    auto global = g.matmul(global_scores, g.transpose(g.matmul(ud_v, xt)));
    return g.add(local, global);
}

inline TensorPtr natt_core_ps(Graph& g, const TensorPtr& x, const TensorPtr& mask, const NattPsParams& p,
                              std::int64_t n_block) {
    auto xt = g.transpose(x);
    auto local_scores = g.elementwise_mul(g.matmul(x, shared_matmat_cols(g, p.us_k, xt, n_block)), mask);
    auto local = g.matmul(local_scores, g.transpose(shared_matmat_cols(g, p.us_v, xt, n_block)));
    auto global_scores = g.matmul(x, shared_matmat_cols(g, p.ud_k, xt, n_block));
    auto global = g.matmul(global_scores, g.transpose(shared_matmat_cols(g, p.ud_v, xt, n_block)));
    return g.add(local, global);
}

/// Apply an [T,W]->[T,W'] map per representation of a multi-rep batch.
template <typename Fn>
TensorPtr per_rep(Graph& g, const TokenBatch& b, Fn&& fn) {
    if (b.n_reps == 1) return fn(b.reps);
    std::vector<TensorPtr> parts;
    parts.reserve(static_cast<std::size_t>(b.n_reps));
    for (std::int64_t r = 0; r < b.n_reps; ++r)
        parts.push_back(fn(g.slice(b.reps, r * b.n_tokens, 0, b.n_tokens, b.width())));
    return g.concat(parts, 0);
}

}  // namespace detail

/// ATT: c_k = sum_i (d_k' Uk d_i) Uv d_i over all tokens.
inline TokenBatch att_forward(Graph& g, const TokenBatch& tokens, const AttParams& p) {
    detail::require_width(tokens, p.uk->shape[0], "att_forward");
    auto ctx = detail::per_rep(g, tokens, [&](const TensorPtr& x) { return detail::att_core(g, x, p.uk, p.uv); });
    return tokens.with_reps(ctx, tokens.feat_j);
}

/// ATT (P.S.): same rule with both weights block-structured.
inline TokenBatch att_ps_forward(Graph& g, const TokenBatch& tokens, const AttPsParams& p) {
    detail::require_width(tokens, p.uk.j_in() * tokens.n_block, "att_ps_forward");
    auto ctx = detail::per_rep(g, tokens,
                               [&](const TensorPtr& x) { return detail::att_core_ps(g, x, p, tokens.n_block); });
    return tokens.with_reps(ctx, tokens.feat_j);
}

/// NATT: masked local attention within each subset plus unmasked global
/// attention, with independent weights per branch.
inline TokenBatch natt_forward(Graph& g, const TokenBatch& tokens, const NattParams& p) {
    if (tokens.token_structure.kind != SetStructure::Kind::Nested)
        throw std::invalid_argument("natt_forward: token layout is not nested");
    detail::require_width(tokens, p.us_k->shape[0], "natt_forward");
    auto mask = detail::local_mask(tokens.token_structure);
    auto ctx = detail::per_rep(g, tokens, [&](const TensorPtr& x) {
        return detail::natt_core(g, x, mask, p.us_k, p.us_v, p.ud_k, p.ud_v);
    });
    return tokens.with_reps(ctx, tokens.feat_j);
}

inline TokenBatch natt_ps_forward(Graph& g, const TokenBatch& tokens, const NattPsParams& p) {
    if (tokens.token_structure.kind != SetStructure::Kind::Nested)
        throw std::invalid_argument("natt_ps_forward: token layout is not nested");
    detail::require_width(tokens, p.us_k.j_in() * tokens.n_block, "natt_ps_forward");
    auto mask = detail::local_mask(tokens.token_structure);
    auto ctx = detail::per_rep(
        g, tokens, [&](const TensorPtr& x) { return detail::natt_core_ps(g, x, mask, p, tokens.n_block); });
    return tokens.with_reps(ctx, tokens.feat_j);
}

/// FFN: d_k = sigma(Uf (d_k + c_k)); the residual is added before the linear map.
inline TokenBatch ffn_forward(Graph& g, const TokenBatch& tokens, const TokenBatch& context,
                              const FfnParams& p, Activation act = Activation::Tanh) {
    if (tokens.reps->shape != context.reps->shape)
        throw std::invalid_argument("ffn_forward: tokens " + shape_str(tokens.reps->shape) +
                                    " and context " + shape_str(context.reps->shape) + " differ");
    detail::require_width(tokens, p.uf->shape[0], "ffn_forward");
    auto y = activate(g, act, g.matmul(g.add(tokens.reps, context.reps), p.uf));
    const std::int64_t w_out = p.uf->shape[1];
    if (w_out % tokens.n_block != 0)
        throw std::invalid_argument("ffn_forward: output width not divisible by block count");
    return tokens.with_reps(y, w_out / tokens.n_block);
}

inline TokenBatch ffn_ps_forward(Graph& g, const TokenBatch& tokens, const TokenBatch& context,
                                 const FfnPsParams& p, Activation act = Activation::Tanh) {
    if (tokens.reps->shape != context.reps->shape)
        throw std::invalid_argument("ffn_ps_forward: tokens and context shapes differ");
    detail::require_width(tokens, p.uf.j_in() * tokens.n_block, "ffn_ps_forward");
    auto y = activate(g, act, shared_apply_rows(g, p.uf, g.add(tokens.reps, context.reps), tokens.n_block));
    return tokens.with_reps(y, p.uf.j_out());
}

/// Block-diagonal extraction: entries outside the k-th diagonal block are
/// zeroed. Unit blocks give the scalar diagonal extraction.
inline TensorPtr diag_output(Graph& g, const TensorPtr& x, const std::vector<std::int64_t>& block_rows,
                             const std::vector<std::int64_t>& block_cols) {
    if (block_rows.size() != block_cols.size())
        throw std::invalid_argument("diag_output: block lists have different lengths");
    std::int64_t rs = 0, cs = 0;
    for (auto v : block_rows) rs += v;
    for (auto v : block_cols) cs += v;
    if (x->shape.size() != 2 || rs != x->shape[0] || cs != x->shape[1])
        throw std::invalid_argument("diag_output: block lists sum to (" + std::to_string(rs) + "," +
                                    std::to_string(cs) + ") but matrix is " + shape_str(x->shape));
    auto mask = zeros(x->shape);
    std::int64_t r0 = 0, c0 = 0;
    for (std::size_t k = 0; k < block_rows.size(); ++k) {
        for (std::int64_t r = 0; r < block_rows[k]; ++r)
            for (std::int64_t c = 0; c < block_cols[k]; ++c) mask->at(r0 + r, c0 + c) = 1.0;
        r0 += block_rows[k];
        c0 += block_cols[k];
    }
    return g.elementwise_mul(x, mask);
}

/// Positional encoding stub for non-PE policies: fixed additive sinusoids.
inline TensorPtr positional_encoding(std::int64_t n_tokens, std::int64_t width) {
    auto pe = zeros({n_tokens, width});
    for (std::int64_t t = 0; t < n_tokens; ++t)
        for (std::int64_t w = 0; w < width; ++w) {
            const double angle =
                static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * (w / 2)) / static_cast<double>(width));
            pe->at(t, w) = (w % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

/// Scale row groups so each group's total squared norm equals exactly the
/// budget. groups are (first row, row count) pairs covering disjoint rows;
/// an empty list means one global group over all rows.
inline TensorPtr power_normalize(Graph& g, const TensorPtr& x, double budget,
                                 std::vector<std::pair<std::int64_t, std::int64_t>> groups = {}) {
    if (budget <= 0.0) throw std::invalid_argument("power_normalize: budget must be positive");
    if (groups.empty()) groups.push_back({0, x->shape[0]});
    std::vector<TensorPtr> parts;
    parts.reserve(groups.size());
    for (const auto& [first, count] : groups) {
        auto block = g.slice(x, first, 0, count, x->shape[1]);
        auto ssq = g.sum(g.square(block));
        if (ssq->data[0] <= 0.0)
            throw std::invalid_argument("power_normalize: group at row " + std::to_string(first) +
                                        " has zero power, scale undefined");
        auto factor = g.sqrt(g.scale(g.reciprocal(ssq), budget));
        parts.push_back(g.scale_by(block, factor));
    }
    return parts.size() == 1 ? parts[0] : g.concat(parts, 0);
}

/// One budget shared by several tensors (used when total power couples
/// otherwise independent forward passes).
inline std::vector<TensorPtr> power_normalize_joint(Graph& g, const std::vector<TensorPtr>& parts,
                                                    double budget) {
    if (budget <= 0.0) throw std::invalid_argument("power_normalize_joint: budget must be positive");
    if (parts.empty()) throw std::invalid_argument("power_normalize_joint: no parts");
    TensorPtr ssq;
    for (const auto& p : parts) {
        auto s = g.sum(g.square(p));
        ssq = ssq ? g.add(ssq, s) : s;
    }
    if (ssq->data[0] <= 0.0) throw std::invalid_argument("power_normalize_joint: zero power, scale undefined");
    auto factor = g.sqrt(g.scale(g.reciprocal(ssq), budget));
    std::vector<TensorPtr> out;
    out.reserve(parts.size());
    for (const auto& p : parts) out.push_back(g.scale_by(p, factor));
    return out;
}

}  // namespace peformer
