#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "peformer/modules.hpp"
#include "peformer/permutation.hpp"
#include "peformer/tensor.hpp"

namespace peformer {

/// Max absolute difference relative to the magnitude of the reference.
inline double rel_deviation(const TensorPtr& got, const TensorPtr& want) {
    if (got->shape != want->shape)
        throw std::invalid_argument("rel_deviation: shapes differ " + shape_str(got->shape) + " vs " +
                                    shape_str(want->shape));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got->data.size(); ++i) {
        num = std::max(num, std::abs(got->data[i] - want->data[i]));
        den = std::max(den, std::abs(want->data[i]));
    }
    return num / (den + 1e-300);
}

/// Permute the token axis (rows, per representation) by a spec over tokens.
inline TokenBatch permute_tokens(const TokenBatch& b, const PermutationSpec& spec) {
    if (spec.size() != b.n_tokens)
        throw std::invalid_argument("permute_tokens: spec size " + std::to_string(spec.size()) +
                                    " != token count " + std::to_string(b.n_tokens));
    const auto src = spec.source_map();
    auto out = zeros(b.reps->shape);
    const std::int64_t w = b.width();
    for (std::int64_t r = 0; r < b.n_reps; ++r)
        for (std::int64_t t = 0; t < b.n_tokens; ++t)
            for (std::int64_t c = 0; c < w; ++c)
                out->at(r * b.n_tokens + t, c) = b.reps->at(r * b.n_tokens + src[static_cast<std::size_t>(t)], c);
    TokenBatch res = b;
    res.reps = out;
    return res;
}

/// Permute the width-block axis: the same position permutation is applied
/// inside every feature segment.
inline TokenBatch permute_width_blocks(const TokenBatch& b, const PermutationSpec& spec) {
    if (spec.size() != b.n_block)
        throw std::invalid_argument("permute_width_blocks: spec size " + std::to_string(spec.size()) +
                                    " != block count " + std::to_string(b.n_block));
    const auto src = spec.source_map();
    auto out = zeros(b.reps->shape);
    for (std::int64_t r = 0; r < b.rows(); ++r)
        for (std::int64_t p = 0; p < b.feat_j; ++p)
            for (std::int64_t n = 0; n < b.n_block; ++n)
                out->at(r, p * b.n_block + n) = b.reps->at(r, p * b.n_block + src[static_cast<std::size_t>(n)]);
    TokenBatch res = b;
    res.reps = out;
    return res;
}

/// Permute the representation axis of a multi-rep batch (rep r of the result
/// is rep rep_source[r] of the input).
inline TokenBatch permute_reps(const TokenBatch& b, const std::vector<std::int64_t>& rep_source) {
    if (static_cast<std::int64_t>(rep_source.size()) != b.n_reps)
        throw std::invalid_argument("permute_reps: map size != n_reps");
    auto out = zeros(b.reps->shape);
    for (std::int64_t r = 0; r < b.n_reps; ++r)
        for (std::int64_t t = 0; t < b.n_tokens; ++t)
            for (std::int64_t c = 0; c < b.width(); ++c)
                out->at(r * b.n_tokens + t, c) = b.reps->at(rep_source[static_cast<std::size_t>(r)] * b.n_tokens + t, c);
    TokenBatch res = b;
    res.reps = out;
    return res;
}

/// Per-representation width permutation for doubly-nested inputs: the width
/// blocks of representation r are permuted by within[rep_source-consistent]
/// maps. Used together with permute_reps for the nested width axis.
inline TokenBatch permute_width_blocks_per_rep(const TokenBatch& b,
                                               const std::vector<PermutationSpec>& per_rep) {
    if (static_cast<std::int64_t>(per_rep.size()) != b.n_reps)
        throw std::invalid_argument("permute_width_blocks_per_rep: need one spec per rep");
    auto out = zeros(b.reps->shape);
    for (std::int64_t r = 0; r < b.n_reps; ++r) {
        const auto src = per_rep[static_cast<std::size_t>(r)].source_map();
        for (std::int64_t t = 0; t < b.n_tokens; ++t)
            for (std::int64_t p = 0; p < b.feat_j; ++p)
                for (std::int64_t n = 0; n < b.n_block; ++n)
                    out->at(r * b.n_tokens + t, p * b.n_block + n) =
                        b.reps->at(r * b.n_tokens + t, p * b.n_block + src[static_cast<std::size_t>(n)]);
    }
    TokenBatch res = b;
    res.reps = out;
    return res;
}

}  // namespace peformer
