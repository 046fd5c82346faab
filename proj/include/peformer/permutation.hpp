#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/rng.hpp"
#include "peformer/tensor.hpp"

namespace peformer {

/// Small exact 0/1 (or integer) matrix used for permutation identities that
/// must hold with integer equality, never floating point.
struct IntMat {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<int> a;

    IntMat() = default;
    IntMat(std::int64_t r, std::int64_t c) : rows(r), cols(c), a(static_cast<std::size_t>(r * c), 0) {}

    int& at(std::int64_t r, std::int64_t c) { return a[static_cast<std::size_t>(r * cols + c)]; }
    int at(std::int64_t r, std::int64_t c) const { return a[static_cast<std::size_t>(r * cols + c)]; }

    friend bool operator==(const IntMat& x, const IntMat& y) {
        return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
    }
};

inline IntMat int_matmul(const IntMat& x, const IntMat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("int_matmul: dimension mismatch");
    IntMat out(x.rows, y.cols);
    for (std::int64_t i = 0; i < x.rows; ++i)
        for (std::int64_t k = 0; k < x.cols; ++k) {
            const int v = x.at(i, k);
            if (v == 0) continue;
            for (std::int64_t j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
        }
    return out;
}

/// A normal set of n elements, or a nested set of subsets. Subset sizes may
/// differ; the equal-size constructor is the documented default.
struct SetStructure {
    enum class Kind { Normal, Nested };
    Kind kind = Kind::Normal;
    std::vector<std::int64_t> subset_sizes;  // Normal: single entry {n}

    static SetStructure normal(std::int64_t n) {
        if (n < 1) throw std::invalid_argument("SetStructure: n must be positive");
        SetStructure s;
        s.kind = Kind::Normal;
        s.subset_sizes = {n};
        return s;
    }

    static SetStructure nested(std::int64_t n_sub, std::int64_t n_s) {
        if (n_sub < 1 || n_s < 1) throw std::invalid_argument("SetStructure: n_sub and n_s must be positive");
        SetStructure s;
        s.kind = Kind::Nested;
        s.subset_sizes.assign(static_cast<std::size_t>(n_sub), n_s);
        return s;
    }

    static SetStructure nested_uneven(std::vector<std::int64_t> sizes) {
        if (sizes.empty()) throw std::invalid_argument("SetStructure: need at least one subset");
        for (auto v : sizes)
            if (v < 1) throw std::invalid_argument("SetStructure: subset sizes must be positive");
        SetStructure s;
        s.kind = Kind::Nested;
        s.subset_sizes = std::move(sizes);
        return s;
    }

    std::int64_t n_sub() const { return static_cast<std::int64_t>(subset_sizes.size()); }

    std::int64_t total() const {
        return std::accumulate(subset_sizes.begin(), subset_sizes.end(), std::int64_t{0});
    }

    std::int64_t offset(std::int64_t subset) const {
        std::int64_t o = 0;
        for (std::int64_t i = 0; i < subset; ++i) o += subset_sizes[static_cast<std::size_t>(i)];
        return o;
    }

    bool uniform() const {
        for (auto v : subset_sizes)
            if (v != subset_sizes[0]) return false;
        return true;
    }
};

namespace detail {
inline void check_bijection(const std::vector<std::int64_t>& p, const char* what) {
    std::vector<char> seen(p.size(), 0);
    for (auto v : p) {
        if (v < 0 || v >= static_cast<std::int64_t>(p.size()) || seen[static_cast<std::size_t>(v)])
            throw std::invalid_argument(std::string(what) + ": map is not a bijection");
        seen[static_cast<std::size_t>(v)] = 1;
    }
}
}  // namespace detail

/// A normal or nested permutation, stored as index maps and realized to a
/// matrix only for verification. Maps use column semantics: the realized
/// matrix P satisfies P[source(j), j] = 1, so column j of X*P is column
/// source(j) of X, and row r of P^T*X is row source(r) of X.
struct PermutationSpec {
    SetStructure structure;
    std::vector<std::int64_t> subset_perm;               // nested only: source subset of target slot
    std::vector<std::vector<std::int64_t>> within;       // per subset; normal: a single map

    static PermutationSpec normal(std::vector<std::int64_t> map) {
        detail::check_bijection(map, "PermutationSpec");
        PermutationSpec p;
        p.structure = SetStructure::normal(static_cast<std::int64_t>(map.size()));
        p.within.push_back(std::move(map));
        return p;
    }

    static PermutationSpec identity(const SetStructure& s) {
        PermutationSpec p;
        p.structure = s;
        if (s.kind == SetStructure::Kind::Nested) {
            p.subset_perm.resize(static_cast<std::size_t>(s.n_sub()));
            std::iota(p.subset_perm.begin(), p.subset_perm.end(), 0);
        }
        for (auto sz : s.subset_sizes) {
            std::vector<std::int64_t> id(static_cast<std::size_t>(sz));
            std::iota(id.begin(), id.end(), 0);
            p.within.push_back(std::move(id));
        }
        return p;
    }

    static PermutationSpec nested(const SetStructure& s, std::vector<std::int64_t> sub,
                                  std::vector<std::vector<std::int64_t>> per_subset) {
        if (s.kind != SetStructure::Kind::Nested)
            throw std::invalid_argument("PermutationSpec::nested: structure is not nested");
        detail::check_bijection(sub, "subset permutation");
        if (static_cast<std::int64_t>(per_subset.size()) != s.n_sub())
            throw std::invalid_argument("PermutationSpec::nested: need one within-map per subset");
        for (std::size_t i = 0; i < per_subset.size(); ++i) {
            if (static_cast<std::int64_t>(per_subset[i].size()) != s.subset_sizes[i])
                throw std::invalid_argument("PermutationSpec::nested: within-map size mismatch");
            detail::check_bijection(per_subset[i], "within-subset permutation");
        }
        for (std::size_t j = 0; j < sub.size(); ++j)
            if (s.subset_sizes[static_cast<std::size_t>(sub[j])] != s.subset_sizes[j])
                throw std::invalid_argument("PermutationSpec::nested: subset permutation must preserve sizes");
        PermutationSpec p;
        p.structure = s;
        p.subset_perm = std::move(sub);
        p.within = std::move(per_subset);
        return p;
    }

    std::int64_t size() const { return structure.total(); }

    bool is_identity() const {
        for (std::size_t j = 0; j < subset_perm.size(); ++j)
            if (subset_perm[j] != static_cast<std::int64_t>(j)) return false;
        for (const auto& w : within)
            for (std::size_t j = 0; j < w.size(); ++j)
                if (w[j] != static_cast<std::int64_t>(j)) return false;
        return true;
    }

    /// Flat column map: source(j) over the whole index range.
    std::vector<std::int64_t> source_map() const {
        const std::int64_t n = size();
        std::vector<std::int64_t> src(static_cast<std::size_t>(n));
        if (structure.kind == SetStructure::Kind::Normal) {
            src = within[0];
            return src;
        }
        for (std::int64_t b = 0; b < structure.n_sub(); ++b) {
            const std::int64_t target_off = structure.offset(b);
            const std::int64_t source_block = subset_perm[static_cast<std::size_t>(b)];
            const std::int64_t source_off = structure.offset(source_block);
            const auto& w = within[static_cast<std::size_t>(b)];
            for (std::int64_t q = 0; q < structure.subset_sizes[static_cast<std::size_t>(b)]; ++q)
                src[static_cast<std::size_t>(target_off + q)] = source_off + w[static_cast<std::size_t>(q)];
        }
        return src;
    }
};

/// Matrix realization: a normal spec yields the permutation matrix of its
/// map; a nested spec yields (Pi_sub (x) I_{n_s}) * blockdiag(Pi_1..Pi_n_sub).
inline IntMat realize(const PermutationSpec& spec) {
    const std::int64_t n = spec.size();
    IntMat p(n, n);
    const auto src = spec.source_map();
    for (std::int64_t j = 0; j < n; ++j) p.at(src[static_cast<std::size_t>(j)], j) = 1;
    return p;
}

/// Block-diagonal 0/1 mask with an all-ones block per subset.
inline IntMat mask_matrix(const SetStructure& s) {
    if (s.kind != SetStructure::Kind::Nested)
        throw std::invalid_argument("mask_matrix: structure must be nested");
    const std::int64_t n = s.total();
    IntMat m(n, n);
    for (std::int64_t b = 0; b < s.n_sub(); ++b) {
        const std::int64_t o = s.offset(b), sz = s.subset_sizes[static_cast<std::size_t>(b)];
        for (std::int64_t r = 0; r < sz; ++r)
            for (std::int64_t c = 0; c < sz; ++c) m.at(o + r, o + c) = 1;
    }
    return m;
}

/// Exact test of M*P == P*M for the structure's mask and a realized spec.
inline bool mask_commutes(const SetStructure& structure, const PermutationSpec& spec) {
    if (structure.total() != spec.size())
        throw std::invalid_argument("mask_commutes: structure size " + std::to_string(structure.total()) +
                                    " != permutation size " + std::to_string(spec.size()));
    const IntMat m = mask_matrix(structure);
    const IntMat p = realize(spec);
    return int_matmul(m, p) == int_matmul(p, m);
}

/// Every nested permutation of the structure, in lexicographic order of the
/// component maps. Count is n_sub! * prod(n_s_i!) for uniform structures.
inline std::vector<PermutationSpec> enumerate_nested(const SetStructure& s, std::int64_t cap = 10000) {
    if (s.kind != SetStructure::Kind::Nested)
        throw std::invalid_argument("enumerate_nested: structure must be nested");

    auto factorial = [](std::int64_t k) {
        std::int64_t f = 1;
        for (std::int64_t i = 2; i <= k; ++i) f *= i;
        return f;
    };

    // Size-preserving subset permutations: product of multiplicity factorials.
    std::vector<std::int64_t> sorted = s.subset_sizes;
    std::sort(sorted.begin(), sorted.end());
    std::int64_t count = 1;
    std::int64_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            count *= factorial(run);
            run = 1;
        }
    }
    for (auto sz : s.subset_sizes) count *= factorial(sz);
    if (count > cap)
        throw std::invalid_argument("enumerate_nested: would produce " + std::to_string(count) +
                                    " specs, above cap " + std::to_string(cap));

    std::vector<std::int64_t> sub(static_cast<std::size_t>(s.n_sub()));
    std::iota(sub.begin(), sub.end(), 0);
    std::vector<PermutationSpec> out;
    out.reserve(static_cast<std::size_t>(count));
    do {
        bool ok = true;
        for (std::size_t j = 0; j < sub.size(); ++j)
            if (s.subset_sizes[static_cast<std::size_t>(sub[j])] != s.subset_sizes[j]) ok = false;
        if (!ok) continue;

        std::vector<std::vector<std::int64_t>> per(static_cast<std::size_t>(s.n_sub()));
        for (std::size_t b = 0; b < per.size(); ++b) {
            per[b].resize(static_cast<std::size_t>(s.subset_sizes[b]));
            std::iota(per[b].begin(), per[b].end(), 0);
        }
        // Odometer over the within-subset permutations.
        while (true) {
            out.push_back(PermutationSpec::nested(s, sub, per));
            std::size_t b = 0;
            for (; b < per.size(); ++b) {
                if (std::next_permutation(per[b].begin(), per[b].end())) break;
                // wrapped to identity; carry into the next subset
            }
            if (b == per.size()) break;
        }
    } while (std::next_permutation(sub.begin(), sub.end()));
    return out;
}

/// All permutations of the symmetric group S_n (as normal specs).
inline std::vector<PermutationSpec> enumerate_normal(std::int64_t n, std::int64_t cap = 10000) {
    std::vector<std::int64_t> map(static_cast<std::size_t>(n));
    std::iota(map.begin(), map.end(), 0);
    std::int64_t count = 1;
    for (std::int64_t i = 2; i <= n; ++i) count *= i;
    if (count > cap)
        throw std::invalid_argument("enumerate_normal: would produce " + std::to_string(count) + " specs");
    std::vector<PermutationSpec> out;
    out.reserve(static_cast<std::size_t>(count));
    do {
        out.push_back(PermutationSpec::normal(map));
    } while (std::next_permutation(map.begin(), map.end()));
    return out;
}

/// Uniform sample over the structure's permutation group; deterministic per seed.
inline PermutationSpec sample(const SetStructure& s, std::uint64_t seed) {
    Rng rng(seed);
    auto shuffle = [&rng](std::vector<std::int64_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(v[i - 1], v[j]);
        }
    };

    if (s.kind == SetStructure::Kind::Normal) {
        std::vector<std::int64_t> map(static_cast<std::size_t>(s.total()));
        std::iota(map.begin(), map.end(), 0);
        shuffle(map);
        return PermutationSpec::normal(std::move(map));
    }

    // Subset permutation: uniform over size-preserving maps (shuffle within
    // groups of equal-size subsets).
    std::vector<std::int64_t> sub(static_cast<std::size_t>(s.n_sub()));
    std::iota(sub.begin(), sub.end(), 0);
    std::vector<std::int64_t> order(sub);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
        return s.subset_sizes[static_cast<std::size_t>(x)] < s.subset_sizes[static_cast<std::size_t>(y)];
    });
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() &&
               s.subset_sizes[static_cast<std::size_t>(order[j])] ==
                   s.subset_sizes[static_cast<std::size_t>(order[i])])
            ++j;
        std::vector<std::int64_t> group(order.begin() + static_cast<std::ptrdiff_t>(i),
                                        order.begin() + static_cast<std::ptrdiff_t>(j));
        std::vector<std::int64_t> shuffled(group);
        shuffle(shuffled);
        for (std::size_t k = 0; k < group.size(); ++k)
            sub[static_cast<std::size_t>(group[k])] = shuffled[k];
        i = j;
    }

    std::vector<std::vector<std::int64_t>> per(static_cast<std::size_t>(s.n_sub()));
    for (std::size_t b = 0; b < per.size(); ++b) {
        per[b].resize(static_cast<std::size_t>(s.subset_sizes[b]));
        std::iota(per[b].begin(), per[b].end(), 0);
        shuffle(per[b]);
    }
    return PermutationSpec::nested(s, std::move(sub), std::move(per));
}

/// Composition c with realize(a)*realize(b) == realize(c); both specs must
/// share the structure.
inline PermutationSpec compose(const PermutationSpec& a, const PermutationSpec& b) {
    if (a.structure.kind != b.structure.kind || a.structure.subset_sizes != b.structure.subset_sizes)
        throw std::invalid_argument("compose: structures differ");
    if (a.structure.kind == SetStructure::Kind::Normal) {
        std::vector<std::int64_t> map(b.within[0].size());
        for (std::size_t j = 0; j < map.size(); ++j)
            map[j] = a.within[0][static_cast<std::size_t>(b.within[0][j])];
        return PermutationSpec::normal(std::move(map));
    }
    const std::int64_t nsub = a.structure.n_sub();
    std::vector<std::int64_t> sub(static_cast<std::size_t>(nsub));
    std::vector<std::vector<std::int64_t>> per(static_cast<std::size_t>(nsub));
    for (std::int64_t t = 0; t < nsub; ++t) {
        const std::int64_t mid = b.subset_perm[static_cast<std::size_t>(t)];
        sub[static_cast<std::size_t>(t)] = a.subset_perm[static_cast<std::size_t>(mid)];
        const auto& wb = b.within[static_cast<std::size_t>(t)];
        const auto& wa = a.within[static_cast<std::size_t>(mid)];
        per[static_cast<std::size_t>(t)].resize(wb.size());
        for (std::size_t q = 0; q < wb.size(); ++q)
            per[static_cast<std::size_t>(t)][q] = wa[static_cast<std::size_t>(wb[q])];
    }
    return PermutationSpec::nested(a.structure, std::move(sub), std::move(per));
}

/// Pi_A^T * X * Pi_B with absent specs treated as identity. Pure data
/// movement; does not participate in any autodiff graph.
inline TensorPtr apply(const PermutationSpec* rows, const TensorPtr& x, const PermutationSpec* cols) {
    if (x->shape.size() != 2) throw std::invalid_argument("apply: expected a matrix, got " + shape_str(x->shape));
    if (rows && rows->size() != x->shape[0])
        throw std::invalid_argument("apply: row permutation size " + std::to_string(rows->size()) +
                                    " != matrix rows " + std::to_string(x->shape[0]));
    if (cols && cols->size() != x->shape[1])
        throw std::invalid_argument("apply: column permutation size " + std::to_string(cols->size()) +
                                    " != matrix cols " + std::to_string(x->shape[1]));
    const auto rsrc = rows ? rows->source_map() : std::vector<std::int64_t>{};
    const auto csrc = cols ? cols->source_map() : std::vector<std::int64_t>{};
    auto out = zeros(x->shape);
    for (std::int64_t r = 0; r < x->shape[0]; ++r) {
        const std::int64_t sr = rows ? rsrc[static_cast<std::size_t>(r)] : r;
        for (std::int64_t c = 0; c < x->shape[1]; ++c) {
            const std::int64_t sc = cols ? csrc[static_cast<std::size_t>(c)] : c;
            out->at(r, c) = x->at(sr, sc);
        }
    }
    return out;
}

}  // namespace peformer
