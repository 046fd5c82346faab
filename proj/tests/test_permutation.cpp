#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "peformer/permutation.hpp"
#include "peformer/rng.hpp"

using namespace peformer;

namespace {

IntMat hadamard(const IntMat& a, const IntMat& b) {
    IntMat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.a.size(); ++i) out.a[i] = a.a[i] * b.a[i];
    return out;
}

IntMat random_int_mat(std::int64_t r, std::int64_t c, Rng& rng) {
    IntMat m(r, c);
    for (auto& v : m.a) v = static_cast<int>(rng.below(19)) - 9;
    return m;
}

bool is_permutation_matrix(const IntMat& p) {
    if (p.rows != p.cols) return false;
    for (std::int64_t r = 0; r < p.rows; ++r) {
        int sum = 0;
        for (std::int64_t c = 0; c < p.cols; ++c) {
            if (p.at(r, c) != 0 && p.at(r, c) != 1) return false;
            sum += p.at(r, c);
        }
        if (sum != 1) return false;
    }
    for (std::int64_t c = 0; c < p.cols; ++c) {
        int sum = 0;
        for (std::int64_t r = 0; r < p.rows; ++r) sum += p.at(r, c);
        if (sum != 1) return false;
    }
    return true;
}

}  // namespace

TEST(Realize, NormalIdentity) {
    auto spec = PermutationSpec::identity(SetStructure::normal(3));
    auto p = realize(spec);
    for (std::int64_t r = 0; r < 3; ++r)
        for (std::int64_t c = 0; c < 3; ++c) EXPECT_EQ(p.at(r, c), r == c ? 1 : 0);
}

TEST(Realize, NestedSubsetSwapMovesBlocks) {
    auto s = SetStructure::nested(2, 2);
    auto spec = PermutationSpec::nested(s, {1, 0}, {{0, 1}, {0, 1}});
    // Row vector x = [x1,x2,x3,x4] right-multiplied by the realization must
    // give [x3,x4,x1,x2].
    auto p = realize(spec);
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0}, y(4, 0.0);
    for (std::int64_t j = 0; j < 4; ++j)
        for (std::int64_t i = 0; i < 4; ++i) y[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * p.at(i, j);
    EXPECT_EQ(y, (std::vector<double>{3.0, 4.0, 1.0, 2.0}));
}

TEST(Realize, NestedWithinSwapActsBlockDiagonally) {
    auto s = SetStructure::nested(2, 2);
    auto spec = PermutationSpec::nested(s, {0, 1}, {{1, 0}, {0, 1}});
    auto p = realize(spec);
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0}, y(4, 0.0);
    for (std::int64_t j = 0; j < 4; ++j)
        for (std::int64_t i = 0; i < 4; ++i) y[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * p.at(i, j);
    EXPECT_EQ(y, (std::vector<double>{2.0, 1.0, 3.0, 4.0}));
}

TEST(Realize, EveryNestedRealizationIsAPermutationMatrix) {
    for (std::int64_t n_sub = 1; n_sub <= 3; ++n_sub)
        for (std::int64_t n_s = 1; n_s <= 3; ++n_s)
            for (const auto& spec : enumerate_nested(SetStructure::nested(n_sub, n_s)))
                EXPECT_TRUE(is_permutation_matrix(realize(spec)));
}

TEST(Realize, MatchesKroneckerDefinition) {
    // (Pi_sub (x) I_ns) * blockdiag(Pi_1..Pi_nsub), assembled independently.
    const std::int64_t n_sub = 3, n_s = 2, n = n_sub * n_s;
    auto s = SetStructure::nested(n_sub, n_s);
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        auto spec = sample(s, rng.next_u64());
        IntMat kron(n, n);
        for (std::int64_t a = 0; a < n_sub; ++a)
            for (std::int64_t b = 0; b < n_sub; ++b) {
                const int bit = spec.subset_perm[static_cast<std::size_t>(b)] == a ? 1 : 0;
                for (std::int64_t q = 0; q < n_s; ++q) kron.at(a * n_s + q, b * n_s + q) = bit;
            }
        IntMat bd(n, n);
        for (std::int64_t b = 0; b < n_sub; ++b)
            for (std::int64_t q = 0; q < n_s; ++q)
                bd.at(b * n_s + spec.within[static_cast<std::size_t>(b)][static_cast<std::size_t>(q)],
                      b * n_s + q) = 1;
        EXPECT_TRUE(int_matmul(kron, bd) == realize(spec));
    }
}

TEST(EnumerateNested, Counts) {
    EXPECT_EQ(enumerate_nested(SetStructure::nested(2, 2)).size(), 8u);
    EXPECT_EQ(enumerate_nested(SetStructure::nested(1, 3)).size(), 6u);
    EXPECT_EQ(enumerate_nested(SetStructure::nested(3, 1)).size(), 6u);
}

TEST(EnumerateNested, NoDuplicates) {
    auto specs = enumerate_nested(SetStructure::nested(2, 3));
    std::set<std::vector<std::int64_t>> seen;
    for (const auto& sp : specs) seen.insert(sp.source_map());
    EXPECT_EQ(seen.size(), specs.size());
    EXPECT_EQ(specs.size(), 2u * 6u * 6u);
}

TEST(EnumerateNested, CapExceededReportsRequiredCount) {
    try {
        enumerate_nested(SetStructure::nested(3, 3), 100);
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("1296"), std::string::npos) << e.what();
    }
}

TEST(MaskCommutes, Lemma1HoldsForAllNestedPermutations) {
    auto s = SetStructure::nested(2, 2);
    auto specs = enumerate_nested(s);
    ASSERT_EQ(specs.size(), 8u);
    for (const auto& sp : specs) EXPECT_TRUE(mask_commutes(s, sp));
}

TEST(MaskCommutes, SomeFullPermutationViolates) {
    // Viewed against nested(2,2), at least one element of S_4 must fail.
    auto s = SetStructure::nested(2, 2);
    bool found = false;
    for (const auto& sp : enumerate_normal(4)) {
        const IntMat m = mask_matrix(s);
        const IntMat p = realize(sp);
        if (!(int_matmul(p, m) == int_matmul(m, p))) found = true;
    }
    EXPECT_TRUE(found);
}

TEST(MaskCommutes, IdentityAlwaysCommutes) {
    auto s = SetStructure::nested(3, 2);
    EXPECT_TRUE(mask_commutes(s, PermutationSpec::identity(s)));
}

TEST(MaskCommutes, SizeMismatchRejected) {
    auto s = SetStructure::nested(2, 2);
    EXPECT_THROW(mask_commutes(s, PermutationSpec::identity(SetStructure::normal(3))), std::invalid_argument);
}

TEST(Apply, IdentityBothSides) {
    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto id_r = PermutationSpec::identity(SetStructure::normal(2));
    auto id_c = PermutationSpec::identity(SetStructure::normal(3));
    auto y = apply(&id_r, x, &id_c);
    EXPECT_EQ(y->data, x->data);
}

TEST(Apply, BothAxesSwappedReversesMatrix) {
    auto x = make_tensor({2, 2}, {1, 2, 3, 4});  // [[a,b],[c,d]]
    auto swap = PermutationSpec::normal({1, 0});
    auto y = apply(&swap, x, &swap);
    EXPECT_EQ(y->data, (std::vector<double>{4, 3, 2, 1}));  // [[d,c],[b,a]]
    // Same diagonal elements in permuted order.
    EXPECT_DOUBLE_EQ(y->at(0, 0) + y->at(1, 1), x->at(0, 0) + x->at(1, 1));
}

TEST(Apply, ColumnCycle) {
    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    // Target column j takes source column: new order [x3, x1, x2].
    auto cyc = PermutationSpec::normal({2, 0, 1});
    auto y = apply(nullptr, x, &cyc);
    EXPECT_EQ(y->data, (std::vector<double>{3, 1, 2, 6, 4, 5}));
}

TEST(Sample, NormalOneElementIsAlwaysIdentity) {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        EXPECT_TRUE(sample(SetStructure::normal(1), seed).is_identity());
}

TEST(Sample, DeterministicGivenSeed) {
    auto s = SetStructure::nested(3, 3);
    auto a = sample(s, 777);
    auto b = sample(s, 777);
    EXPECT_EQ(a.source_map(), b.source_map());
    EXPECT_EQ(a.subset_perm, b.subset_perm);
}

TEST(Sample, UniformOverS3ByChiSquare) {
    // 10,000 samples of normal(3): each of the 6 permutations within 5 sigma
    // of the expected count.
    std::map<std::vector<std::int64_t>, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) counts[sample(SetStructure::normal(3), derive_seed(2024, i)).source_map()]++;
    ASSERT_EQ(counts.size(), 6u);
    const double expect = n / 6.0;
    const double sigma = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
    for (const auto& [perm, c] : counts) EXPECT_NEAR(c, expect, 5.0 * sigma);
}

TEST(Permutations, GroupClosure) {
    auto s = SetStructure::nested(2, 3);
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        auto a = sample(s, rng.next_u64());
        auto b = sample(s, rng.next_u64());
        EXPECT_TRUE(int_matmul(realize(a), realize(b)) == realize(compose(a, b)));
    }
    for (int trial = 0; trial < 25; ++trial) {
        auto a = sample(SetStructure::normal(5), rng.next_u64());
        auto b = sample(SetStructure::normal(5), rng.next_u64());
        EXPECT_TRUE(int_matmul(realize(a), realize(b)) == realize(compose(a, b)));
    }
}

TEST(Permutations, HadamardInterchangeExhaustiveUpToSize4) {
    Rng rng(57);
    for (std::int64_t n = 1; n <= 4; ++n) {
        auto perms = enumerate_normal(n);
        const IntMat a = random_int_mat(n, n, rng);
        const IntMat b = random_int_mat(n, n, rng);
        for (const auto& p1 : perms)
            for (const auto& p2 : perms) {
                const IntMat m1 = realize(p1), m2 = realize(p2);
                const IntMat lhs = int_matmul(int_matmul(m1, hadamard(a, b)), m2);
                const IntMat rhs = hadamard(int_matmul(int_matmul(m1, a), m2),
                                            int_matmul(int_matmul(m1, b), m2));
                EXPECT_TRUE(lhs == rhs);
            }
    }
}

TEST(Permutations, UnevenSubsetsSupported) {
    auto s = SetStructure::nested_uneven({3, 2});
    EXPECT_EQ(s.total(), 5);
    // Subset swap must be rejected (sizes differ)...
    EXPECT_THROW(PermutationSpec::nested(s, {1, 0}, {{0, 1, 2}, {0, 1}}), std::invalid_argument);
    // ...while within-subset permutations are fine, and Lemma 1 still holds.
    auto sp = PermutationSpec::nested(s, {0, 1}, {{2, 0, 1}, {1, 0}});
    EXPECT_TRUE(is_permutation_matrix(realize(sp)));
    EXPECT_TRUE(mask_commutes(s, sp));
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        EXPECT_TRUE(mask_commutes(s, sample(s, seed)));
}
