#include "mdtd/error.hpp"
#include "mdtd/tensor.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mdtd;

namespace {

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    double m = 0.0;
    for (Index n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
    return m;
}

}  // namespace

TEST(Tensor3, ColumnMajorLayout) {
    Tensor3 x(Dims(2, 3, 4));
    x(1, 2, 3) = 5.0;
    EXPECT_EQ(x[1 + 2 * (2 + 3 * 3)], 5.0);
    EXPECT_EQ(linear_index(x.dims(), {1, 2, 3}), 23);
}

TEST(Tensor3, RejectsWrongValueCount) {
    EXPECT_THROW(Tensor3(Dims(2, 2, 2), std::vector<double>(7)), ShapeError);
}

TEST(Unfold, ModeShapes) {
    const Tensor3 x(Dims(2, 3, 4));
    EXPECT_EQ(unfold(x, 1).rows(), 12);
    EXPECT_EQ(unfold(x, 1).cols(), 2);
    EXPECT_EQ(unfold(x, 2).rows(), 8);
    EXPECT_EQ(unfold(x, 2).cols(), 3);
    EXPECT_EQ(unfold(x, 3).rows(), 6);
    EXPECT_EQ(unfold(x, 3).cols(), 4);
    EXPECT_THROW((void)unfold(x, 0), InvalidArgument);
    EXPECT_THROW((void)unfold(x, 4), InvalidArgument);
}

TEST(Unfold, MatchesDefinitionAndRoundTrips) {
    oracle::Gen gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor3 x = gen.tensor(gen.dims(1, 6));
        for (int mode = 1; mode <= 3; ++mode) {
            const Matrix u = unfold(x, mode);
            for (Index c = 0; c < u.cols(); ++c)
                for (Index r = 0; r < u.rows(); ++r) ASSERT_EQ(u(r, c), oracle::unfold_at(x, mode, r, c));
            EXPECT_EQ(fold(u, mode, x.dims()), x);
        }
    }
}

TEST(Unfold, FoldRejectsShapeMismatch) {
    EXPECT_THROW((void)fold(Matrix::Zero(5, 2), 1, Dims(2, 3, 4)), ShapeError);
}

TEST(KhatriRao, MatchesEntrywiseOracle) {
    oracle::Gen gen(3);
    const Matrix a = gen.matrix(4, 3), b = gen.matrix(5, 3);
    EXPECT_LT((khatri_rao(b, a) - oracle::khatri_rao(b, a)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW((void)khatri_rao(b, gen.matrix(4, 2)), ShapeError);
}

TEST(KhatriRao, GramIdentityProperty) {
    oracle::Gen gen(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Index k = gen.integer(1, 6);
        const Matrix a = gen.matrix(gen.integer(1, 8), k), b = gen.matrix(gen.integer(1, 8), k);
        const Matrix kr = khatri_rao(b, a);
        EXPECT_LT((kr_gram(a, b) - kr.transpose() * kr).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Reconstruct, RankOneOuterProduct) {
    Matrix a(2, 1), b(2, 1), c(2, 1);
    a << 1, 2;
    b << 1, 0;
    c << 1, 1;
    const Tensor3 x = reconstruct(a, b, c, Vector::Ones(1));
    for (Index t = 0; t < 2; ++t)
        for (Index i = 0; i < 2; ++i) {
            EXPECT_EQ(x(i, 0, t), a(i));
            EXPECT_EQ(x(i, 1, t), 0.0);
        }
}

TEST(Reconstruct, MatchesTripleLoopOracle) {
    oracle::Gen gen(7);
    for (int trial = 0; trial < 25; ++trial) {
        const Dims d = gen.dims(1, 6);
        const Index k = gen.integer(1, 4);
        const Matrix a = gen.matrix(d[0], k), b = gen.matrix(d[1], k), c = gen.matrix(d[2], k);
        const Vector s = gen.vector(k, 0.1, 2.0);
        EXPECT_LT(max_abs_diff(reconstruct(a, b, c, s), oracle::reconstruct(a, b, c, s)), 1e-12);
    }
}

TEST(Reconstruct, UnfoldingIdentity) {
    oracle::Gen gen(8);
    const Matrix a = gen.matrix(3, 2), b = gen.matrix(4, 2), c = gen.matrix(5, 2);
    const Tensor3 x = reconstruct(a, b, c, Vector::Ones(2));
    EXPECT_LT((unfold(x, 1).transpose() - a * khatri_rao(c, b).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((unfold(x, 2).transpose() - b * khatri_rao(c, a).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((unfold(x, 3).transpose() - c * khatri_rao(b, a).transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruct, AtIndicesIsBitIdentical) {
    oracle::Gen gen(9);
    const Dims d(7, 8, 9);
    const Matrix a = gen.matrix(7, 5), b = gen.matrix(8, 5), c = gen.matrix(9, 5);
    const Vector s = gen.vector(5, 0.5, 1.5);
    const Tensor3 full = reconstruct(a, b, c, s);
    std::vector<Index3> idx;
    for (int n = 0; n < 100; ++n) idx.push_back({gen.integer(0, 6), gen.integer(0, 7), gen.integer(0, 8)});
    const auto vals = reconstruct_at(a, b, c, s, idx);
    for (std::size_t n = 0; n < idx.size(); ++n) EXPECT_EQ(vals[n], full(idx[n].i, idx[n].j, idx[n].t));
    const Tensor3 brute = oracle::reconstruct(a, b, c, s);
    for (std::size_t n = 0; n < idx.size(); ++n) EXPECT_NEAR(vals[n], brute(idx[n].i, idx[n].j, idx[n].t), 1e-12);
}

TEST(Reconstruct, RejectsRankMismatch) {
    EXPECT_THROW((void)reconstruct(Matrix::Zero(2, 2), Matrix::Zero(2, 3), Matrix::Zero(2, 2), Vector::Ones(2)),
                 ShapeError);
    EXPECT_THROW((void)reconstruct(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2), Vector::Ones(3)),
                 ShapeError);
}

TEST(Mttkrp, DenseAndSparseMatchOracle) {
    oracle::Gen gen(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Dims d = gen.dims(1, 6);
        Tensor3 x = gen.tensor(d);
        for (Index n = 0; n < x.size(); ++n)
            if (gen.uniform() < -0.4) x[n] = 0.0;
        const SparseTensor3 sx = SparseTensor3::sparsify(x);
        const Index k = gen.integer(1, 4);
        const Matrix f[3] = {gen.matrix(d[0], k), gen.matrix(d[1], k), gen.matrix(d[2], k)};
        for (int m = 0; m < 3; ++m) {
            const auto [p, q] = other_modes(m);
            const Matrix expect = oracle::mttkrp(x, m + 1, f[p], f[q]);
            EXPECT_LT((mttkrp(x, m + 1, f[p], f[q]) - expect).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((mttkrp(sx, m + 1, f[p], f[q]) - expect).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Mask, FromMissing) {
    const Dims d(2, 2, 2);
    const std::vector<Index3> miss{{1, 0, 0}, {0, 1, 1}};
    const Mask m = Mask::from_missing(d, miss);
    EXPECT_EQ(m.missing_count(), 2);
    EXPECT_EQ(m.observed_count(), 6);
    EXPECT_FALSE(m.observed(Index3{1, 0, 0}));
    EXPECT_TRUE(m.observed(Index3{0, 0, 0}));
    EXPECT_EQ(m.missing_indices(), miss);
    const std::vector<Index3> dup{{1, 0, 0}, {1, 0, 0}};
    EXPECT_THROW((void)Mask::from_missing(d, dup), InvalidArgument);
    const std::vector<Index3> out{{2, 0, 0}};
    EXPECT_THROW((void)Mask::from_missing(d, out), InvalidArgument);
}

TEST(SparseTensor, SortsValidatesAndRoundTrips) {
    const Dims d(3, 2, 2);
    SparseTensor3 s(d, {{{2, 1, 1}, 4.0}, {{0, 0, 0}, 1.0}, {{1, 1, 0}, 0.0}});
    EXPECT_EQ(s.nnz(), 3);
    EXPECT_EQ(s.entries().front().index, (Index3{0, 0, 0}));
    EXPECT_TRUE(s.contains({1, 1, 0}));
    EXPECT_FALSE(s.contains({1, 0, 0}));
    EXPECT_DOUBLE_EQ(s.squared_norm(), 17.0);
    const Tensor3 dense = s.densify();
    EXPECT_EQ(dense(2, 1, 1), 4.0);
    EXPECT_EQ(SparseTensor3::sparsify(dense).nnz(), 2);
    EXPECT_THROW(SparseTensor3(d, {{{0, 0, 0}, 1.0}, {{0, 0, 0}, 2.0}}), InvalidArgument);
    EXPECT_THROW(SparseTensor3(d, {{{3, 0, 0}, 1.0}}), InvalidArgument);
}

TEST(Metrics, SseMseNnzFit) {
    Tensor3 x(Dims(2, 1, 1), {1.0, 2.0});
    Tensor3 y(Dims(2, 1, 1), {1.0, 0.0});
    EXPECT_DOUBLE_EQ(sse(x, y), 4.0);
    EXPECT_DOUBLE_EQ(mse(x, y), 2.0);
    const std::vector<Index3> miss{{1, 0, 0}};
    const Mask m = Mask::from_missing(x.dims(), miss);
    EXPECT_DOUBLE_EQ(sse(x, y, &m), 0.0);
    const Mask all_missing(x.dims(), {0, 0});
    EXPECT_THROW((void)mse(x, y, &all_missing), InvalidArgument);
    EXPECT_EQ(nnz(y), 1);
    EXPECT_EQ(nnz(x, 1.5), 1);
    EXPECT_THROW((void)nnz(x, -1.0), InvalidArgument);
    EXPECT_DOUBLE_EQ(fit(x, x), 1.0);
    EXPECT_NEAR(fit(x, y), 1.0 - 2.0 / std::sqrt(5.0), 1e-15);
    EXPECT_THROW((void)fit(Tensor3(Dims(1, 1, 1)), y), InvalidArgument);
}
