#pragma once

// Dense and coordinate-format 3-way tensors plus the multilinear kernels
// (unfolding, Khatri-Rao, reconstruction, MTTKRP, error metrics).
//
// Storage convention: a dense tensor is column-major, X(i,j,t) lives at
// i + I*(j + J*t). The mode-m unfolding has one column per index of mode m;
// within a column the remaining two modes are vectorized with the earlier
// mode varying fastest. With this convention, for the rank-k model
// X = [[F1, F2, F3]],
//
//     unfold(X, m)^T == Fm * khatri_rao(Fq, Fp)^T     (p < q, p,q != m)
//
// which is the pairing the solver relies on.

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace mdtd {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rows = mode length (or atom count), columns = rank.
using FactorMatrix = Matrix;

struct Dims {
    std::array<Index, 3> extent{0, 0, 0};

    Dims() = default;
    Dims(Index i, Index j, Index t) : extent{i, j, t} {}

    [[nodiscard]] Index operator[](std::size_t mode) const { return extent[mode]; }
    [[nodiscard]] Index count() const { return extent[0] * extent[1] * extent[2]; }
    [[nodiscard]] bool valid() const { return extent[0] > 0 && extent[1] > 0 && extent[2] > 0; }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Zero-based cell coordinate.
struct Index3 {
    Index i = 0;
    Index j = 0;
    Index t = 0;

    friend auto operator<=>(const Index3&, const Index3&) = default;
};

[[nodiscard]] inline Index linear_index(const Dims& d, const Index3& c) {
    return c.i + d[0] * (c.j + d[1] * c.t);
}

[[nodiscard]] inline bool in_range(const Dims& d, const Index3& c) {
    return c.i >= 0 && c.i < d[0] && c.j >= 0 && c.j < d[1] && c.t >= 0 && c.t < d[2];
}

class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims dims);
    Tensor3(Dims dims, std::vector<double> values);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(data_.size()); }

    double& operator()(Index i, Index j, Index t) { return data_[i + dims_[0] * (j + dims_[1] * t)]; }
    double operator()(Index i, Index j, Index t) const {
        return data_[i + dims_[0] * (j + dims_[1] * t)];
    }
    double& operator[](Index linear) { return data_[linear]; }
    double operator[](Index linear) const { return data_[linear]; }

    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    /// I x (J*T) view; equal to unfold(*this, 1)^T.
    [[nodiscard]] Eigen::Map<const Matrix> as_matrix() const {
        return {data_.data(), dims_[0], dims_[1] * dims_[2]};
    }

    [[nodiscard]] double squared_norm() const;

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    Dims dims_;
    std::vector<double> data_;
};

/// Binary observation mask: 1 = observed, 0 = missing.
class Mask {
public:
    Mask() = default;
    Mask(Dims dims, std::vector<std::uint8_t> observed);

    static Mask all_observed(Dims dims);
    /// Throws on out-of-range or repeated coordinates.
    static Mask from_missing(Dims dims, std::span<const Index3> missing);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] bool observed(Index linear) const { return cells_[linear] != 0; }
    [[nodiscard]] bool observed(const Index3& c) const { return cells_[linear_index(dims_, c)] != 0; }
    [[nodiscard]] Index observed_count() const;
    [[nodiscard]] Index missing_count() const { return dims_.count() - observed_count(); }
    /// Missing cells in linear (i fastest) order.
    [[nodiscard]] std::vector<Index3> missing_indices() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    Dims dims_;
    std::vector<std::uint8_t> cells_;
};

struct SparseEntry {
    Index3 index;
    double value = 0.0;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Coordinate-format tensor. Entries are kept sorted by linear index and
/// never repeat a coordinate. Explicitly stored zeros are allowed (an
/// imputed cell may evaluate to exactly zero); `sparsify` never emits them.
class SparseTensor3 {
public:
    SparseTensor3() = default;
    SparseTensor3(Dims dims, std::vector<SparseEntry> entries);

    static SparseTensor3 sparsify(const Tensor3& dense);

    [[nodiscard]] Tensor3 densify() const;
    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::span<const SparseEntry> entries() const noexcept { return entries_; }
    [[nodiscard]] Index nnz() const noexcept { return static_cast<Index>(entries_.size()); }
    [[nodiscard]] bool contains(const Index3& c) const;
    [[nodiscard]] double squared_norm() const;

    friend bool operator==(const SparseTensor3&, const SparseTensor3&) = default;

private:
    Dims dims_;
    std::vector<SparseEntry> entries_;
};

/// Mode is 1, 2 or 3. Mode-1 result is (J*T) x I.
[[nodiscard]] Matrix unfold(const Tensor3& x, int mode);
[[nodiscard]] Tensor3 fold(const Matrix& m, int mode, const Dims& dims);

/// Column r is kron(b.col(r), a.col(r)); a's row index varies fastest.
[[nodiscard]] Matrix khatri_rao(const Matrix& b, const Matrix& a);

/// (B^T B) .* (A^T A) without forming the Khatri-Rao product.
[[nodiscard]] Matrix kr_gram(const Matrix& a, const Matrix& b);

/// X(i,j,t) = sum_r s_r a(i,r) b(j,r) c(t,r).
[[nodiscard]] Tensor3 reconstruct(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& s);

/// Same values as `reconstruct`, bit for bit, evaluated only at `idx`.
[[nodiscard]] std::vector<double> reconstruct_at(const Matrix& a, const Matrix& b, const Matrix& c,
                                                 const Vector& s, std::span<const Index3> idx);

/// Matricized tensor times Khatri-Rao product for `mode` (1..3):
/// unfold(x, mode)^T * khatri_rao(second, first), where `first` / `second`
/// are the factors of the remaining modes in ascending order.
[[nodiscard]] Matrix mttkrp(const Tensor3& x, int mode, const Matrix& first, const Matrix& second);
[[nodiscard]] Matrix mttkrp(const SparseTensor3& x, int mode, const Matrix& first,
                            const Matrix& second);

[[nodiscard]] double sse(const Tensor3& x, const Tensor3& y, const Mask* mask = nullptr);
/// Throws InvalidArgument when the mask selects no cells.
[[nodiscard]] double mse(const Tensor3& x, const Tensor3& y, const Mask* mask = nullptr);
[[nodiscard]] Index nnz(const Matrix& m, double tol = 1e-12);
[[nodiscard]] Index nnz(const Tensor3& x, double tol = 1e-12);
/// 1 - ||x - recon||_F / ||x||_F. Throws InvalidArgument when ||x|| = 0.
[[nodiscard]] double fit(const Tensor3& x, const Tensor3& recon);

/// Zero-based remaining modes for a zero-based mode, ascending.
[[nodiscard]] constexpr std::array<int, 2> other_modes(int mode0) {
    switch (mode0) {
        case 0: return {1, 2};
        case 1: return {0, 2};
        default: return {0, 1};
    }
}

}  // namespace mdtd
