#include "mdtd/tensor.hpp"

#include "mdtd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdtd {

namespace {

int checked_mode(int mode) {
    if (mode < 1 || mode > 3) {
        throw InvalidArgument("mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
    return mode - 1;
}

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
    if (!(a == b)) {
        throw ShapeError(std::string(what) + ": tensor dimensions differ");
    }
}

void require_rank(const Matrix& a, const Matrix& b, const char* what) {
    if (a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": factor column counts differ (" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
    }
}

Index coord(const Index3& c, int mode0) {
    return mode0 == 0 ? c.i : (mode0 == 1 ? c.j : c.t);
}

}  // namespace

Tensor3::Tensor3(Dims dims) : dims_(dims) {
    if (!dims.valid()) throw InvalidArgument("tensor dimensions must be positive");
    data_.assign(static_cast<std::size_t>(dims.count()), 0.0);
}

Tensor3::Tensor3(Dims dims, std::vector<double> values) : dims_(dims), data_(std::move(values)) {
    if (!dims.valid()) throw InvalidArgument("tensor dimensions must be positive");
    if (static_cast<Index>(data_.size()) != dims.count()) {
        throw ShapeError("value count " + std::to_string(data_.size()) + " != I*J*T = " +
                         std::to_string(dims.count()));
    }
}

double Tensor3::squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
}

Mask::Mask(Dims dims, std::vector<std::uint8_t> observed) : dims_(dims), cells_(std::move(observed)) {
    if (static_cast<Index>(cells_.size()) != dims.count()) {
        throw ShapeError("mask cell count does not match dimensions");
    }
    for (auto c : cells_) {
        if (c > 1) throw InvalidArgument("mask cells must be 0 or 1");
    }
}

Mask Mask::all_observed(Dims dims) {
    return Mask(dims, std::vector<std::uint8_t>(static_cast<std::size_t>(dims.count()), 1));
}

Mask Mask::from_missing(Dims dims, std::span<const Index3> missing) {
    Mask m = all_observed(dims);
    for (const auto& c : missing) {
        if (!in_range(dims, c)) throw InvalidArgument("missing index out of range");
        auto& cell = m.cells_[linear_index(dims, c)];
        if (cell == 0) throw InvalidArgument("repeated missing index");
        cell = 0;
    }
    return m;
}

Index Mask::observed_count() const {
    return static_cast<Index>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::vector<Index3> Mask::missing_indices() const {
    std::vector<Index3> out;
    for (Index t = 0; t < dims_[2]; ++t)
        for (Index j = 0; j < dims_[1]; ++j)
            for (Index i = 0; i < dims_[0]; ++i)
                if (!observed(Index3{i, j, t})) out.push_back({i, j, t});
    return out;
}

SparseTensor3::SparseTensor3(Dims dims, std::vector<SparseEntry> entries)
    : dims_(dims), entries_(std::move(entries)) {
    if (!dims.valid()) throw InvalidArgument("tensor dimensions must be positive");
    for (const auto& e : entries_) {
        if (!in_range(dims_, e.index)) throw InvalidArgument("sparse entry index out of range");
    }
    std::sort(entries_.begin(), entries_.end(), [&](const SparseEntry& a, const SparseEntry& b) {
        return linear_index(dims_, a.index) < linear_index(dims_, b.index);
    });
    auto dup = std::adjacent_find(entries_.begin(), entries_.end(),
                                  [](const SparseEntry& a, const SparseEntry& b) { return a.index == b.index; });
    if (dup != entries_.end()) {
        throw InvalidArgument("duplicate sparse entry at (" + std::to_string(dup->index.i + 1) + "," +
                              std::to_string(dup->index.j + 1) + "," + std::to_string(dup->index.t + 1) + ")");
    }
}

SparseTensor3 SparseTensor3::sparsify(const Tensor3& dense) {
    const Dims& d = dense.dims();
    std::vector<SparseEntry> out;
    for (Index t = 0; t < d[2]; ++t)
        for (Index j = 0; j < d[1]; ++j)
            for (Index i = 0; i < d[0]; ++i)
                if (double v = dense(i, j, t); v != 0.0) out.push_back({{i, j, t}, v});
    return SparseTensor3(d, std::move(out));
}

Tensor3 SparseTensor3::densify() const {
    Tensor3 out(dims_);
    for (const auto& e : entries_) out(e.index.i, e.index.j, e.index.t) = e.value;
    return out;
}

bool SparseTensor3::contains(const Index3& c) const {
    const Index key = linear_index(dims_, c);
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, [&](const SparseEntry& e, Index k) {
        return linear_index(dims_, e.index) < k;
    });
    return it != entries_.end() && it->index == c;
}

double SparseTensor3::squared_norm() const {
    double acc = 0.0;
    for (const auto& e : entries_) acc += e.value * e.value;
    return acc;
}

Matrix unfold(const Tensor3& x, int mode) {
    const int m = checked_mode(mode);
    const Dims& d = x.dims();
    const auto [p, q] = other_modes(m);
    Matrix out(d[p] * d[q], d[m]);
    for (Index t = 0; t < d[2]; ++t)
        for (Index j = 0; j < d[1]; ++j)
            for (Index i = 0; i < d[0]; ++i) {
                const std::array<Index, 3> c{i, j, t};
                out(c[p] + d[p] * c[q], c[m]) = x(i, j, t);
            }
    return out;
}

Tensor3 fold(const Matrix& mat, int mode, const Dims& dims) {
    const int m = checked_mode(mode);
    if (!dims.valid()) throw InvalidArgument("tensor dimensions must be positive");
    const auto [p, q] = other_modes(m);
    if (mat.rows() != dims[p] * dims[q] || mat.cols() != dims[m]) {
        throw ShapeError("fold: matrix is " + std::to_string(mat.rows()) + "x" + std::to_string(mat.cols()) +
                         ", expected " + std::to_string(dims[p] * dims[q]) + "x" + std::to_string(dims[m]));
    }
    Tensor3 out(dims);
    for (Index t = 0; t < dims[2]; ++t)
        for (Index j = 0; j < dims[1]; ++j)
            for (Index i = 0; i < dims[0]; ++i) {
                const std::array<Index, 3> c{i, j, t};
                out(i, j, t) = mat(c[p] + dims[p] * c[q], c[m]);
            }
    return out;
}

Matrix khatri_rao(const Matrix& b, const Matrix& a) {
    require_rank(a, b, "khatri_rao");
    Matrix out(a.rows() * b.rows(), a.cols());
    for (Index r = 0; r < a.cols(); ++r)
        for (Index jb = 0; jb < b.rows(); ++jb)
            out.col(r).segment(jb * a.rows(), a.rows()) = b(jb, r) * a.col(r);
    return out;
}

Matrix kr_gram(const Matrix& a, const Matrix& b) {
    require_rank(a, b, "kr_gram");
    return (b.transpose() * b).cwiseProduct(a.transpose() * a);
}

namespace {

void check_model(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& s) {
    require_rank(a, b, "reconstruct");
    require_rank(a, c, "reconstruct");
    if (s.size() != a.cols()) throw ShapeError("reconstruct: scale vector length != rank");
}

}  // namespace

// Per-cell summation order (r ascending, weight = s_r*b*c then times a) is
// shared with reconstruct_at so both return identical doubles.
Tensor3 reconstruct(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& s) {
    check_model(a, b, c, s);
    const Dims dims(a.rows(), b.rows(), c.rows());
    Tensor3 out(dims);
    const Index k = a.cols();
    std::vector<double> w(static_cast<std::size_t>(k));
    double* data = out.values().data();
    for (Index t = 0; t < dims[2]; ++t)
        for (Index j = 0; j < dims[1]; ++j) {
            for (Index r = 0; r < k; ++r) w[r] = s(r) * b(j, r) * c(t, r);
            double* col = data + dims[0] * (j + dims[1] * t);
            for (Index r = 0; r < k; ++r) {
                const double* ar = a.col(r).data();
                const double wr = w[r];
                for (Index i = 0; i < dims[0]; ++i) col[i] += ar[i] * wr;
            }
        }
    return out;
}

std::vector<double> reconstruct_at(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& s,
                                   std::span<const Index3> idx) {
    check_model(a, b, c, s);
    const Dims dims(a.rows(), b.rows(), c.rows());
    std::vector<double> out;
    out.reserve(idx.size());
    for (const auto& x : idx) {
        if (!in_range(dims, x)) throw InvalidArgument("reconstruct_at: index out of range");
        double v = 0.0;
        for (Index r = 0; r < a.cols(); ++r) v += a(x.i, r) * (s(r) * b(x.j, r) * c(x.t, r));
        out.push_back(v);
    }
    return out;
}

Matrix mttkrp(const Tensor3& x, int mode, const Matrix& first, const Matrix& second) {
    const int m = checked_mode(mode);
    require_rank(first, second, "mttkrp");
    const Dims& d = x.dims();
    const auto [p, q] = other_modes(m);
    if (first.rows() != d[p] || second.rows() != d[q]) throw ShapeError("mttkrp: factor rows do not match tensor");
    const Index k = first.cols();
    switch (m) {
        case 0:
            return x.as_matrix() * khatri_rao(second, first);
        case 2: {
            Eigen::Map<const Matrix> x3(x.values().data(), d[0] * d[1], d[2]);
            return x3.transpose() * khatri_rao(second, first);
        }
        default: {
            // Slice-wise: sum_t X(:,:,t)^T * (A .* c(t,:)).
            Matrix out = Matrix::Zero(d[1], k);
            Matrix scaled(d[0], k);
            for (Index t = 0; t < d[2]; ++t) {
                Eigen::Map<const Matrix> slice(x.values().data() + d[0] * d[1] * t, d[0], d[1]);
                scaled = first * second.row(t).asDiagonal();
                out.noalias() += slice.transpose() * scaled;
            }
            return out;
        }
    }
}

Matrix mttkrp(const SparseTensor3& x, int mode, const Matrix& first, const Matrix& second) {
    const int m = checked_mode(mode);
    require_rank(first, second, "mttkrp");
    const Dims& d = x.dims();
    const auto [p, q] = other_modes(m);
    if (first.rows() != d[p] || second.rows() != d[q]) throw ShapeError("mttkrp: factor rows do not match tensor");
    Matrix out = Matrix::Zero(d[m], first.cols());
    for (const auto& e : x.entries()) {
        const Index row = coord(e.index, m);
        const Index rp = coord(e.index, p);
        const Index rq = coord(e.index, q);
        for (Index r = 0; r < first.cols(); ++r) out(row, r) += e.value * first(rp, r) * second(rq, r);
    }
    return out;
}

double sse(const Tensor3& x, const Tensor3& y, const Mask* mask) {
    require_same_dims(x.dims(), y.dims(), "sse");
    if (mask) require_same_dims(x.dims(), mask->dims(), "sse mask");
    double acc = 0.0;
    for (Index n = 0; n < x.size(); ++n) {
        if (mask && !mask->observed(n)) continue;
        const double diff = x[n] - y[n];
        acc += diff * diff;
    }
    return acc;
}

double mse(const Tensor3& x, const Tensor3& y, const Mask* mask) {
    const double total = sse(x, y, mask);
    const Index cells = mask ? mask->observed_count() : x.size();
    if (cells == 0) throw InvalidArgument("mse: mask selects no cells");
    return total / static_cast<double>(cells);
}

Index nnz(const Matrix& m, double tol) {
    if (tol < 0) throw InvalidArgument("nnz tolerance must be >= 0");
    return (m.array().abs() > tol).count();
}

Index nnz(const Tensor3& x, double tol) {
    if (tol < 0) throw InvalidArgument("nnz tolerance must be >= 0");
    return std::count_if(x.values().begin(), x.values().end(), [tol](double v) { return std::abs(v) > tol; });
}

double fit(const Tensor3& x, const Tensor3& recon) {
    const double norm_x = std::sqrt(x.squared_norm());
    if (norm_x == 0.0) throw InvalidArgument("fit: input tensor has zero norm");
    return 1.0 - std::sqrt(sse(x, recon)) / norm_x;
}

}  // namespace mdtd
