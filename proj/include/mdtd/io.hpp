#pragma once

// Text formats.
//
// Tensor:  `dims I J T` header, then one `i j t value` line per entry
//          (1-based, whitespace separated). A dense tensor lists every cell.
// Indices: `dims I J T` header, then one `i j t` line per cell (1-based);
//          used for missing-value masks and sparse missing-index sets.
// Matrix:  `matrix R C` header, then R lines of C values.
//
// Blank lines and lines starting with '#' are ignored.

#include "mdtd/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mdtd::io {

[[nodiscard]] SparseTensor3 read_tensor(std::istream& in);
[[nodiscard]] SparseTensor3 read_tensor(const std::filesystem::path& path);
/// Unlisted cells are zero.
[[nodiscard]] Tensor3 read_dense_tensor(const std::filesystem::path& path);

void write_tensor(std::ostream& out, const Tensor3& x);
void write_tensor(std::ostream& out, const SparseTensor3& x);
void write_tensor(const std::filesystem::path& path, const Tensor3& x);
void write_tensor(const std::filesystem::path& path, const SparseTensor3& x);

struct IndexList {
    Dims dims;
    std::vector<Index3> cells;
};

[[nodiscard]] IndexList read_index_list(std::istream& in);
[[nodiscard]] IndexList read_index_list(const std::filesystem::path& path);
void write_index_list(std::ostream& out, const IndexList& list);
void write_index_list(const std::filesystem::path& path, const IndexList& list);

[[nodiscard]] Matrix read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Shortest representation that parses back to the same double.
[[nodiscard]] std::string format_double(double v);

}  // namespace mdtd::io
