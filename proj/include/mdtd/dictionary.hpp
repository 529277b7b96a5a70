#pragma once

// Fixed analytical dictionaries: graph Fourier (Laplacian eigenvectors),
// Ramanujan periodic, B-spline and identity, plus the Gram eigendecomposition
// used by the non-orthonormal Y update.

#include "mdtd/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mdtd {

struct Edge {
    Index u = 0;  // zero-based
    Index v = 0;
    double weight = 1.0;
};

/// Weighted undirected graph without self-loops or repeated edges.
class Graph {
public:
    Graph() = default;
    /// Validates indices, weights (> 0), self-loops and duplicates.
    Graph(Index nodes, std::vector<Edge> edges);

    [[nodiscard]] Index nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }

    [[nodiscard]] Matrix adjacency() const;
    /// D - W.
    [[nodiscard]] Matrix laplacian() const;
    /// I - D^{-1/2} W D^{-1/2}; isolated nodes get a zero row.
    [[nodiscard]] Matrix normalized_laplacian() const;

private:
    Index nodes_ = 0;
    std::vector<Edge> edges_;
};

/// Edge-list text: `nodes n` header, then `u v w` lines with 1-based nodes.
[[nodiscard]] Graph read_graph(const std::filesystem::path& path);
void write_graph(const std::filesystem::path& path, const Graph& g);

enum class DictionaryKind { gft, ramanujan, spline, identity };

enum class LaplacianKind { combinatorial, normalized };

/// Phi^T Phi = vectors * diag(values) * vectors^T.
struct GramEvd {
    Matrix vectors;
    Vector values;
};

struct Dictionary {
    Matrix atoms;  // mode length x atom count
    DictionaryKind kind = DictionaryKind::identity;
    bool orthonormal = false;
    std::optional<GramEvd> gram_evd;
    std::string spec;  // textual spec this dictionary was built from, if any

    [[nodiscard]] Index length() const { return atoms.rows(); }
    [[nodiscard]] Index atom_count() const { return atoms.cols(); }
};

/// Eigenvectors of the graph Laplacian for the `num_atoms` smallest
/// eigenvalues (ascending). Each eigenvector has its largest-magnitude entry
/// positive; within numerically tied eigenvalues vectors are ordered
/// lexicographically. An edgeless graph yields the identity basis.
[[nodiscard]] Dictionary gft_dictionary(const Graph& g, std::optional<Index> num_atoms = std::nullopt,
                                        LaplacianKind laplacian = LaplacianKind::combinatorial);

/// Laplacian eigenvalues matching the columns of gft_dictionary.
[[nodiscard]] Vector gft_eigenvalues(const Graph& g, std::optional<Index> num_atoms = std::nullopt,
                                     LaplacianKind laplacian = LaplacianKind::combinatorial);

/// Ramanujan sum c_q(n) = sum over 1<=a<=q, gcd(a,q)=1 of cos(2 pi a n / q).
[[nodiscard]] double ramanujan_sum(int q, Index n);
[[nodiscard]] int euler_phi(int q);

/// For each period q = 1..max_period, the phi(q) circular shifts of c_q(n)
/// over n = 0..t_len-1, unit-normalized.
[[nodiscard]] Dictionary ramanujan_dictionary(Index t_len, int max_period);

/// Unnormalized B-spline basis (t_len x (num_knots + degree - 1)) on evenly
/// spaced breakpoints over [1, t_len] with a clamped knot vector, evaluated
/// at t = 1..t_len. Rows sum to one.
[[nodiscard]] Matrix bspline_basis(Index t_len, int num_knots, int degree = 3);
/// bspline_basis with unit-norm columns.
[[nodiscard]] Dictionary spline_dictionary(Index t_len, int num_knots, int degree = 3);

[[nodiscard]] Dictionary identity_dictionary(Index n);

/// No-op for orthonormal dictionaries; otherwise attaches the symmetric EVD
/// of Phi^T Phi with eigenvalues clamped at zero.
[[nodiscard]] Dictionary precompute_gram_evd(Dictionary d);

/// Builds a dictionary from a spec string for a mode of length `length`:
/// `gft:<graphfile>[:atoms]`, `gftn:<graphfile>[:atoms]` (normalized
/// Laplacian), `ram:<max_period>`, `spline:<knots>[:degree]`, `id`.
/// The Gram EVD is precomputed.
[[nodiscard]] Dictionary build_dictionary(const std::string& spec, Index length);

}  // namespace mdtd
