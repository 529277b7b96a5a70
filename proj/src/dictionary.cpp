#include "mdtd/dictionary.hpp"

#include "mdtd/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace mdtd {

Graph::Graph(Index nodes, std::vector<Edge> edges) : nodes_(nodes), edges_(std::move(edges)) {
    if (nodes_ < 1) throw InvalidArgument("graph needs at least one node");
    std::set<std::pair<Index, Index>> seen;
    for (const auto& e : edges_) {
        if (e.u < 0 || e.u >= nodes_ || e.v < 0 || e.v >= nodes_) throw InvalidArgument("edge endpoint out of range");
        if (e.u == e.v) throw InvalidArgument("self-loops are not allowed");
        if (!(e.weight > 0) || !std::isfinite(e.weight)) throw InvalidArgument("edge weights must be positive");
        if (!seen.insert(std::minmax(e.u, e.v)).second) {
            throw InvalidArgument("repeated edge " + std::to_string(e.u + 1) + "-" + std::to_string(e.v + 1));
        }
    }
}

Matrix Graph::adjacency() const {
    Matrix w = Matrix::Zero(nodes_, nodes_);
    for (const auto& e : edges_) {
        w(e.u, e.v) = e.weight;
        w(e.v, e.u) = e.weight;
    }
    return w;
}

Matrix Graph::laplacian() const {
    Matrix w = adjacency();
    Matrix l = -w;
    l.diagonal() = w.rowwise().sum();
    return l;
}

Matrix Graph::normalized_laplacian() const {
    Matrix w = adjacency();
    Vector deg = w.rowwise().sum();
    Vector inv_sqrt = deg.unaryExpr([](double d) { return d > 0 ? 1.0 / std::sqrt(d) : 0.0; });
    Matrix l = -(inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal());
    for (Index n = 0; n < nodes_; ++n) l(n, n) = deg(n) > 0 ? 1.0 : 0.0;
    return l;
}

Graph read_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph file " + path.string());
    std::string line;
    Index nodes = -1;
    std::vector<Edge> edges;
    long number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first) || first.front() == '#') continue;
        if (nodes < 0) {
            if (first != "nodes" || !(ls >> nodes)) {
                throw ParseError(path.string() + ":" + std::to_string(number) + ": expected 'nodes n' header");
            }
            continue;
        }
        Edge e;
        double w = 1.0;
        Index u = 0, v = 0;
        std::istringstream es(line);
        if (!(es >> u >> v >> w)) throw ParseError(path.string() + ":" + std::to_string(number) + ": expected 'u v w'");
        e.u = u - 1;
        e.v = v - 1;
        e.weight = w;
        edges.push_back(e);
    }
    if (nodes < 0) throw ParseError(path.string() + ": missing 'nodes n' header");
    return Graph(nodes, std::move(edges));
}

void write_graph(const std::filesystem::path& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "nodes " << g.nodes() << '\n';
    for (const auto& e : g.edges()) out << e.u + 1 << ' ' << e.v + 1 << ' ' << e.weight << '\n';
}

namespace {

struct SortedEigen {
    Vector values;
    Matrix vectors;
};

void fix_sign(Eigen::Ref<Vector> v) {
    Index arg = 0;
    for (Index n = 1; n < v.size(); ++n)
        if (std::abs(v(n)) > std::abs(v(arg))) arg = n;
    if (v(arg) < 0) v = -v;
}

SortedEigen laplacian_eigen(const Graph& g, LaplacianKind kind) {
    const Index n = g.nodes();
    if (g.edges().empty()) return {Vector::Zero(n), Matrix::Identity(n, n)};

    const Matrix l = kind == LaplacianKind::combinatorial ? g.laplacian() : g.normalized_laplacian();
    Eigen::SelfAdjointEigenSolver<Matrix> es(l);
    if (es.info() != Eigen::Success) throw NumericalError("Laplacian eigendecomposition failed");
    Vector values = es.eigenvalues();
    Matrix vectors = es.eigenvectors();
    for (Index c = 0; c < n; ++c) fix_sign(vectors.col(c));

    // Within clusters of numerically equal eigenvalues, order by the
    // sign-fixed eigenvectors (lexicographically, descending).
    const double tol = 1e-9 * std::max(1.0, values.cwiseAbs().maxCoeff());
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    for (Index start = 0; start < n;) {
        Index end = start + 1;
        while (end < n && values(end) - values(start) <= tol) ++end;
        std::sort(order.begin() + start, order.begin() + end, [&](Index a, Index b) {
            for (Index r = 0; r < n; ++r) {
                if (vectors(r, a) != vectors(r, b)) return vectors(r, a) > vectors(r, b);
            }
            return a < b;
        });
        start = end;
    }
    SortedEigen out{Vector(n), Matrix(n, n)};
    for (Index c = 0; c < n; ++c) {
        out.values(c) = values(order[c]);
        out.vectors.col(c) = vectors.col(order[c]);
    }
    return out;
}

Index resolve_atoms(const Graph& g, std::optional<Index> num_atoms) {
    const Index atoms = num_atoms.value_or(g.nodes());
    if (atoms < 1 || atoms > g.nodes()) {
        throw InvalidArgument("GFT atom count must be in [1, " + std::to_string(g.nodes()) + "], got " +
                              std::to_string(atoms));
    }
    return atoms;
}

}  // namespace

Dictionary gft_dictionary(const Graph& g, std::optional<Index> num_atoms, LaplacianKind laplacian) {
    const Index atoms = resolve_atoms(g, num_atoms);
    SortedEigen eig = laplacian_eigen(g, laplacian);
    Dictionary d;
    d.atoms = eig.vectors.leftCols(atoms);
    d.kind = DictionaryKind::gft;
    d.orthonormal = true;
    return d;
}

Vector gft_eigenvalues(const Graph& g, std::optional<Index> num_atoms, LaplacianKind laplacian) {
    const Index atoms = resolve_atoms(g, num_atoms);
    return laplacian_eigen(g, laplacian).values.head(atoms);
}

int euler_phi(int q) {
    if (q < 1) throw InvalidArgument("euler_phi: q must be >= 1");
    int count = 0;
    for (int a = 1; a <= q; ++a)
        if (std::gcd(a, q) == 1) ++count;
    return count;
}

double ramanujan_sum(int q, Index n) {
    if (q < 1) throw InvalidArgument("ramanujan_sum: q must be >= 1");
    // c_q is integer valued and q-periodic; reduce n first so equal residues
    // give identical doubles.
    const Index m = ((n % q) + q) % q;
    double acc = 0.0;
    for (int a = 1; a <= q; ++a)
        if (std::gcd(a, q) == 1) acc += std::cos(2.0 * std::numbers::pi * a * static_cast<double>(m) / q);
    return std::round(acc);
}

Dictionary ramanujan_dictionary(Index t_len, int max_period) {
    if (max_period < 1 || t_len < max_period) {
        throw InvalidArgument("ramanujan_dictionary requires t_len >= max_period >= 1");
    }
    Index total = 0;
    for (int q = 1; q <= max_period; ++q) total += euler_phi(q);
    Dictionary d;
    d.atoms.resize(t_len, total);
    Index col = 0;
    for (int q = 1; q <= max_period; ++q) {
        for (int shift = 0; shift < euler_phi(q); ++shift, ++col) {
            for (Index n = 0; n < t_len; ++n) d.atoms(n, col) = ramanujan_sum(q, n - shift);
            d.atoms.col(col).normalize();
        }
    }
    d.kind = DictionaryKind::ramanujan;
    d.orthonormal = false;
    return d;
}

Matrix bspline_basis(Index t_len, int num_knots, int degree) {
    if (t_len < 2 || num_knots < 2 || degree < 1) {
        throw InvalidArgument("spline dictionary requires t_len >= 2, num_knots >= 2, degree >= 1");
    }
    std::vector<double> knots;
    const double lo = 1.0;
    const double hi = static_cast<double>(t_len);
    for (int c = 0; c < degree; ++c) knots.push_back(lo);
    for (int m = 0; m < num_knots; ++m) knots.push_back(lo + (hi - lo) * m / (num_knots - 1));
    for (int c = 0; c < degree; ++c) knots.push_back(hi);

    const Index basis = num_knots + degree - 1;
    Matrix out = Matrix::Zero(t_len, basis);
    std::vector<double> n(knots.size());
    for (Index row = 0; row < t_len; ++row) {
        const double x = 1.0 + static_cast<double>(row);
        // Degree-0 indicator functions on half-open spans; the right end
        // belongs to the last non-empty span.
        std::fill(n.begin(), n.end(), 0.0);
        std::size_t span = static_cast<std::size_t>(degree) + static_cast<std::size_t>(num_knots) - 2;
        if (x < hi) {
            for (std::size_t s = 0; s + 1 < knots.size(); ++s)
                if (knots[s] <= x && x < knots[s + 1]) span = s;
        }
        n[span] = 1.0;
        for (int p = 1; p <= degree; ++p) {
            for (std::size_t s = 0; s + p + 1 < knots.size(); ++s) {
                double v = 0.0;
                const double left = knots[s + p] - knots[s];
                const double right = knots[s + p + 1] - knots[s + 1];
                if (left > 0) v += (x - knots[s]) / left * n[s];
                if (right > 0) v += (knots[s + p + 1] - x) / right * n[s + 1];
                n[s] = v;
            }
        }
        for (Index b = 0; b < basis; ++b) out(row, b) = n[static_cast<std::size_t>(b)];
    }
    return out;
}

Dictionary spline_dictionary(Index t_len, int num_knots, int degree) {
    Dictionary d;
    d.atoms = bspline_basis(t_len, num_knots, degree);
    d.atoms.colwise().normalize();
    d.kind = DictionaryKind::spline;
    d.orthonormal = false;
    return d;
}

Dictionary identity_dictionary(Index n) {
    if (n < 1) throw InvalidArgument("identity dictionary size must be >= 1");
    Dictionary d;
    d.atoms = Matrix::Identity(n, n);
    d.kind = DictionaryKind::identity;
    d.orthonormal = true;
    return d;
}

Dictionary precompute_gram_evd(Dictionary d) {
    if (d.orthonormal) return d;
    const Matrix gram = d.atoms.transpose() * d.atoms;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition of dictionary failed");
    d.gram_evd = GramEvd{es.eigenvectors(), es.eigenvalues().cwiseMax(0.0)};
    return d;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

long parse_int(const std::string& tok, const std::string& spec) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError("dictionary spec '" + spec + "': expected integer, got '" + tok + "'");
    }
    return v;
}

}  // namespace

Dictionary build_dictionary(const std::string& spec, Index length) {
    const auto parts = split(spec, ':');
    if (parts.empty()) throw ParseError("empty dictionary spec");
    const std::string& kind = parts[0];
    Dictionary d;
    if (kind == "id" && parts.size() == 1) {
        d = identity_dictionary(length);
    } else if ((kind == "gft" || kind == "gftn") && (parts.size() == 2 || parts.size() == 3)) {
        Graph g = read_graph(parts[1]);
        if (g.nodes() != length) {
            throw ShapeError("dictionary spec '" + spec + "': graph has " + std::to_string(g.nodes()) +
                             " nodes but the mode has length " + std::to_string(length));
        }
        std::optional<Index> atoms;
        if (parts.size() == 3) atoms = parse_int(parts[2], spec);
        d = gft_dictionary(g, atoms, kind == "gft" ? LaplacianKind::combinatorial : LaplacianKind::normalized);
    } else if (kind == "ram" && parts.size() == 2) {
        d = ramanujan_dictionary(length, static_cast<int>(parse_int(parts[1], spec)));
    } else if (kind == "spline" && (parts.size() == 2 || parts.size() == 3)) {
        const int degree = parts.size() == 3 ? static_cast<int>(parse_int(parts[2], spec)) : 3;
        d = spline_dictionary(length, static_cast<int>(parse_int(parts[1], spec)), degree);
    } else {
        throw ParseError("unrecognized dictionary spec '" + spec +
                         "' (expected gft:<file>[:atoms], gftn:<file>[:atoms], ram:<p>, spline:<k>[:deg], id)");
    }
    d.spec = spec;
    return precompute_gram_evd(std::move(d));
}

}  // namespace mdtd
