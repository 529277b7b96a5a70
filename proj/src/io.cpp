#include "mdtd/io.hpp"

#include "mdtd/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace mdtd::io {

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-blank, non-comment line split into tokens; false at EOF.
    bool next(std::vector<std::string_view>& tokens) {
        while (std::getline(in_, line_)) {
            ++number_;
            tokens.clear();
            std::string_view rest(line_);
            while (!rest.empty()) {
                const auto start = rest.find_first_not_of(" \t\r");
                if (start == std::string_view::npos) break;
                rest.remove_prefix(start);
                const auto end = rest.find_first_of(" \t\r");
                tokens.push_back(rest.substr(0, end));
                if (end == std::string_view::npos) break;
                rest.remove_prefix(end);
            }
            if (tokens.empty() || tokens.front().front() == '#') continue;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("line " + std::to_string(number_) + ": " + msg);
    }

    Index integer(std::string_view tok) const {
        Index v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("expected integer, got '" + std::string(tok) + "'");
        return v;
    }

    double real(std::string_view tok) const {
        double v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("expected number, got '" + std::string(tok) + "'");
        return v;
    }

private:
    std::istream& in_;
    std::string line_;
    long number_ = 0;
};

Dims read_dims_header(LineReader& reader, std::vector<std::string_view>& tok) {
    if (!reader.next(tok)) throw ParseError("empty input: missing 'dims I J T' header");
    if (tok.size() != 4 || tok[0] != "dims") reader.fail("expected 'dims I J T' header");
    Dims d(reader.integer(tok[1]), reader.integer(tok[2]), reader.integer(tok[3]));
    if (!d.valid()) reader.fail("dimensions must be positive");
    return d;
}

Index3 read_coord(const LineReader& reader, const std::vector<std::string_view>& tok, const Dims& d) {
    Index3 c{reader.integer(tok[0]) - 1, reader.integer(tok[1]) - 1, reader.integer(tok[2]) - 1};
    if (!in_range(d, c)) reader.fail("index out of range (indices are 1-based)");
    return c;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

SparseTensor3 read_tensor(std::istream& in) {
    LineReader reader(in);
    std::vector<std::string_view> tok;
    const Dims d = read_dims_header(reader, tok);
    std::vector<SparseEntry> entries;
    while (reader.next(tok)) {
        if (tok.size() != 4) reader.fail("expected 'i j t value'");
        entries.push_back({read_coord(reader, tok, d), reader.real(tok[3])});
    }
    return SparseTensor3(d, std::move(entries));
}

SparseTensor3 read_tensor(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_tensor(in);
}

Tensor3 read_dense_tensor(const std::filesystem::path& path) { return read_tensor(path).densify(); }

void write_tensor(std::ostream& out, const Tensor3& x) {
    const Dims& d = x.dims();
    out << "dims " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
    for (Index t = 0; t < d[2]; ++t)
        for (Index j = 0; j < d[1]; ++j)
            for (Index i = 0; i < d[0]; ++i)
                out << i + 1 << ' ' << j + 1 << ' ' << t + 1 << ' ' << format_double(x(i, j, t)) << '\n';
}

void write_tensor(std::ostream& out, const SparseTensor3& x) {
    const Dims& d = x.dims();
    out << "dims " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
    for (const auto& e : x.entries())
        out << e.index.i + 1 << ' ' << e.index.j + 1 << ' ' << e.index.t + 1 << ' ' << format_double(e.value)
            << '\n';
}

void write_tensor(const std::filesystem::path& path, const Tensor3& x) {
    auto out = open_out(path);
    write_tensor(out, x);
}

void write_tensor(const std::filesystem::path& path, const SparseTensor3& x) {
    auto out = open_out(path);
    write_tensor(out, x);
}

IndexList read_index_list(std::istream& in) {
    LineReader reader(in);
    std::vector<std::string_view> tok;
    IndexList list;
    list.dims = read_dims_header(reader, tok);
    while (reader.next(tok)) {
        if (tok.size() != 3) reader.fail("expected 'i j t'");
        list.cells.push_back(read_coord(reader, tok, list.dims));
    }
    return list;
}

IndexList read_index_list(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_index_list(in);
}

void write_index_list(std::ostream& out, const IndexList& list) {
    out << "dims " << list.dims[0] << ' ' << list.dims[1] << ' ' << list.dims[2] << '\n';
    for (const auto& c : list.cells) out << c.i + 1 << ' ' << c.j + 1 << ' ' << c.t + 1 << '\n';
}

void write_index_list(const std::filesystem::path& path, const IndexList& list) {
    auto out = open_out(path);
    write_index_list(out, list);
}

Matrix read_matrix(std::istream& in) {
    LineReader reader(in);
    std::vector<std::string_view> tok;
    if (!reader.next(tok) || tok.size() != 3 || tok[0] != "matrix") throw ParseError("expected 'matrix R C' header");
    const Index rows = reader.integer(tok[1]);
    const Index cols = reader.integer(tok[2]);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        if (!reader.next(tok)) throw ParseError("matrix: unexpected end of input");
        if (static_cast<Index>(tok.size()) != cols) reader.fail("wrong number of columns");
        for (Index c = 0; c < cols; ++c) m(r, c) = reader.real(tok[c]);
    }
    return m;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << "matrix " << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
        out << '\n';
    }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    auto out = open_out(path);
    write_matrix(out, m);
}

}  // namespace mdtd::io
