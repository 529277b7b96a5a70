#include "mdtd/rank.hpp"

#include "mdtd/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace mdtd {

namespace {

Matrix pseudo_inverse(const Matrix& f, const char* name) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(f);
    if (cod.rank() < f.cols()) {
        spdlog::warn("fit_core: factor {} has column rank {} < {}; using the pseudoinverse", name, cod.rank(),
                     f.cols());
    }
    return cod.pseudoInverse();
}

Tensor3 mode_product(const Tensor3& x, const Matrix& m, int mode) {
    std::array<Index, 3> e = x.dims().extent;
    e[static_cast<std::size_t>(mode - 1)] = m.rows();
    const Matrix unfolded = unfold(x, mode);
    return fold(unfolded * m.transpose(), mode, Dims(e[0], e[1], e[2]));
}

}  // namespace

CoreTensor fit_core(const Tensor3& x, const Matrix& a, const Matrix& b, const Matrix& c) {
    const Dims& d = x.dims();
    if (a.rows() != d[0] || b.rows() != d[1] || c.rows() != d[2]) {
        throw ShapeError("fit_core: factor rows do not match the tensor dimensions");
    }
    if (a.cols() != b.cols() || a.cols() != c.cols() || a.cols() < 1) {
        throw ShapeError("fit_core: factors must share a positive column count");
    }
    Tensor3 g = mode_product(x, pseudo_inverse(a, "A"), 1);
    g = mode_product(g, pseudo_inverse(b, "B"), 2);
    g = mode_product(g, pseudo_inverse(c, "C"), 3);
    return {std::move(g)};
}

double core_consistency(const CoreTensor& core) {
    const Dims& d = core.g.dims();
    const Index k = d[0];
    if (d[1] != k || d[2] != k || k < 1) throw ShapeError("core_consistency: core must be a non-empty cube");
    double err = 0.0;
    for (Index t = 0; t < k; ++t)
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < k; ++i) {
                const double target = (i == j && j == t) ? 1.0 : 0.0;
                const double diff = core.g(i, j, t) - target;
                err += diff * diff;
            }
    return 100.0 * (1.0 - err / static_cast<double>(k));
}

Index select_rank(const std::vector<RankCandidate>& candidates, const RankScanConfig& scan) {
    if (candidates.empty()) throw InvalidArgument("select_rank: no scored candidates");
    if (scan.selection == RankSelection::threshold) {
        for (auto it = candidates.rbegin(); it != candidates.rend(); ++it)
            if (it->score >= scan.threshold) return it->rank;
    }
    const RankCandidate* best = &candidates.front();
    for (const auto& c : candidates)
        if (c.score > best->score || (c.score == best->score && c.rank < best->rank)) best = &c;
    return best->rank;
}

RankScanResult estimate_rank(const Tensor3& x, const std::array<Dictionary, 3>& dicts, const std::vector<Index>& ranks,
                             const SolverConfig& cfg, const RankScanConfig& scan) {
    if (ranks.empty()) throw InvalidArgument("estimate_rank: empty rank range");
    if (!std::is_sorted(ranks.begin(), ranks.end()) ||
        std::adjacent_find(ranks.begin(), ranks.end()) != ranks.end()) {
        throw InvalidArgument("estimate_rank: ranks must be strictly ascending");
    }
    RankScanResult out;
    for (const Index k : ranks) {
        SolverConfig local = cfg;
        local.rank = k;
        try {
            auto result = solve(x, nullptr, dicts, local);
            const MdtdModel& model = result.model;
            const Matrix a = model.factor(0) * model.scale.asDiagonal();
            const double score = core_consistency(fit_core(x, a, model.factor(1), model.factor(2)));
            if (!std::isfinite(score)) throw NumericalError("core consistency is not finite");
            out.candidates.push_back({k, score, result.report.sse, result.report.nnz, result.report.seconds});
        } catch (const Error& e) {
            std::string msg = "rank " + std::to_string(k) + " skipped: " + e.what();
            spdlog::warn("{}", msg);
            out.warnings.push_back(std::move(msg));
        }
    }
    if (out.candidates.empty()) throw NumericalError("estimate_rank: every candidate rank failed");
    out.chosen = select_rank(out.candidates, scan);
    return out;
}

}  // namespace mdtd
