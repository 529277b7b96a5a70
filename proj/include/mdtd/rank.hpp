#pragma once

// Core-consistency (CORCONDIA) scoring of a fitted CPD-shaped model and a
// rank scan built on it.

#include "mdtd/solver.hpp"

#include <string>
#include <vector>

namespace mdtd {

/// Dense k x k x k core, stored like Tensor3.
struct CoreTensor {
    Tensor3 g;

    [[nodiscard]] Index rank() const { return g.dims()[0]; }
};

/// Least-squares core for fixed factors: G = X x1 pinv(A) x2 pinv(B) x3 pinv(C),
/// applied mode by mode. Logs a warning when a factor is column-rank deficient.
[[nodiscard]] CoreTensor fit_core(const Tensor3& x, const Matrix& a, const Matrix& b, const Matrix& c);

/// 100 * (1 - sum (g - t)^2 / k) with t the superdiagonal of ones.
[[nodiscard]] double core_consistency(const CoreTensor& g);

enum class RankSelection {
    threshold,  // largest rank whose score reaches the threshold, else argmax
    max,        // argmax of the score
};

struct RankScanConfig {
    RankSelection selection = RankSelection::threshold;
    double threshold = 90.0;
};

struct RankCandidate {
    Index rank = 0;
    double score = 0.0;
    double sse = 0.0;
    Index nnz = 0;
    double seconds = 0.0;
};

struct RankScanResult {
    std::vector<RankCandidate> candidates;  // ascending rank, failed ranks omitted
    Index chosen = 0;
    std::vector<std::string> warnings;
};

/// Picks a rank from scored candidates; ties go to the smaller rank.
[[nodiscard]] Index select_rank(const std::vector<RankCandidate>& candidates, const RankScanConfig& scan);

/// Solves at every rank in `ranks` (ascending, non-empty) with `cfg` (rank
/// overridden) and scores the dictionary-expanded factors, S applied on mode 1.
/// A candidate whose solve throws is skipped and recorded in `warnings`.
[[nodiscard]] RankScanResult estimate_rank(const Tensor3& x, const std::array<Dictionary, 3>& dicts,
                                           const std::vector<Index>& ranks, const SolverConfig& cfg,
                                           const RankScanConfig& scan = {});

}  // namespace mdtd
