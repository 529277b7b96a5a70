#pragma once

// Synthetic benchmark: two SBM graphs with GFT dictionaries, a Ramanujan
// temporal dictionary, sparse random codes and additive Gaussian noise.

#include "mdtd/dictionary.hpp"
#include "mdtd/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace mdtd {

struct SynthConfig {
    Dims dims{200, 300, 400};
    std::array<Index, 2> atoms{50, 30};
    int max_period = 10;
    Index rank = 10;
    double nonzero_fraction = 0.75;
    std::optional<double> snr_db = 20.0;  // nullopt disables noise
    int communities = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroundTruth {
    std::array<Graph, 2> graphs;
    std::array<Dictionary, 3> dicts;
    std::array<FactorMatrix, 3> codes;
    Tensor3 noiseless;
    Tensor3 noisy;
    double noise_variance = 0.0;
    Index rank = 0;
};

/// Near-equal communities; each community of size c gets round(c(c-1)/4)
/// internal edges and the same number of edges to other communities.
/// Counts that cannot be met are reduced with a warning.
[[nodiscard]] Graph sbm_graph(Index n, int communities, std::uint64_t seed);

[[nodiscard]] GroundTruth generate(const SynthConfig& cfg);

/// round(fraction * count) uniformly chosen cells marked missing.
[[nodiscard]] Mask make_mask(const Dims& dims, double missing_fraction, std::uint64_t seed);

/// `count` distinct cells not stored in `x`, ascending linear order.
[[nodiscard]] std::vector<Index3> make_missing_idx(const SparseTensor3& x, Index count, std::uint64_t seed);

}  // namespace mdtd
