#include "mdtd/synth.hpp"

#include "mdtd/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <utility>

namespace mdtd {

namespace {

// Seeds for the independent streams of one generate() call.
std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    std::uint64_t out = 0;
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return out;
}

// Sample `count` distinct values from [0, population) in ascending order.
std::vector<Index> sample_without_replacement(Index population, Index count, std::mt19937_64& rng) {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(count));
    // Selection sampling keeps the output sorted and uses O(1) extra memory.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Index needed = count;
    for (Index n = 0; n < population && needed > 0; ++n) {
        if (u(rng) * static_cast<double>(population - n) < static_cast<double>(needed)) {
            out.push_back(n);
            --needed;
        }
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (!dims.valid()) throw InvalidArgument("synth: dimensions must be positive");
    if (atoms[0] < 1 || atoms[1] < 1 || atoms[0] > dims[0] || atoms[1] > dims[1]) {
        throw InvalidArgument("synth: atom counts must lie in [1, mode length]");
    }
    if (max_period < 1) throw InvalidArgument("synth: max_period must be >= 1");
    if (rank < 1) throw InvalidArgument("synth: rank must be >= 1");
    if (!(nonzero_fraction > 0.0 && nonzero_fraction <= 1.0)) throw InvalidArgument("synth: fraction must be in (0,1]");
    if (communities < 1 || communities > dims[0] || communities > dims[1]) {
        throw InvalidArgument("synth: communities must lie in [1, graph size]");
    }
    if (snr_db && !std::isfinite(*snr_db)) throw InvalidArgument("synth: snr_db must be finite");
}

Graph sbm_graph(Index n, int communities, std::uint64_t seed) {
    if (n < 1 || communities < 1 || communities > n) throw InvalidArgument("sbm_graph: need 1 <= communities <= n");
    std::mt19937_64 rng(seed);
    // community boundaries: the first n % communities groups get one extra node
    std::vector<Index> start(static_cast<std::size_t>(communities) + 1, 0);
    for (int c = 0; c < communities; ++c)
        start[c + 1] = start[c] + n / communities + (c < n % communities ? 1 : 0);

    std::set<std::pair<Index, Index>> taken;
    std::vector<Edge> edges;
    auto add = [&](Index u, Index v) {
        if (u > v) std::swap(u, v);
        if (taken.emplace(u, v).second) edges.push_back({u, v, 1.0});
    };

    for (int c = 0; c < communities; ++c) {
        const Index lo = start[c], size = start[c + 1] - start[c];
        const Index pairs = size * (size - 1) / 2;
        const auto internal = static_cast<Index>(std::llround(0.5 * static_cast<double>(pairs)));
        for (Index p : sample_without_replacement(pairs, internal, rng)) {
            // unrank p into (a < b) within the community
            Index a = 0, rem = p;
            while (rem >= size - 1 - a) {
                rem -= size - 1 - a;
                ++a;
            }
            add(lo + a, lo + a + 1 + rem);
        }

        // external edges toward nodes outside the community, deduplicated globally
        const Index outside = n - size;
        std::vector<Index> candidates;
        for (Index u = lo; u < lo + size; ++u)
            for (Index v = 0; v < n; ++v)
                if (v < lo || v >= lo + size) {
                    if (!taken.contains({std::min(u, v), std::max(u, v)})) candidates.push_back(u * n + v);
                }
        Index wanted = internal;
        if (static_cast<Index>(candidates.size()) < wanted) {
            spdlog::warn("sbm_graph: community {} can take only {} of {} external edges", c + 1, candidates.size(),
                         wanted);
            wanted = static_cast<Index>(candidates.size());
        }
        (void)outside;
        for (Index pick : sample_without_replacement(static_cast<Index>(candidates.size()), wanted, rng)) {
            const Index code = candidates[static_cast<std::size_t>(pick)];
            add(code / n, code % n);
        }
    }
    return Graph(n, std::move(edges));
}

GroundTruth generate(const SynthConfig& cfg) {
    cfg.validate();
    GroundTruth gt;
    gt.rank = cfg.rank;
    for (int m = 0; m < 2; ++m) {
        gt.graphs[m] = sbm_graph(cfg.dims[static_cast<std::size_t>(m)], cfg.communities, substream(cfg.seed, m + 1));
        gt.dicts[m] = gft_dictionary(gt.graphs[m], cfg.atoms[static_cast<std::size_t>(m)]);
        gt.dicts[m].spec = "gft:graph" + std::to_string(m + 1) + ".txt:" + std::to_string(cfg.atoms[m]);
    }
    gt.dicts[2] = precompute_gram_evd(ramanujan_dictionary(cfg.dims[2], cfg.max_period));
    gt.dicts[2].spec = "ram:" + std::to_string(cfg.max_period);

    std::mt19937_64 rng(substream(cfg.seed, 10));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int m = 0; m < 3; ++m) {
        const Index p = gt.dicts[m].atom_count();
        const auto support = std::max<Index>(1, std::llround(cfg.nonzero_fraction * static_cast<double>(p)));
        Matrix y = Matrix::Zero(p, cfg.rank);
        for (Index r = 0; r < cfg.rank; ++r)
            for (Index row : sample_without_replacement(p, support, rng)) y(row, r) = uniform(rng);
        gt.codes[m] = std::move(y);
    }
    gt.noiseless = reconstruct(gt.dicts[0].atoms * gt.codes[0], gt.dicts[1].atoms * gt.codes[1],
                               gt.dicts[2].atoms * gt.codes[2], Vector::Ones(cfg.rank));
    gt.noisy = gt.noiseless;
    if (cfg.snr_db) {
        const double power = gt.noiseless.squared_norm() / static_cast<double>(gt.noiseless.size());
        gt.noise_variance = power / std::pow(10.0, *cfg.snr_db / 10.0);
        std::mt19937_64 noise_rng(substream(cfg.seed, 20));
        std::normal_distribution<double> normal(0.0, std::sqrt(gt.noise_variance));
        for (Index n = 0; n < gt.noisy.size(); ++n) gt.noisy[n] += normal(noise_rng);
    }
    return gt;
}

Mask make_mask(const Dims& dims, double missing_fraction, std::uint64_t seed) {
    if (!dims.valid()) throw InvalidArgument("make_mask: dimensions must be positive");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
        throw InvalidArgument("make_mask: missing fraction must be in [0,1)");
    }
    const Index total = dims.count();
    const auto count = static_cast<Index>(std::llround(missing_fraction * static_cast<double>(total)));
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(total), 1);
    for (Index n : sample_without_replacement(total, count, rng)) bits[static_cast<std::size_t>(n)] = 0;
    return Mask(dims, std::move(bits));
}

std::vector<Index3> make_missing_idx(const SparseTensor3& x, Index count, std::uint64_t seed) {
    const Dims& d = x.dims();
    const Index free_cells = d.count() - x.nnz();
    if (count < 0 || count > free_cells) {
        throw InvalidArgument("make_missing_idx: requested " + std::to_string(count) + " cells but only " +
                              std::to_string(free_cells) + " are unobserved");
    }
    std::vector<Index> stored;
    stored.reserve(x.entries().size());
    for (const auto& e : x.entries()) stored.push_back(linear_index(d, e.index));
    std::mt19937_64 rng(seed);
    std::vector<Index3> out;
    out.reserve(static_cast<std::size_t>(count));
    // rank r among free cells -> linear index, walking the sorted stored list
    std::size_t s = 0;
    for (Index r : sample_without_replacement(free_cells, count, rng)) {
        Index lin = r + static_cast<Index>(s);
        while (s < stored.size() && stored[s] <= lin) {
            ++s;
            lin = r + static_cast<Index>(s);
        }
        const Index i = lin % d[0], j = (lin / d[0]) % d[1], t = lin / (d[0] * d[1]);
        out.push_back({i, j, t});
    }
    return out;
}

}  // namespace mdtd
