#include "hvr/synth.hpp"

#include <cmath>
#include <random>

namespace hvr::synth {

namespace {

constexpr double kTau = 6.283185307179586;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt, std::uint64_t id) {
    std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ull + (id << 12) + (id >> 3));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// One panorama: a cyclic strip of leaf_count * grid_width columns, sliced
// into leaves. Channel values combine a per-panorama signature, a few
// low-frequency harmonics along the strip and per-cell detail, then abs().
std::vector<FeatureGrid> make_panorama(const SceneSpec& spec, std::uint64_t pano_id) {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x50414eull, pano_id));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const int leaves = 1 << (spec.levels - 1);
    const int total_cols = leaves * spec.grid_width;

    std::vector<double> base(spec.channels);
    // The shared signature dominates the per-leaf harmonics so a panorama's
    // identity survives midpoint averaging at the coarse level, while the
    // harmonics still discriminate between leaves of the same panorama.
    for (double& b : base) b = 0.7 * gauss(rng);
    constexpr int kHarmonics = 3;
    std::vector<double> amp(spec.channels * kHarmonics), phase(spec.channels * kHarmonics);
    for (int i = 0; i < spec.channels * kHarmonics; ++i) {
        amp[i] = 0.35 * gauss(rng);
        phase[i] = kTau * uniform(rng);
    }

    std::vector<FeatureGrid> grids(leaves);
    for (int j = 0; j < leaves; ++j) {
        FeatureGrid& g = grids[j];
        g.height = spec.grid_height;
        g.width = spec.grid_width;
        g.channels = spec.channels;
        g.values.resize(g.cell_count() * spec.channels);
    }
    for (int col = 0; col < total_cols; ++col) {
        const double t = static_cast<double>(col) / total_cols;
        const int leaf = col / spec.grid_width;
        const int local = col % spec.grid_width;
        for (int row = 0; row < spec.grid_height; ++row) {
            for (int ch = 0; ch < spec.channels; ++ch) {
                double v = base[ch];
                for (int h = 0; h < kHarmonics; ++h)
                    v += amp[ch * kHarmonics + h] * std::cos(kTau * (h + 1) * t +
                                                             phase[ch * kHarmonics + h]);
                v += 0.1 * gauss(rng);
                grids[leaf].at(row, local, ch) = std::abs(v);
            }
        }
    }
    return grids;
}

}  // namespace

void SceneSpec::validate() const {
    if (n_panoramas < 1 || channels < 1 || grid_height < 1 || grid_width < 1 ||
        queries_per_panorama < 0)
        throw InvalidInputError("scene spec fields must be positive");
    if (levels < 2 || levels > 8) throw InvalidInputError("levels must lie in [2, 8]");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw InvalidInputError("noise sigma must be finite and >= 0");
}

SyntheticDataset generate_dataset(const SceneSpec& spec) {
    spec.validate();
    SyntheticDataset ds;
    ds.panoramas.reserve(spec.n_panoramas);
    const int leaves = 1 << (spec.levels - 1);

    for (int i = 0; i < spec.n_panoramas; ++i) {
        index::PanoramaInput input;
        input.id = static_cast<std::uint64_t>(i);
        // Geotags on a regular grid; they exercise the persistence and report
        // paths, nothing mines them.
        input.geotag = index::Geotag{0.001 * (i / 100), 0.001 * (i % 100)};
        input.leaves = make_panorama(spec, input.id);
        ds.panoramas.push_back(std::move(input));
    }

    for (int i = 0; i < spec.n_panoramas; ++i) {
        for (int q = 0; q < spec.queries_per_panorama; ++q) {
            std::mt19937_64 rng(
                mix_seed(spec.seed, 0x515259ull, static_cast<std::uint64_t>(i) * 4096 + q));
            std::normal_distribution<double> gauss(0.0, 1.0);
            QuerySample sample;
            sample.panorama_id = static_cast<std::uint64_t>(i);
            sample.leaf = 1 + static_cast<int>(rng() % leaves);
            sample.grid = ds.panoramas[i].leaves[sample.leaf - 1];
            if (spec.noise_sigma > 0.0)
                for (double& v : sample.grid.values)
                    v += std::abs(spec.noise_sigma * gauss(rng));
            ds.queries.push_back(std::move(sample));
        }
    }
    return ds;
}

double evaluate_recall(const std::vector<std::vector<index::ScoredResult>>& results,
                       const std::vector<QuerySample>& queries, int k) {
    if (results.size() != queries.size())
        throw InvalidInputError("one result set per query is required");
    if (queries.empty()) throw InvalidInputError("no queries to evaluate");
    int hits = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& res = results[i];
        const std::size_t limit = std::min<std::size_t>(k, res.size());
        for (std::size_t r = 0; r < limit; ++r) {
            if (res[r].id == queries[i].panorama_id) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

}  // namespace hvr::synth
