#pragma once

// Deterministic generator of panorama-style feature grids with planted query
// matches. Each panorama gets a distinct latent signature; its leaves are
// smooth cyclic perturbations of that signature, so adjacent leaves are
// correlated. Queries copy a ground-truth leaf plus nonnegative noise.

#include <cstdint>
#include <vector>

#include "hvr/grid.hpp"
#include "hvr/index.hpp"

namespace hvr::synth {

struct SceneSpec {
    int n_panoramas = 10;
    int channels = 16;
    int grid_height = 4;
    int grid_width = 4;
    int levels = 5;
    double noise_sigma = 0.1;
    int queries_per_panorama = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct QuerySample {
    FeatureGrid grid;
    std::uint64_t panorama_id = 0;
    int leaf = 0;  // 1-based ground-truth leaf window
};

struct SyntheticDataset {
    std::vector<index::PanoramaInput> panoramas;
    std::vector<QuerySample> queries;
};

SyntheticDataset generate_dataset(const SceneSpec& spec);

// Fraction of queries whose ground-truth panorama id appears in the top-K.
double evaluate_recall(const std::vector<std::vector<index::ScoredResult>>& results,
                       const std::vector<QuerySample>& queries, int k);

}  // namespace hvr::synth
