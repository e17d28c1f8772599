#pragma once

// Descriptor hierarchy: GeM pooling + linear projection per level, exp-map
// embedding into the ball, and Einstein-midpoint aggregation of leaf
// descriptors into an L-level tree (2^(l-1) points at level l).

#include <cstdint>
#include <vector>

#include "hvr/geometry.hpp"
#include "hvr/grid.hpp"

namespace hvr::hierarchy {

// GeM exponent plus linear projection for one aggregator.
struct Aggregator {
    double gem_p = 3.0;
    int in_dim = 0;   // channels C
    int out_dim = 0;  // descriptor dimension D
    // Row-major out_dim x in_dim; applied as matrix * v, no bias.
    std::vector<double> projection;
};

struct PoolingConfig {
    std::vector<Aggregator> per_level;  // index l-1 for level l
    Aggregator query;

    int levels() const { return static_cast<int>(per_level.size()); }
};

// Identity projection when C == D, otherwise a D x C slice of the Q factor
// of a seeded Gaussian (orthonormal rows/columns). Independent draw per level.
PoolingConfig default_pooling(int levels, int channels, int descriptor_dim,
                              std::uint64_t seed, double gem_p = 3.0);

// Horizontal window extents in query-width units; the panorama spans 8 units.
struct Window {
    double start = 0.0;
    double width = 0.0;
};

struct WindowLayout {
    int levels = 0;
    bool cyclic = false;
    // windows[l-1] holds the 2^(l-1) windows of level l, left to right.
    std::vector<std::vector<Window>> windows;

    int leaf_count() const { return 1 << (levels - 1); }
};

// Level-l windows halve the field of view per level (width 8/2^(l-1)), except
// that leaf windows never shrink below the query width of 1; for L > 4 they
// therefore overlap, sliding with cyclic stride 8/2^(L-1) around the panorama.
WindowLayout window_layout(int levels, bool cyclic);

// Leaf indices (1-based) covered by group k of level l:
// {j : (k-1)*2^(L-l) + 1 <= j <= k*2^(L-l)}.
std::vector<int> group_indices(int level, int group, int levels);

// Per channel, (mean of value^p)^(1/p) over the spatial cells.
std::vector<double> gem_pool(const FeatureGrid& grid, double p);

std::vector<double> project_desc(const std::vector<double>& v, const Aggregator& agg);

// Full aggregator: projection(gem(grid)) as a tangent vector.
geo::TangentVec aggregate(const FeatureGrid& grid, const Aggregator& agg);

// Query path: exp0 of the query aggregator's descriptor.
geo::BallPoint embed_query(const FeatureGrid& grid, const PoolingConfig& pooling,
                           const geo::BallConfig& ball);

struct DescriptorTree {
    int levels = 0;
    // points[l-1] holds the 2^(l-1) aggregated descriptors of level l.
    std::vector<std::vector<geo::BallPoint>> points;
    // Euclidean leaf descriptors (pre-embedding), kept for loss computation
    // when requested at build time; empty otherwise.
    std::vector<std::vector<double>> leaf_descriptors;

    const geo::BallPoint& root() const { return points[0][0]; }
};

DescriptorTree build_tree(const std::vector<FeatureGrid>& leaf_grids,
                          const PoolingConfig& pooling, const geo::BallConfig& ball,
                          bool keep_leaf_descriptors = false);

}  // namespace hvr::hierarchy
