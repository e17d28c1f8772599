#include "hvr/hierarchy.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace hvr::hierarchy {

namespace {

std::vector<double> orthonormal_projection(int out_dim, int in_dim, std::uint64_t seed) {
    const int n = std::max(out_dim, in_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g(r, c) = gauss(rng);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    std::vector<double> proj(static_cast<std::size_t>(out_dim) * in_dim);
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c) proj[static_cast<std::size_t>(r) * in_dim + c] = q(r, c);
    return proj;
}

Aggregator make_aggregator(int channels, int descriptor_dim, std::uint64_t seed,
                           double gem_p) {
    Aggregator agg;
    agg.gem_p = gem_p;
    agg.in_dim = channels;
    agg.out_dim = descriptor_dim;
    if (channels == descriptor_dim) {
        agg.projection.assign(static_cast<std::size_t>(channels) * channels, 0.0);
        for (int i = 0; i < channels; ++i)
            agg.projection[static_cast<std::size_t>(i) * channels + i] = 1.0;
    } else {
        agg.projection = orthonormal_projection(descriptor_dim, channels, seed);
    }
    return agg;
}

}  // namespace

PoolingConfig default_pooling(int levels, int channels, int descriptor_dim,
                              std::uint64_t seed, double gem_p) {
    if (levels < 2 || levels > 8) throw ConfigError("levels must lie in [2, 8]");
    PoolingConfig cfg;
    cfg.per_level.reserve(levels);
    for (int l = 1; l <= levels; ++l)
        cfg.per_level.push_back(
            make_aggregator(channels, descriptor_dim, seed + static_cast<std::uint64_t>(l), gem_p));
    cfg.query = make_aggregator(channels, descriptor_dim, seed, gem_p);
    return cfg;
}

WindowLayout window_layout(int levels, bool cyclic) {
    if (levels < 2 || levels > 8) throw ConfigError("levels must lie in [2, 8]");
    constexpr double kPanoramaWidth = 8.0;  // W'/W
    WindowLayout layout;
    layout.levels = levels;
    layout.cyclic = cyclic;
    layout.windows.resize(levels);
    for (int l = 1; l <= levels; ++l) {
        const int count = 1 << (l - 1);
        const double stride = kPanoramaWidth / count;
        const double width = std::max(1.0, stride);
        if (width > stride && !cyclic)
            throw ConfigError("overlapping leaf windows require a cyclic layout");
        auto& row = layout.windows[l - 1];
        row.reserve(count);
        for (int k = 0; k < count; ++k) row.push_back(Window{k * stride, width});
    }
    return layout;
}

std::vector<int> group_indices(int level, int group, int levels) {
    if (level < 1 || level > levels) throw InvalidInputError("level out of range");
    if (group < 1 || group > (1 << (level - 1)))
        throw InvalidInputError("group out of range for level");
    const int span = 1 << (levels - level);
    std::vector<int> out(span);
    for (int i = 0; i < span; ++i) out[i] = (group - 1) * span + 1 + i;
    return out;
}

std::vector<double> gem_pool(const FeatureGrid& grid, double p) {
    grid.validate();
    if (p < 1.0) throw InvalidInputError("GeM exponent must be >= 1");
    const bool fractional = std::floor(p) != p;
    std::vector<double> out(grid.channels, 0.0);
    const std::size_t cells = grid.cell_count();
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (int ch = 0; ch < grid.channels; ++ch) {
            const double v = grid.values[cell * grid.channels + ch];
            if (fractional && v < 0.0)
                throw InvalidInputError("negative entry with fractional GeM exponent");
            out[ch] += std::pow(v, p);
        }
    }
    for (double& v : out) v = std::pow(v / static_cast<double>(cells), 1.0 / p);
    return out;
}

std::vector<double> project_desc(const std::vector<double>& v, const Aggregator& agg) {
    if (static_cast<int>(v.size()) != agg.in_dim)
        throw ConfigError("descriptor length does not match projection input dimension");
    std::vector<double> out(agg.out_dim, 0.0);
    for (int r = 0; r < agg.out_dim; ++r) {
        const double* row = agg.projection.data() + static_cast<std::size_t>(r) * agg.in_dim;
        double acc = 0.0;
        for (int c = 0; c < agg.in_dim; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

geo::TangentVec aggregate(const FeatureGrid& grid, const Aggregator& agg) {
    return geo::TangentVec{project_desc(gem_pool(grid, agg.gem_p), agg)};
}

geo::BallPoint embed_query(const FeatureGrid& grid, const PoolingConfig& pooling,
                           const geo::BallConfig& ball) {
    return geo::exp0(aggregate(grid, pooling.query), ball);
}

DescriptorTree build_tree(const std::vector<FeatureGrid>& leaf_grids,
                          const PoolingConfig& pooling, const geo::BallConfig& ball,
                          bool keep_leaf_descriptors) {
    const int levels = pooling.levels();
    const int leaves = 1 << (levels - 1);
    if (static_cast<int>(leaf_grids.size()) != leaves)
        throw InvalidInputError("expected " + std::to_string(leaves) + " leaf grids, got " +
                                std::to_string(leaf_grids.size()));

    DescriptorTree tree;
    tree.levels = levels;
    tree.points.resize(levels);
    for (int l = 1; l <= levels; ++l) {
        const Aggregator& agg = pooling.per_level[l - 1];
        // Per-leaf level-l embeddings, then one midpoint per index group.
        std::vector<geo::BallPoint> embedded;
        embedded.reserve(leaves);
        for (int j = 0; j < leaves; ++j) {
            geo::TangentVec d = aggregate(leaf_grids[j], agg);
            if (l == levels && keep_leaf_descriptors) tree.leaf_descriptors.push_back(d.coords);
            embedded.push_back(geo::exp0(d, ball));
        }
        const int groups = 1 << (l - 1);
        const int span = leaves / groups;
        auto& row = tree.points[l - 1];
        row.reserve(groups);
        for (int k = 0; k < groups; ++k) {
            row.push_back(geo::einstein_midpoint(
                std::span<const geo::BallPoint>(embedded.data() + k * span, span)));
        }
    }
    return tree;
}

}  // namespace hvr::hierarchy
