#include "hvr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hvr/dual.hpp"

namespace hvr::losses {

namespace {

using geo::detail::scalar_value;
using num::scalar_value;

// Flat parameter order: query point, then every positive-tree point level by
// level, then every point of each negative tree. One tree holds 2^L - 1
// points; point (l, k) sits at slot 2^(l-1) - 1 + k within its tree.
struct Layout {
    int dim = 0;
    int levels = 0;
    int n_neg = 0;

    int points_per_tree() const { return (1 << levels) - 1; }
    std::size_t query_off() const { return 0; }
    std::size_t tree_off(int tree) const {  // tree = 0 positive, 1.. negatives
        return (1 + static_cast<std::size_t>(tree) * points_per_tree()) * dim;
    }
    std::size_t point_off(int tree, int level, int k) const {
        return tree_off(tree) + (static_cast<std::size_t>((1 << (level - 1)) - 1 + k)) * dim;
    }
    std::size_t total() const { return tree_off(n_neg + 1); }
};

template <class S>
std::vector<S> slice(const std::vector<S>& x, std::size_t off, int dim) {
    return std::vector<S>(x.begin() + off, x.begin() + off + dim);
}

// max{arg, 0} with subgradient 0 at the kink; tracks how close any hinge
// argument comes to the kink when hinge_gap is non-null.
template <class S>
S hinge(const S& arg, double* hinge_gap) {
    const double v = scalar_value(arg);
    if (hinge_gap) *hinge_gap = std::min(*hinge_gap, std::abs(v));
    return v > 0.0 ? arg : S(0.0);
}

template <class S>
S hier_eval(const std::vector<S>& x, const Layout& lay, int tree, double c, double m,
            double* hinge_gap) {
    S total = S(0.0);
    for (int l = 2; l <= lay.levels; ++l) {
        const int parents = 1 << (l - 2);
        const int width = 1 << (l - 1);
        for (int k = 0; k < parents; ++k) {
            const auto parent = slice(x, lay.point_off(tree, l - 1, k), lay.dim);
            for (int b = 0; b < 2; ++b) {
                const int child = 2 * k + b;
                const auto child_p = slice(x, lay.point_off(tree, l, child), lay.dim);
                const S d_pc = geo::detail::dist(parent, child_p, c);
                for (int n = 0; n < width; ++n) {
                    if (n == child) continue;
                    const auto neg = slice(x, lay.point_off(tree, l, n), lay.dim);
                    total = total + hinge(d_pc - geo::detail::dist(child_p, neg, c) + m,
                                          hinge_gap);
                }
            }
        }
    }
    return total;
}

template <class S>
S hyp_eval(const std::vector<S>& x, const Layout& lay, double c, double m,
           double* hinge_gap) {
    const auto q = slice(x, lay.query_off(), lay.dim);
    const auto pos_root = slice(x, lay.point_off(0, 1, 0), lay.dim);
    const S d_pos = geo::detail::dist(q, pos_root, c);
    S total = S(0.0);
    for (int t = 1; t <= lay.n_neg; ++t) {
        const auto neg_root = slice(x, lay.point_off(t, 1, 0), lay.dim);
        total = total + hinge(d_pos - geo::detail::dist(q, neg_root, c) + m, hinge_gap);
    }
    return total;
}

template <class S>
S euclidean_gap(const std::vector<S>& a, const std::vector<S>& b) {
    std::vector<S> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return geo::detail::norm(diff);
}

template <class S>
S euc_eval(const std::vector<S>& x, const Layout& lay, double c, double m,
           double* hinge_gap) {
    const auto dq = geo::detail::log0(slice(x, lay.query_off(), lay.dim), c);
    const int leaves = 1 << (lay.levels - 1);
    S total = S(0.0);
    for (int j = 0; j < leaves; ++j) {
        const auto dp =
            geo::detail::log0(slice(x, lay.point_off(0, lay.levels, j), lay.dim), c);
        const S pos_gap = euclidean_gap(dq, dp);
        for (int t = 1; t <= lay.n_neg; ++t) {
            const auto dn =
                geo::detail::log0(slice(x, lay.point_off(t, lay.levels, j), lay.dim), c);
            total = total + hinge(pos_gap - euclidean_gap(dq, dn) + m, hinge_gap);
        }
    }
    return total;
}

template <class S>
S eval_loss(const std::vector<S>& x, const Layout& lay, double c, double m,
            LossKind kind, double* hinge_gap) {
    switch (kind) {
        case LossKind::Hier:
            return hier_eval(x, lay, /*tree=*/0, c, m, hinge_gap);
        case LossKind::Hyp:
            return hyp_eval(x, lay, c, m, hinge_gap);
        case LossKind::Euc:
            return euc_eval(x, lay, c, m, hinge_gap);
        case LossKind::Total:
            return hier_eval(x, lay, 0, c, m, hinge_gap) + hyp_eval(x, lay, c, m, hinge_gap) +
                   euc_eval(x, lay, c, m, hinge_gap);
    }
    throw InvalidInputError("unknown loss kind");
}

void check_tree(const hierarchy::DescriptorTree& tree) {
    if (tree.levels < 2 || tree.points.empty())
        throw InvalidInputError("descriptor tree must have depth >= 2");
    for (int l = 1; l <= tree.levels; ++l)
        if (static_cast<int>(tree.points[l - 1].size()) != (1 << (l - 1)))
            throw ConfigError("descriptor tree level " + std::to_string(l) +
                              " has the wrong point count");
}

Layout layout_of(const TripletBatch& batch) {
    Layout lay;
    lay.dim = batch.query.cfg.dim;
    lay.levels = batch.positive.levels;
    lay.n_neg = static_cast<int>(batch.negatives.size());
    return lay;
}

std::vector<double> flatten(const TripletBatch& batch, const Layout& lay) {
    std::vector<double> x(lay.total());
    std::copy(batch.query.coords.begin(), batch.query.coords.end(), x.begin());
    auto put_tree = [&](const hierarchy::DescriptorTree& tree, int idx) {
        for (int l = 1; l <= lay.levels; ++l)
            for (int k = 0; k < (1 << (l - 1)); ++k)
                std::copy(tree.points[l - 1][k].coords.begin(),
                          tree.points[l - 1][k].coords.end(),
                          x.begin() + lay.point_off(idx, l, k));
    };
    put_tree(batch.positive, 0);
    for (int t = 0; t < lay.n_neg; ++t) put_tree(batch.negatives[t], t + 1);
    return x;
}

std::vector<double> flatten_tree_only(const hierarchy::DescriptorTree& tree, Layout& lay) {
    lay.dim = tree.points[0][0].cfg.dim;
    lay.levels = tree.levels;
    lay.n_neg = 0;
    std::vector<double> x(lay.total(), 0.0);
    for (int l = 1; l <= lay.levels; ++l)
        for (int k = 0; k < (1 << (l - 1)); ++k)
            std::copy(tree.points[l - 1][k].coords.begin(), tree.points[l - 1][k].coords.end(),
                      x.begin() + lay.point_off(0, l, k));
    return x;
}

std::vector<double> dual_gradient(const std::vector<double>& x0, const Layout& lay,
                                  double c, double m, LossKind kind) {
    std::vector<num::Dual> x(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x[i] = num::Dual(x0[i]);
    std::vector<double> g(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        x[i].d = 1.0;
        g[i] = eval_loss(x, lay, c, m, kind, nullptr).d;
        x[i].d = 0.0;
    }
    return g;
}

std::string describe_slot(const Layout& lay, std::size_t flat_index) {
    const std::size_t point = flat_index / lay.dim;
    const int coord = static_cast<int>(flat_index % lay.dim);
    if (point == 0) return "query[" + std::to_string(coord) + "]";
    const std::size_t per_tree = lay.points_per_tree();
    const std::size_t tree = (point - 1) / per_tree;
    std::size_t within = (point - 1) % per_tree;
    int level = 1;
    while (within >= static_cast<std::size_t>(1u << (level - 1))) {
        within -= 1u << (level - 1);
        ++level;
    }
    const std::string who = tree == 0 ? "positive" : ("negative" + std::to_string(tree - 1));
    return who + "(level " + std::to_string(level) + ", k " + std::to_string(within) + ")[" +
           std::to_string(coord) + "]";
}

}  // namespace

void TripletBatch::validate() const {
    check_tree(positive);
    if (negatives.empty()) throw InvalidInputError("triplet batch needs at least one negative");
    if (!(margin > 0.0)) throw InvalidInputError("margin must be positive");
    for (const auto& n : negatives) {
        check_tree(n);
        if (n.levels != positive.levels)
            throw ConfigError("negative tree depth differs from the positive tree");
        if (!geo::same_space(n.points[0][0].cfg, query.cfg))
            throw ConfigError("triplet batch mixes ball configurations");
    }
    if (!geo::same_space(positive.points[0][0].cfg, query.cfg))
        throw ConfigError("triplet batch mixes ball configurations");
}

double hier_triplet(const hierarchy::DescriptorTree& tree, double margin) {
    check_tree(tree);
    Layout lay;
    const std::vector<double> x = flatten_tree_only(tree, lay);
    return hier_eval(x, lay, /*tree=*/0, tree.points[0][0].cfg.curvature, margin, nullptr);
}

double hyp_triplet(const TripletBatch& batch) {
    batch.validate();
    const Layout lay = layout_of(batch);
    return hyp_eval(flatten(batch, lay), lay, batch.query.cfg.curvature, batch.margin,
                    nullptr);
}

double euc_triplet(const TripletBatch& batch) {
    batch.validate();
    const Layout lay = layout_of(batch);
    return euc_eval(flatten(batch, lay), lay, batch.query.cfg.curvature, batch.margin,
                    nullptr);
}

double total_loss(const hierarchy::DescriptorTree& tree, const TripletBatch& batch) {
    return hier_triplet(tree, batch.margin) + hyp_triplet(batch) + euc_triplet(batch);
}

LossGradients grad(const TripletBatch& batch, LossKind kind) {
    batch.validate();
    const Layout lay = layout_of(batch);
    const std::vector<double> g = dual_gradient(flatten(batch, lay), lay,
                                                batch.query.cfg.curvature, batch.margin, kind);
    LossGradients out;
    out.query = slice(g, lay.query_off(), lay.dim);
    auto take_tree = [&](int idx) {
        std::vector<std::vector<std::vector<double>>> tree(lay.levels);
        for (int l = 1; l <= lay.levels; ++l)
            for (int k = 0; k < (1 << (l - 1)); ++k)
                tree[l - 1].push_back(slice(g, lay.point_off(idx, l, k), lay.dim));
        return tree;
    };
    out.positive = take_tree(0);
    for (int t = 0; t < lay.n_neg; ++t) out.negatives.push_back(take_tree(t + 1));
    return out;
}

GradReport grad_check(const TripletBatch& batch, LossKind kind, double step) {
    batch.validate();
    const Layout lay = layout_of(batch);
    const double c = batch.query.cfg.curvature;
    const double m = batch.margin;
    std::vector<double> x = flatten(batch, lay);

    GradReport report;
    report.min_hinge_gap = std::numeric_limits<double>::infinity();
    eval_loss(x, lay, c, m, kind, &report.min_hinge_gap);
    report.near_kink = report.min_hinge_gap < 10.0 * step;

    report.analytic = dual_gradient(x, lay, c, m, kind);
    report.numeric.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double hi = eval_loss(x, lay, c, m, kind, nullptr);
        x[i] = saved - step;
        const double lo = eval_loss(x, lay, c, m, kind, nullptr);
        x[i] = saved;
        report.numeric[i] = (hi - lo) / (2.0 * step);

        const double denom =
            std::max({std::abs(report.analytic[i]), std::abs(report.numeric[i]), 1e-8});
        const double rel = std::abs(report.analytic[i] - report.numeric[i]) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.max_location = describe_slot(lay, i);
        }
    }
    return report;
}

geo::BallPoint rsgd_point_step(const geo::BallPoint& x, const std::vector<double>& g,
                               double lr) {
    if (!(lr > 0.0)) throw InvalidInputError("learning rate must be positive");
    if (static_cast<int>(g.size()) != x.cfg.dim)
        throw ConfigError("gradient dimension mismatch");
    const double lam = geo::conformal_factor(x);
    const double scale = -lr / (lam * lam);
    geo::TangentVec v{std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) v.coords[i] = scale * g[i];
    return geo::exp_map(x, v);
}

void rsgd_step(TripletBatch& batch, const LossGradients& grads, double lr) {
    batch.query = rsgd_point_step(batch.query, grads.query, lr);
    auto step_tree = [&](hierarchy::DescriptorTree& tree,
                         const std::vector<std::vector<std::vector<double>>>& g) {
        for (int l = 0; l < tree.levels; ++l)
            for (std::size_t k = 0; k < tree.points[l].size(); ++k)
                tree.points[l][k] = rsgd_point_step(tree.points[l][k], g[l][k], lr);
    };
    step_tree(batch.positive, grads.positive);
    for (std::size_t t = 0; t < batch.negatives.size(); ++t)
        step_tree(batch.negatives[t], grads.negatives[t]);
}

}  // namespace hvr::losses
