#pragma once

// Training objectives: hierarchical, hyperbolic and Euclidean triplet losses,
// their gradients with respect to every ball point entering the loss
// (forward-mode dual numbers), a finite-difference gradient check, and a
// plain Riemannian gradient step.

#include <string>
#include <vector>

#include "hvr/geometry.hpp"
#include "hvr/hierarchy.hpp"

namespace hvr::losses {

struct TripletBatch {
    geo::BallPoint query;                  // h_q
    hierarchy::DescriptorTree positive;    // P'
    std::vector<hierarchy::DescriptorTree> negatives;  // N'
    double margin = 0.1;

    void validate() const;
};

// Sum over levels l in 2..L, parents k, children b, and same-level negatives
// n != child of max{d(parent, child) - d(child, negative) + m, 0}.
double hier_triplet(const hierarchy::DescriptorTree& tree, double margin);

// Per negative: max{d(h_q, pos root) - d(h_q, neg root) + m, 0}.
double hyp_triplet(const TripletBatch& batch);

// Leaf-level triplets on the log0 images (paired by leaf index, summed over
// negatives): max{||d_q - d_pos|| - ||d_q - d_neg|| + m, 0}.
double euc_triplet(const TripletBatch& batch);

double total_loss(const hierarchy::DescriptorTree& tree, const TripletBatch& batch);
inline double total_loss(const TripletBatch& batch) {
    return total_loss(batch.positive, batch);
}

enum class LossKind { Hier, Hyp, Euc, Total };

// Euclidean gradients, structured like the batch.
struct LossGradients {
    std::vector<double> query;
    std::vector<std::vector<std::vector<double>>> positive;   // [level][point][coord]
    std::vector<std::vector<std::vector<std::vector<double>>>> negatives;
};

LossGradients grad(const TripletBatch& batch, LossKind kind);

struct GradReport {
    double max_rel_error = 0.0;
    std::string max_location;
    // Distance of the closest hinge argument to its kink at the evaluation
    // point; when this is within a few finite-difference steps of zero the
    // comparison is unreliable and near_kink is set instead of trusted.
    double min_hinge_gap = 0.0;
    bool near_kink = false;
    std::vector<double> analytic;  // flattened parameter order
    std::vector<double> numeric;
};

// Central finite differences against the dual-number gradient.
GradReport grad_check(const TripletBatch& batch, LossKind kind, double step = 1e-5);

// x <- exp_map(x, -lr * g / lambda_x^2), i.e. the Euclidean gradient rescaled
// by the inverse metric, then re-projected into the ball.
geo::BallPoint rsgd_point_step(const geo::BallPoint& x, const std::vector<double>& grad,
                               double lr);

// Applies rsgd_point_step to every parameter of the batch in place.
void rsgd_step(TripletBatch& batch, const LossGradients& grads, double lr);

}  // namespace hvr::losses
