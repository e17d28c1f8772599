#pragma once

// Poincare-ball and Klein-model primitives with a curvature parameter c > 0.
// The ball of curvature c has radius 1/sqrt(c); every public operation keeps
// its result strictly inside the ball by re-projecting when rounding pushes a
// point onto or past the boundary.

#include <cmath>
#include <span>
#include <vector>

#include "hvr/errors.hpp"

namespace hvr::geo {

struct BallConfig {
    double curvature = 1.0;   // c > 0
    int dim = 1;              // D >= 1
    double boundary_eps = 1e-5;  // interior margin, 0 < eps <= 1e-3

    void validate() const;
};

// Two configs describe the same space when curvature and dimension agree;
// the boundary guard is a numerical knob, not part of the geometry.
bool same_space(const BallConfig& a, const BallConfig& b);

// Point strictly inside the ball: sqrt(c)*||coords|| <= 1 - boundary_eps.
// Construct through project_to_ball so the invariant holds.
struct BallPoint {
    std::vector<double> coords;
    BallConfig cfg;
};

// Tangent-space vector (unbounded norm, finite entries).
struct TangentVec {
    std::vector<double> coords;
};

// Point in the Klein model of the same curvature: sqrt(c)*||coords|| < 1.
struct KleinPoint {
    std::vector<double> coords;
    double curvature = 1.0;
};

namespace detail {

// Scalar-generic core shared with the loss module's dual-number gradients.
// S is double or a forward-mode dual type providing +,-,*,/ against double,
// sqrt/tanh/atanh via ADL, and scalar_value().

inline double scalar_value(double x) { return x; }

template <class S>
S dot(const std::vector<S>& a, const std::vector<S>& b) {
    S acc = S(0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc = acc + a[i] * b[i];
    return acc;
}

template <class S>
S norm(const std::vector<S>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

// Clamp an arctanh argument into [0, 1-1e-12]; rounding can push
// sqrt(c)*||.|| onto the boundary where arctanh diverges.
template <class S>
S clamp_unit(const S& a) {
    constexpr double kMax = 1.0 - 1e-12;
    if (scalar_value(a) > kMax) return S(kMax);
    if (scalar_value(a) < 0.0) return S(0.0);
    return a;
}

// x (+)_c y, the gyrovector Mobius addition.
template <class S>
std::vector<S> mobius_add(const std::vector<S>& x, const std::vector<S>& y, double c) {
    const S xy = dot(x, y);
    const S x2 = dot(x, x);
    const S y2 = dot(y, y);
    const S den = S(1.0) + 2.0 * c * xy + (c * c) * x2 * y2;
    const S cx = (S(1.0) + 2.0 * c * xy + c * y2) / den;
    const S cy = (S(1.0) - c * x2) / den;
    std::vector<S> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = cx * x[i] + cy * y[i];
    return out;
}

template <class S>
std::vector<S> negated(const std::vector<S>& x) {
    std::vector<S> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = S(-1.0) * x[i];
    return out;
}

// d_c(x, y) = (2/sqrt(c)) arctanh(sqrt(c) ||(-x) (+)_c y||)
template <class S>
S dist(const std::vector<S>& x, const std::vector<S>& y, double c) {
    using std::atanh;
    const double rc = std::sqrt(c);
    const std::vector<S> m = mobius_add(negated(x), y, c);
    const S a = clamp_unit(rc * norm(m));
    return (2.0 / rc) * atanh(a);
}

template <class S>
std::vector<S> exp0(const std::vector<S>& v, double c) {
    using std::tanh;
    const double rc = std::sqrt(c);
    const S n = norm(v);
    std::vector<S> out(v.size(), S(0.0));
    if (scalar_value(n) < 1e-300) return out;
    const S scale = tanh(rc * n) / (rc * n);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
    return out;
}

template <class S>
std::vector<S> log0(const std::vector<S>& y, double c) {
    using std::atanh;
    const double rc = std::sqrt(c);
    const S n = norm(y);
    std::vector<S> out(y.size(), S(0.0));
    if (scalar_value(n) < 1e-300) return out;
    const S scale = atanh(clamp_unit(rc * n)) / (rc * n);
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = scale * y[i];
    return out;
}

}  // namespace detail

// Returns v unchanged if already interior, otherwise rescales it to norm
// (1 - boundary_eps)/sqrt(c) keeping the direction. Throws on non-finite input.
BallPoint project_to_ball(std::vector<double> v, const BallConfig& cfg);

// lambda_x^c = 2 / (1 - c||x||^2)
double conformal_factor(const BallPoint& x);

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);

// Geodesic distance d_c(x, y); symmetric, zero iff x == y.
double dist(const BallPoint& x, const BallPoint& y);

BallPoint exp_map(const BallPoint& x, const TangentVec& v);
TangentVec log_map(const BallPoint& x, const BallPoint& y);

BallPoint exp0(const TangentVec& v, const BallConfig& cfg);
TangentVec log0(const BallPoint& y);

KleinPoint to_klein(const BallPoint& p);
BallPoint to_poincare(const KleinPoint& k, const BallConfig& cfg);

// gamma(k) = 1/sqrt(1 - c||k||^2), >= 1 with equality only at the origin.
double lorentz_factor(const KleinPoint& k);

// Lorentz-weighted mean in the Klein model, mapped back to the ball.
// Permutation invariant; the result's norm never exceeds the largest input
// norm (up to rounding). Throws on an empty sequence.
BallPoint einstein_midpoint(std::span<const BallPoint> points);

double norm_of(const BallPoint& p);

}  // namespace hvr::geo
