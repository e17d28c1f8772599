#include "hvr/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hvr::geo {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_same_space(const BallConfig& a, const BallConfig& b) {
    if (!same_space(a, b))
        throw ConfigError("ball configuration mismatch (curvature or dimension differ)");
}

}  // namespace

void BallConfig::validate() const {
    if (!(curvature > 0.0) || !std::isfinite(curvature))
        throw ConfigError("curvature must be positive and finite");
    if (dim < 1) throw ConfigError("dimension must be >= 1");
    if (!(boundary_eps > 0.0) || boundary_eps > 1e-3)
        throw ConfigError("boundary_eps must lie in (0, 1e-3]");
}

bool same_space(const BallConfig& a, const BallConfig& b) {
    return a.curvature == b.curvature && a.dim == b.dim;
}

BallPoint project_to_ball(std::vector<double> v, const BallConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(v.size()) != cfg.dim)
        throw ConfigError("vector length does not match ball dimension");
    if (!all_finite(v)) throw InvalidInputError("non-finite coordinate");

    const double rc = std::sqrt(cfg.curvature);
    const double n = detail::norm(v);
    const double max_norm = (1.0 - cfg.boundary_eps) / rc;
    if (n > max_norm) {
        const double s = max_norm / n;
        for (double& x : v) x *= s;
    }
    return BallPoint{std::move(v), cfg};
}

double conformal_factor(const BallPoint& x) {
    return 2.0 / (1.0 - x.cfg.curvature * detail::dot(x.coords, x.coords));
}

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
    check_same_space(x.cfg, y.cfg);
    return project_to_ball(detail::mobius_add(x.coords, y.coords, x.cfg.curvature), x.cfg);
}

double dist(const BallPoint& x, const BallPoint& y) {
    check_same_space(x.cfg, y.cfg);
    if (x.coords == y.coords) return 0.0;  // exact identity of indiscernibles
    return detail::dist(x.coords, y.coords, x.cfg.curvature);
}

BallPoint exp_map(const BallPoint& x, const TangentVec& v) {
    if (!all_finite(v.coords)) throw InvalidInputError("non-finite tangent vector");
    const double c = x.cfg.curvature;
    const double rc = std::sqrt(c);
    const double n = detail::norm(v.coords);
    if (n < 1e-300) return x;
    const double lam = conformal_factor(x);
    const double scale = std::tanh(rc * lam * n / 2.0) / (rc * n);
    std::vector<double> second(v.coords.size());
    for (std::size_t i = 0; i < second.size(); ++i) second[i] = scale * v.coords[i];
    return project_to_ball(detail::mobius_add(x.coords, second, c), x.cfg);
}

TangentVec log_map(const BallPoint& x, const BallPoint& y) {
    check_same_space(x.cfg, y.cfg);
    const double c = x.cfg.curvature;
    const double rc = std::sqrt(c);
    const std::vector<double> m =
        detail::mobius_add(detail::negated(x.coords), y.coords, c);
    const double n = detail::norm(m);
    TangentVec out{std::vector<double>(m.size(), 0.0)};
    if (n < 1e-300) return out;
    const double lam = conformal_factor(x);
    const double scale =
        (2.0 / (rc * lam)) * std::atanh(detail::clamp_unit(rc * n)) / n;
    for (std::size_t i = 0; i < m.size(); ++i) out.coords[i] = scale * m[i];
    return out;
}

BallPoint exp0(const TangentVec& v, const BallConfig& cfg) {
    if (!all_finite(v.coords)) throw InvalidInputError("non-finite tangent vector");
    return project_to_ball(detail::exp0(v.coords, cfg.curvature), cfg);
}

TangentVec log0(const BallPoint& y) {
    return TangentVec{detail::log0(y.coords, y.cfg.curvature)};
}

KleinPoint to_klein(const BallPoint& p) {
    const double c = p.cfg.curvature;
    const double denom = 1.0 + c * detail::dot(p.coords, p.coords);
    KleinPoint k{std::vector<double>(p.coords.size()), c};
    for (std::size_t i = 0; i < k.coords.size(); ++i) k.coords[i] = 2.0 * p.coords[i] / denom;
    return k;
}

BallPoint to_poincare(const KleinPoint& k, const BallConfig& cfg) {
    const double c = cfg.curvature;
    const double k2 = std::min(detail::dot(k.coords, k.coords) * c, 1.0);
    const double denom = 1.0 + std::sqrt(1.0 - k2);
    std::vector<double> p(k.coords.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = k.coords[i] / denom;
    return project_to_ball(std::move(p), cfg);
}

double lorentz_factor(const KleinPoint& k) {
    const double k2 = k.curvature * detail::dot(k.coords, k.coords);
    return 1.0 / std::sqrt(std::max(1.0 - k2, 1e-300));
}

BallPoint einstein_midpoint(std::span<const BallPoint> points) {
    if (points.empty()) throw InvalidInputError("einstein_midpoint of empty sequence");
    if (points.size() == 1) return points.front();  // identity, kept bit-exact
    const BallConfig cfg = points.front().cfg;
    const std::size_t n = points.size();

    // Sum weighted terms in sorted order per coordinate so the result is
    // bit-identical under any permutation of the inputs.
    std::vector<double> gammas(n);
    std::vector<std::vector<double>> terms(cfg.dim, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        check_same_space(cfg, points[j].cfg);
        const KleinPoint k = to_klein(points[j]);
        gammas[j] = lorentz_factor(k);
        for (int i = 0; i < cfg.dim; ++i) terms[i][j] = gammas[j] * k.coords[i];
    }
    auto ordered_sum = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc;
    };
    const double total = ordered_sum(gammas);
    std::vector<double> acc(cfg.dim);
    for (int i = 0; i < cfg.dim; ++i) acc[i] = ordered_sum(terms[i]) / total;
    return to_poincare(KleinPoint{std::move(acc), cfg.curvature}, cfg);
}

double norm_of(const BallPoint& p) { return detail::norm(p.coords); }

}  // namespace hvr::geo
