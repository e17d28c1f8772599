#include <cmath>
#include <random>

#include "doctest.h"
#include "hvr/geometry.hpp"

using namespace hvr;
using geo::BallConfig;
using geo::BallPoint;

namespace {

BallConfig cfg1d() { return BallConfig{1.0, 1, 1e-5}; }

BallPoint pt(std::vector<double> v, const BallConfig& cfg) {
    return geo::project_to_ball(std::move(v), cfg);
}

BallPoint random_interior(std::mt19937_64& rng, const BallConfig& cfg, double max_radius) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, max_radius);
    std::vector<double> v(cfg.dim);
    double n2 = 0.0;
    for (double& x : v) {
        x = gauss(rng);
        n2 += x * x;
    }
    const double target = uniform(rng) / std::sqrt(cfg.curvature);
    const double scale = target / std::max(std::sqrt(n2), 1e-12);
    for (double& x : v) x *= scale;
    return pt(std::move(v), cfg);
}

// Independent geodesic-distance oracle at c=1:
// arccosh(1 + 2||x-y||^2 / ((1-||x||^2)(1-||y||^2))).
double arccosh_distance(const BallPoint& x, const BallPoint& y) {
    double diff2 = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (int i = 0; i < x.cfg.dim; ++i) {
        const double d = x.coords[i] - y.coords[i];
        diff2 += d * d;
        nx2 += x.coords[i] * x.coords[i];
        ny2 += y.coords[i] * y.coords[i];
    }
    return std::acosh(1.0 + 2.0 * diff2 / ((1.0 - nx2) * (1.0 - ny2)));
}

}  // namespace

TEST_CASE("project_to_ball clamps only outside the interior") {
    const BallConfig cfg{1.0, 3, 1e-5};
    const auto origin = pt({0.0, 0.0, 0.0}, cfg);
    CHECK(geo::norm_of(origin) == 0.0);

    const auto inside = pt({0.3, 0.4, 0.0}, cfg);  // norm 0.5
    CHECK(inside.coords[0] == 0.3);
    CHECK(inside.coords[1] == 0.4);

    const auto clamped = pt({2.0, 0.0, 0.0}, cfg);
    CHECK(clamped.coords[0] == doctest::Approx(0.99999).epsilon(1e-12));
    CHECK(clamped.coords[1] == 0.0);

    CHECK_THROWS_AS(pt({std::nan(""), 0.0, 0.0}, cfg), InvalidInputError);
    CHECK_THROWS_AS(pt({1.0, 0.0}, cfg), ConfigError);
}

TEST_CASE("conformal factor") {
    CHECK(geo::conformal_factor(pt({0.0}, cfg1d())) == doctest::Approx(2.0));
    CHECK(geo::conformal_factor(pt({0.5}, cfg1d())) == doctest::Approx(8.0 / 3.0));
    CHECK(geo::conformal_factor(pt({0.995}, cfg1d())) > 100.0);
}

TEST_CASE("mobius addition identities and 1-D oracle") {
    const BallConfig cfg{1.0, 2, 1e-5};
    const auto zero = pt({0.0, 0.0}, cfg);
    const auto y = pt({0.2, -0.3}, cfg);
    const auto id = geo::mobius_add(zero, y);
    CHECK(id.coords[0] == doctest::Approx(y.coords[0]).epsilon(1e-14));
    CHECK(id.coords[1] == doctest::Approx(y.coords[1]).epsilon(1e-14));

    const auto neg = pt({-0.2, 0.3}, cfg);
    const auto inv = geo::mobius_add(neg, y);
    CHECK(geo::norm_of(inv) < 1e-14);

    // 1-D addition is tanh(artanh(a) + artanh(b)).
    const auto sum = geo::mobius_add(pt({0.3}, cfg1d()), pt({0.4}, cfg1d()));
    CHECK(sum.coords[0] == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(sum.coords[0] ==
          doctest::Approx(std::tanh(std::atanh(0.3) + std::atanh(0.4))).epsilon(1e-12));

    const BallConfig other{2.0, 2, 1e-5};
    CHECK_THROWS_AS(geo::mobius_add(zero, pt({0.1, 0.1}, other)), ConfigError);
}

TEST_CASE("distance closed forms") {
    const auto x = pt({0.3}, cfg1d());
    CHECK(geo::dist(x, x) == 0.0);
    CHECK(geo::dist(pt({0.0}, cfg1d()), pt({0.5}, cfg1d())) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
    // Same value from the arccosh form.
    CHECK(arccosh_distance(pt({0.0}, cfg1d()), pt({0.5}, cfg1d())) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("distance agrees with the arccosh oracle at c=1") {
    std::mt19937_64 rng(11);
    for (int dim : {2, 8, 64}) {
        const BallConfig cfg{1.0, dim, 1e-5};
        for (int i = 0; i < 500; ++i) {
            const auto x = random_interior(rng, cfg, 0.9);
            const auto y = random_interior(rng, cfg, 0.9);
            const double a = geo::dist(x, y);
            const double b = arccosh_distance(x, y);
            CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
        }
    }
}

TEST_CASE("metric axioms on random points") {
    std::mt19937_64 rng(13);
    for (int dim : {2, 8}) {
        const BallConfig cfg{1.0, dim, 1e-5};
        for (int i = 0; i < 500; ++i) {
            const auto x = random_interior(rng, cfg, 0.95);
            const auto y = random_interior(rng, cfg, 0.95);
            const auto z = random_interior(rng, cfg, 0.95);
            CHECK(std::abs(geo::dist(x, y) - geo::dist(y, x)) <= 1e-12);
            CHECK(geo::dist(x, x) == 0.0);
            CHECK(geo::dist(x, z) <= geo::dist(x, y) + geo::dist(y, z) + 1e-9);
        }
    }
}

TEST_CASE("exp and log maps invert each other") {
    std::mt19937_64 rng(17);
    const BallConfig cfg{1.0, 4, 1e-5};

    const auto base = random_interior(rng, cfg, 0.6);
    CHECK(geo::dist(geo::exp_map(base, geo::TangentVec{{0, 0, 0, 0}}), base) == 0.0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const auto x = random_interior(rng, cfg, 0.6);
        geo::TangentVec v{std::vector<double>(cfg.dim)};
        for (double& e : v.coords) e = gauss(rng);
        const double n = geo::detail::norm(v.coords);
        // Keep lambda_x * ||v|| well inside the boundary clamp so the
        // roundtrip is not cut off by the interior projection.
        const double target = std::uniform_real_distribution<double>(0.0, 1.2)(rng);
        for (double& e : v.coords) e *= target / std::max(n, 1e-12);

        const auto y = geo::exp_map(x, v);
        const auto back = geo::log_map(x, y);
        for (int d = 0; d < cfg.dim; ++d)
            CHECK(back.coords[d] == doctest::Approx(v.coords[d]).epsilon(1e-9));
        CHECK(geo::detail::norm(geo::log_map(x, x).coords) < 1e-12);
    }
}

TEST_CASE("exp0 and log0") {
    const BallConfig cfg = cfg1d();
    const auto z = geo::exp0(geo::TangentVec{{0.0}}, cfg);
    CHECK(geo::norm_of(z) == 0.0);
    const auto p = geo::exp0(geo::TangentVec{{0.8}}, cfg);
    CHECK(p.coords[0] == doctest::Approx(std::tanh(0.8)).epsilon(1e-12));
    CHECK(geo::log0(pt({0.5}, cfg)).coords[0] ==
          doctest::Approx(std::atanh(0.5)).epsilon(1e-12));
    // ||log0(y)|| equals half the origin distance scale: dist(0,y) = 2 artanh(||y||).
    CHECK(geo::dist(pt({0.0}, cfg), pt({0.5}, cfg)) ==
          doctest::Approx(2.0 * std::atanh(0.5)).epsilon(1e-12));

    std::mt19937_64 rng(19);
    const BallConfig cfg8{1.0, 8, 1e-5};
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        geo::TangentVec v{std::vector<double>(8)};
        for (double& e : v.coords) e = 0.5 * gauss(rng);
        const auto y = geo::exp0(v, cfg8);
        CHECK(geo::norm_of(y) < 1.0);
        const auto back = geo::log0(y);
        for (int d = 0; d < 8; ++d)
            CHECK(back.coords[d] == doctest::Approx(v.coords[d]).epsilon(1e-9));
    }
}

TEST_CASE("klein conversions") {
    const BallConfig cfg = cfg1d();
    const auto z = geo::to_klein(pt({0.0}, cfg));
    CHECK(z.coords[0] == 0.0);
    const auto k = geo::to_klein(pt({0.6}, cfg));
    CHECK(k.coords[0] == doctest::Approx(15.0 / 17.0).epsilon(1e-14));

    std::mt19937_64 rng(23);
    const BallConfig cfg3{1.0, 3, 1e-5};
    for (int i = 0; i < 200; ++i) {
        const auto p = random_interior(rng, cfg3, 0.95);
        const auto round = geo::to_poincare(geo::to_klein(p), cfg3);
        for (int d = 0; d < 3; ++d)
            CHECK(round.coords[d] == doctest::Approx(p.coords[d]).epsilon(1e-12));
    }
}

TEST_CASE("lorentz factor") {
    CHECK(geo::lorentz_factor(geo::KleinPoint{{0.0}, 1.0}) == 1.0);
    CHECK(geo::lorentz_factor(geo::KleinPoint{{15.0 / 17.0}, 1.0}) ==
          doctest::Approx(17.0 / 8.0).epsilon(1e-13));
    // Monotone in the norm, >= 1 off the origin.
    double prev = 1.0;
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double g = geo::lorentz_factor(geo::KleinPoint{{r}, 1.0});
        CHECK(g > prev);
        prev = g;
    }
}

TEST_CASE("einstein midpoint") {
    const BallConfig cfg = cfg1d();
    const auto p = pt({0.37}, cfg);
    const std::vector<BallPoint> single{p};
    CHECK(geo::einstein_midpoint(single).coords[0] == doctest::Approx(0.37).epsilon(1e-14));

    const std::vector<BallPoint> copies(5, p);
    CHECK(geo::einstein_midpoint(copies).coords[0] == doctest::Approx(0.37).epsilon(1e-13));

    // Exact rational case: Klein midpoint of {0, 0.6} maps back to 1/3.
    const std::vector<BallPoint> pair{pt({0.0}, cfg), pt({0.6}, cfg)};
    CHECK(geo::einstein_midpoint(pair).coords[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));

    CHECK_THROWS_AS(geo::einstein_midpoint(std::span<const BallPoint>{}), InvalidInputError);
}

TEST_CASE("einstein midpoint permutation invariance and norm contraction") {
    std::mt19937_64 rng(29);
    const BallConfig cfg{1.0, 4, 1e-5};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BallPoint> points;
        double max_norm = 0.0;
        for (int i = 0; i < 6; ++i) {
            points.push_back(random_interior(rng, cfg, 0.95));
            max_norm = std::max(max_norm, geo::norm_of(points.back()));
        }
        const auto mid = geo::einstein_midpoint(points);
        CHECK(geo::norm_of(mid) <= max_norm + 1e-9);

        std::vector<BallPoint> shuffled(points.rbegin(), points.rend());
        std::swap(shuffled[0], shuffled[3]);
        const auto mid2 = geo::einstein_midpoint(shuffled);
        for (int d = 0; d < cfg.dim; ++d) CHECK(mid2.coords[d] == mid.coords[d]);
    }
}
