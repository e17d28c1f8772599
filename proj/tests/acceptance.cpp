// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "hvr/index.hpp"
#include "hvr/losses.hpp"
#include "hvr/synth.hpp"

using namespace hvr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool ok) {
    std::printf("%s  criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, name);
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

geo::BallPoint random_interior(std::mt19937_64& rng, const geo::BallConfig& cfg,
                               double max_radius) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(cfg.dim);
    double n2 = 0.0;
    for (double& x : v) {
        x = gauss(rng);
        n2 += x * x;
    }
    const double target =
        std::uniform_real_distribution<double>(0.0, max_radius)(rng) / std::sqrt(cfg.curvature);
    for (double& x : v) x *= target / std::max(std::sqrt(n2), 1e-12);
    return geo::project_to_ball(std::move(v), cfg);
}

double arccosh_distance(const geo::BallPoint& x, const geo::BallPoint& y) {
    double diff2 = 0.0, nx2 = 0.0, ny2 = 0.0;
    for (int i = 0; i < x.cfg.dim; ++i) {
        const double d = x.coords[i] - y.coords[i];
        diff2 += d * d;
        nx2 += x.coords[i] * x.coords[i];
        ny2 += y.coords[i] * y.coords[i];
    }
    return std::acosh(1.0 + 2.0 * diff2 / ((1.0 - nx2) * (1.0 - ny2)));
}

// ---- 1: geometry suite ------------------------------------------------------

bool geometry_suite() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    bool ok = true;
    for (int dim : {2, 8, 64}) {
        const geo::BallConfig cfg{1.0, dim, 1e-5};
        std::normal_distribution<double> gauss(0.0, 1.0);
        const int trials = 10000 / 3 + 1;
        for (int i = 0; i < trials; ++i) {
            const auto x = random_interior(rng, cfg, 0.95);
            const auto y = random_interior(rng, cfg, 0.95);
            const auto z = random_interior(rng, cfg, 0.95);
            ok &= std::abs(geo::dist(x, y) - geo::dist(y, x)) <= 1e-12;
            ok &= geo::dist(x, x) == 0.0;
            ok &= geo::dist(x, z) <= geo::dist(x, y) + geo::dist(y, z) + 1e-9;

            const double d3 = geo::dist(x, y);
            const double d2 = arccosh_distance(x, y);
            ok &= std::abs(d3 - d2) <= 1e-9 * std::max(1.0, std::abs(d2));

            // exp/log roundtrip with tangent norm <= 5.
            geo::TangentVec v{std::vector<double>(dim)};
            for (double& e : v.coords) e = gauss(rng);
            const double target = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
            const double n = geo::detail::norm(v.coords);
            for (double& e : v.coords) e *= target / std::max(n, 1e-12);
            // Base kept near the origin so lambda_x * ||v|| stays inside the
            // boundary clamp for the full tangent-norm range.
            const auto base = random_interior(rng, cfg, 0.3);
            const auto fwd = geo::exp_map(base, v);
            const auto back = geo::log_map(base, fwd);
            for (int d = 0; d < dim; ++d)
                ok &= std::abs(back.coords[d] - v.coords[d]) <=
                      1e-9 * std::max(1.0, std::abs(v.coords[d]));

            const auto y0 = geo::exp0(v, cfg);
            const auto v0 = geo::log0(y0);
            for (int d = 0; d < dim; ++d)
                ok &= std::abs(v0.coords[d] - v.coords[d]) <=
                      1e-9 * std::max(1.0, std::abs(v.coords[d]));
        }
    }
    return ok && seconds_since(start) < 10.0;
}

// ---- 2: midpoint suite ------------------------------------------------------

bool midpoint_suite() {
    bool ok = true;
    const geo::BallConfig cfg1{1.0, 1, 1e-5};
    const std::vector<geo::BallPoint> pair{geo::project_to_ball({0.0}, cfg1),
                                           geo::project_to_ball({0.6}, cfg1)};
    ok &= std::abs(geo::einstein_midpoint(pair).coords[0] - 1.0 / 3.0) <= 1e-12;

    std::mt19937_64 rng(99);
    const geo::BallConfig cfg{1.0, 8, 1e-5};
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<geo::BallPoint> group;
        double max_norm = 0.0;
        const int n = 2 + static_cast<int>(rng() % 7);
        for (int i = 0; i < n; ++i) {
            group.push_back(random_interior(rng, cfg, 0.95));
            max_norm = std::max(max_norm, geo::norm_of(group.back()));
        }
        const auto mid = geo::einstein_midpoint(group);
        ok &= geo::norm_of(mid) <= max_norm + 1e-9;

        std::vector<geo::BallPoint> shuffled(group.rbegin(), group.rend());
        if (n > 2) std::swap(shuffled[0], shuffled[n / 2]);
        ok &= geo::einstein_midpoint(shuffled).coords == mid.coords;  // exact
    }
    return ok;
}

// ---- shared synthetic fixtures ---------------------------------------------

struct Fixture {
    geo::BallConfig ball;
    hierarchy::PoolingConfig pooling;
    index::DatabaseIndex db;
    synth::SyntheticDataset data;
    std::vector<geo::BallPoint> queries;
};

Fixture make_fixture(int n_panoramas, int channels, int grid, int levels, double sigma,
                     std::uint64_t seed, int max_queries) {
    synth::SceneSpec spec;
    spec.n_panoramas = n_panoramas;
    spec.channels = channels;
    spec.grid_height = grid;
    spec.grid_width = grid;
    spec.levels = levels;
    spec.noise_sigma = sigma;
    spec.queries_per_panorama = 1;
    spec.seed = seed;

    Fixture f;
    f.ball = geo::BallConfig{1.0, channels, 1e-5};
    f.pooling = hierarchy::default_pooling(levels, channels, channels, seed);
    f.data = synth::generate_dataset(spec);
    if (static_cast<int>(f.data.queries.size()) > max_queries)
        f.data.queries.resize(max_queries);
    f.db = index::build_index(f.data.panoramas, f.pooling, f.ball,
                              index::level_mask({1, levels}));
    for (const auto& q : f.data.queries)
        f.queries.push_back(hierarchy::embed_query(q.grid, f.pooling, f.ball));
    return f;
}

// ---- 3: oracle equivalence --------------------------------------------------

bool oracle_equivalence(const Fixture& f) {
    const int n = static_cast<int>(f.db.size());
    index::RetrievalConfig cfg;
    cfg.kprime = n;
    cfg.k = n;
    cfg.rescore_levels = {5};
    cfg.weights = {{1, 0.0}, {5, 1.0}};

    bool ok = true;
    for (const auto& hq : f.queries) {
        index::EvalCounter c1, c2;
        const auto hier = index::retrieve(hq, f.db, cfg, c1);
        const auto exact = index::exhaustive_search(hq, f.db, n, c2);
        if (hier.size() != exact.size()) return false;
        for (std::size_t i = 0; i < hier.size(); ++i) ok &= hier[i].id == exact[i].id;
    }
    return ok;
}

// ---- 4: shortlist containment ----------------------------------------------

bool shortlist_containment(const Fixture& f) {
    index::RetrievalConfig cfg;
    cfg.kprime = 50;
    cfg.k = 1;
    cfg.rescore_levels = {5};
    cfg.weights = {{1, 0.0}, {5, 1.0}};

    bool ok = true;
    int covered = 0;
    for (const auto& hq : f.queries) {
        index::EvalCounter c;
        const auto exact_top = index::exhaustive_search(hq, f.db, 1, c);
        const auto shortlist = index::coarse_search(hq, f.db, 50, c);
        const bool contained =
            std::any_of(shortlist.begin(), shortlist.end(),
                        [&](const auto& e) { return e.first == exact_top[0].id; });
        if (!contained) continue;
        ++covered;
        const auto final_top = index::retrieve(hq, f.db, cfg, c);
        ok &= !final_top.empty() && final_top[0].id == exact_top[0].id;
    }
    return ok && covered > 0;
}

// ---- 5: efficiency accounting ----------------------------------------------

bool efficiency_accounting() {
    const auto f = make_fixture(10000, 4, 2, 5, 0.1, 11, 1);
    index::RetrievalConfig cfg;
    cfg.kprime = 100;
    cfg.k = 10;
    cfg.rescore_levels = {5};
    cfg.weights = {{1, 0.5}, {5, 0.5}};

    index::EvalCounter hier, exh;
    index::retrieve(f.queries[0], f.db, cfg, hier);
    index::exhaustive_search(f.queries[0], f.db, 10, exh);
    return hier.distance_evals == 11600 && exh.distance_evals == 160000;
}

// ---- 6: storage ratio -------------------------------------------------------

bool storage_ratio() {
    synth::SceneSpec spec;
    spec.n_panoramas = 3;
    spec.channels = 2048;
    spec.grid_height = 2;
    spec.grid_width = 2;
    spec.levels = 5;
    spec.noise_sigma = 0.0;
    spec.queries_per_panorama = 0;
    spec.seed = 21;
    const auto data = synth::generate_dataset(spec);
    const geo::BallConfig ball{1.0, 2048, 1e-5};
    const auto pooling = hierarchy::default_pooling(5, 2048, 2048, 21);

    const auto variant_payload = [&](const std::vector<int>& levels) {
        const auto db = index::build_index(data.panoramas, pooling, ball,
                                           index::level_mask(levels));
        const fs::path path = fs::temp_directory_path() / "hvr_acc_storage.idx";
        index::persist_index(db, path);
        const std::uint64_t payload = fs::file_size(path) - index::index_header_bytes();
        fs::remove(path);
        return static_cast<double>(payload);
    };

    const double ratio = variant_payload({1, 4}) / variant_payload({1, 5});
    const double expected = 147.6 / 278.8;  // ~9/17
    return std::abs(ratio - expected) / expected <= 0.05;
}

// ---- 7: gradient checks -----------------------------------------------------

losses::TripletBatch random_batch(std::mt19937_64& rng) {
    const geo::BallConfig cfg{1.0, 3, 1e-5};
    auto tree = [&]() {
        hierarchy::DescriptorTree t;
        t.levels = 3;
        t.points.resize(3);
        for (int l = 1; l <= 3; ++l)
            for (int k = 0; k < (1 << (l - 1)); ++k)
                t.points[l - 1].push_back(random_interior(rng, cfg, 0.7));
        return t;
    };
    losses::TripletBatch batch;
    batch.query = random_interior(rng, cfg, 0.7);
    batch.positive = tree();
    batch.negatives = {tree(), tree()};
    batch.margin = 0.1;
    return batch;
}

bool gradient_checks() {
    const auto start = Clock::now();
    std::mt19937_64 rng(555);
    bool ok = true;
    for (losses::LossKind kind :
         {losses::LossKind::Hier, losses::LossKind::Hyp, losses::LossKind::Euc}) {
        int checked = 0;
        int attempts = 0;
        while (checked < 100 && attempts < 2000) {
            ++attempts;
            const auto batch = random_batch(rng);
            const auto report = losses::grad_check(batch, kind);
            if (report.near_kink) continue;  // non-smooth configuration, resample
            ok &= report.max_rel_error < 1e-4;
            ++checked;
        }
        ok &= checked == 100;
    }
    return ok && seconds_since(start) < 30.0;
}

// ---- 8: toy optimization ----------------------------------------------------

bool toy_optimization() {
    synth::SceneSpec spec;
    spec.n_panoramas = 2;
    spec.channels = 4;
    spec.grid_height = 3;
    spec.grid_width = 3;
    spec.levels = 3;
    spec.noise_sigma = 0.05;
    spec.queries_per_panorama = 1;
    spec.seed = 77;
    const auto data = synth::generate_dataset(spec);
    const geo::BallConfig ball{1.0, 4, 1e-5};
    const auto pooling = hierarchy::default_pooling(3, 4, 4, 77);

    losses::TripletBatch batch;
    batch.query = hierarchy::embed_query(data.queries[0].grid, pooling, ball);
    batch.positive = hierarchy::build_tree(data.panoramas[0].leaves, pooling, ball);
    batch.negatives = {hierarchy::build_tree(data.panoramas[1].leaves, pooling, ball)};
    batch.margin = 0.1;

    const double initial = losses::total_loss(batch);
    for (int step = 0; step < 200; ++step) {
        const auto g = losses::grad(batch, losses::LossKind::Total);
        losses::rsgd_step(batch, g, 0.05);
    }
    const double final = losses::total_loss(batch);
    return initial > 0.0 && final < 0.5 * initial;
}

// ---- 9: recall trade-off ----------------------------------------------------

bool recall_tradeoff(const Fixture& f, double* out_recall_l = nullptr) {
    const auto start = Clock::now();

    std::vector<std::vector<index::ScoredResult>> exact(f.queries.size());
    for (std::size_t i = 0; i < f.queries.size(); ++i) {
        index::EvalCounter c;
        exact[i] = index::exhaustive_search(f.queries[i], f.db, 10, c);
    }
    const double recall_sw = synth::evaluate_recall(exact, f.data.queries, 1);

    // O preset: coarse ranking only.
    index::RetrievalConfig coarse_cfg;
    coarse_cfg.kprime = 100;
    coarse_cfg.k = 10;
    coarse_cfg.weights = {{1, 1.0}};
    std::vector<std::vector<index::ScoredResult>> coarse(f.queries.size());
    for (std::size_t i = 0; i < f.queries.size(); ++i) {
        index::EvalCounter c;
        coarse[i] = index::retrieve(f.queries[i], f.db, coarse_cfg, c);
    }
    const double recall_o = synth::evaluate_recall(coarse, f.data.queries, 1);

    // L-variant with a small grid search over the fusion weights.
    double recall_l = 0.0;
    for (double w1 : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        index::RetrievalConfig cfg;
        cfg.kprime = 100;
        cfg.k = 10;
        cfg.rescore_levels = {5};
        cfg.weights = {{1, w1}, {5, 1.0 - w1}};
        if (w1 == 1.0) cfg.weights[5] = 0.0;
        std::vector<std::vector<index::ScoredResult>> res(f.queries.size());
        for (std::size_t i = 0; i < f.queries.size(); ++i) {
            index::EvalCounter c;
            res[i] = index::retrieve(f.queries[i], f.db, cfg, c);
        }
        recall_l = std::max(recall_l, synth::evaluate_recall(res, f.data.queries, 1));
    }
    if (out_recall_l) *out_recall_l = recall_l;

    std::printf("      recall@1: exhaustive %.4f, L-variant %.4f, O %.4f\n", recall_sw,
                recall_l, recall_o);
    return recall_l >= 0.95 * recall_sw && recall_o <= recall_l &&
           seconds_since(start) < 120.0;
}

// ---- 10: norm hierarchy -----------------------------------------------------

bool norm_hierarchy(const Fixture& f) {
    double sum1 = 0.0, sum5 = 0.0;
    std::size_t n1 = 0, n5 = 0;
    const double rc = std::sqrt(f.ball.curvature);
    for (const auto& rec : f.db.records) {
        for (const auto& p : rec.levels[0]) {
            sum1 += rc * geo::norm_of(p);
            ++n1;
        }
        for (const auto& p : rec.levels[4]) {
            sum5 += rc * geo::norm_of(p);
            ++n5;
        }
    }
    return n1 > 0 && n5 > 0 && (sum1 / n1) < (sum5 / n5);
}

// ---- 11: persistence --------------------------------------------------------

bool persistence(const Fixture& f) {
    const fs::path path = fs::temp_directory_path() / "hvr_acc_persist.idx";
    index::persist_index(f.db, path);
    const auto loaded = index::load_index(path);

    index::RetrievalConfig cfg;
    cfg.kprime = 20;
    cfg.k = 10;
    cfg.rescore_levels = {5};
    cfg.weights = {{1, 0.5}, {5, 0.5}};

    bool ok = true;
    const std::size_t n_queries = std::min<std::size_t>(50, f.queries.size());
    for (std::size_t i = 0; i < n_queries; ++i) {
        index::EvalCounter c1, c2;
        const auto a = index::retrieve(f.queries[i], f.db, cfg, c1);
        const auto b = index::retrieve(f.queries[i], loaded, cfg, c2);
        if (a.size() != b.size()) return false;
        for (std::size_t j = 0; j < a.size(); ++j)
            ok &= a[j].id == b[j].id && a[j].fused == b[j].fused;
    }

    // Corrupted header must be rejected without yielding a partial index.
    {
        std::fstream fstream(path, std::ios::in | std::ios::out | std::ios::binary);
        fstream.write("BAD!", 4);
    }
    try {
        index::load_index(path);
        ok = false;
    } catch (const FormatError&) {
    }
    fs::remove(path);
    return ok;
}

}  // namespace

int main() {
    report(1, "geometry suite (metric axioms, distance forms, map roundtrips)",
           geometry_suite());
    report(2, "einstein midpoint suite", midpoint_suite());

    const auto f500 = make_fixture(500, 16, 3, 5, 0.1, 42, 100);
    report(3, "hierarchical retrieval equals the exhaustive oracle", oracle_equivalence(f500));
    report(4, "shortlist containment preserves the exhaustive top-1",
           shortlist_containment(f500));

    report(5, "distance evaluation accounting (11600 vs 160000)", efficiency_accounting());
    report(6, "stored-level payload ratio matches ~9/17", storage_ratio());
    report(7, "finite-difference gradient checks (3 losses x 100 configs)",
           gradient_checks());
    report(8, "200 riemannian steps halve the toy training loss", toy_optimization());

    const auto f2000 = make_fixture(2000, 16, 3, 5, 0.1, 7, 500);
    report(9, "recall trade-off ordering across presets", recall_tradeoff(f2000));
    report(10, "mean descriptor norm grows with the level", norm_hierarchy(f2000));
    report(11, "persistence roundtrip and fail-closed corruption handling",
           persistence(f2000));

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
