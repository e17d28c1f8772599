// Command-line surface: dataset synthesis, index build, querying, Fig-style
// coordinate export, benchmarking and invariant verification.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "hvr/index.hpp"
#include "hvr/losses.hpp"
#include "hvr/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hvr;

namespace {

std::string pano_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pano_%05d.hfgr", i);
    return buf;
}

std::string query_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "query_%05d.hfgr", i);
    return buf;
}

std::vector<int> parse_level_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

std::vector<double> parse_weight_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    synth::SceneSpec spec;
    std::string out_dir;
};

int run_synth(const SynthArgs& args) {
    const auto ds = synth::generate_dataset(args.spec);
    const fs::path root(args.out_dir);
    fs::create_directories(root / "features");
    fs::create_directories(root / "queries");

    json meta;
    meta["panoramas"] = json::array();
    for (std::size_t i = 0; i < ds.panoramas.size(); ++i) {
        const auto& p = ds.panoramas[i];
        write_grid_file(root / "features" / pano_name(static_cast<int>(i)), p.leaves);
        json rec{{"id", p.id}, {"file", pano_name(static_cast<int>(i))}};
        if (p.geotag) {
            rec["lat"] = p.geotag->latitude;
            rec["lon"] = p.geotag->longitude;
        }
        meta["panoramas"].push_back(rec);
    }
    std::ofstream(root / "features" / "meta.json") << meta.dump(2) << "\n";

    json gt;
    gt["queries"] = json::array();
    for (std::size_t i = 0; i < ds.queries.size(); ++i) {
        const auto& q = ds.queries[i];
        write_grid_file(root / "queries" / query_name(static_cast<int>(i)), {q.grid});
        gt["queries"].push_back({{"file", query_name(static_cast<int>(i))},
                                 {"panorama_id", q.panorama_id},
                                 {"leaf", q.leaf}});
    }
    std::ofstream(root / "queries" / "gt.json") << gt.dump(2) << "\n";
    std::cout << "wrote " << ds.panoramas.size() << " panoramas and " << ds.queries.size()
              << " queries to " << args.out_dir << "\n";
    return 0;
}

// ---- build ------------------------------------------------------------------

struct BuildArgs {
    std::string features_dir;
    int levels = 5;
    std::string store_levels = "1,5";
    double curvature = 1.0;
    int dim = 0;  // 0: use the channel count
    std::uint64_t pool_seed = 1;
    std::string out_path;
};

int run_build(const BuildArgs& args) {
    const fs::path dir(args.features_dir);
    std::vector<index::PanoramaInput> inputs;

    const fs::path meta_path = dir / "meta.json";
    if (fs::exists(meta_path)) {
        json meta;
        std::ifstream(meta_path) >> meta;
        for (const auto& rec : meta.at("panoramas")) {
            index::PanoramaInput input;
            input.id = rec.at("id").get<std::uint64_t>();
            if (rec.contains("lat"))
                input.geotag = index::Geotag{rec.at("lat").get<double>(),
                                             rec.at("lon").get<double>()};
            input.leaves = read_grid_file(dir / rec.at("file").get<std::string>());
            inputs.push_back(std::move(input));
        }
    } else {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".hfgr") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (std::size_t i = 0; i < files.size(); ++i) {
            index::PanoramaInput input;
            input.id = i;
            input.leaves = read_grid_file(files[i]);
            inputs.push_back(std::move(input));
        }
    }
    if (inputs.empty()) throw InvalidInputError("no feature files found in " + args.features_dir);

    const int channels = inputs.front().leaves.front().channels;
    const int dim = args.dim > 0 ? args.dim : channels;
    const geo::BallConfig ball{args.curvature, dim, 1e-5};
    const auto pooling =
        hierarchy::default_pooling(args.levels, channels, dim, args.pool_seed);
    const auto db = index::build_index(inputs, pooling, ball,
                                       index::level_mask(parse_level_list(args.store_levels)));
    index::persist_index(db, args.out_path);
    std::cout << "indexed " << db.size() << " panoramas (" << fs::file_size(args.out_path)
              << " bytes) -> " << args.out_path << "\n";
    return 0;
}

// ---- query ------------------------------------------------------------------

struct QueryArgs {
    std::string index_path;
    std::string query_path;
    int kprime = 100;
    std::string levels;   // e.g. "5" or "4,5"; empty means coarse only
    std::string weights;  // weight for level 1 then each rescore level
    int topk = 10;
    std::uint64_t pool_seed = 1;
    bool as_json = false;
};

index::RetrievalConfig retrieval_config(const QueryArgs& args, int db_levels) {
    index::RetrievalConfig cfg;
    cfg.kprime = args.kprime;
    cfg.k = args.topk;
    cfg.rescore_levels = parse_level_list(args.levels);
    std::vector<double> w;
    if (!args.weights.empty()) w = parse_weight_list(args.weights);
    if (w.empty()) w.assign(cfg.rescore_levels.size() + 1, 1.0);
    if (w.size() != cfg.rescore_levels.size() + 1)
        throw ConfigError("need one weight for level 1 plus one per rescore level");
    cfg.weights[1] = w[0];
    for (std::size_t i = 0; i < cfg.rescore_levels.size(); ++i)
        cfg.weights[cfg.rescore_levels[i]] = w[i + 1];
    cfg.validate(db_levels);
    return cfg;
}

geo::BallPoint embed_query_file(const fs::path& path, const index::DatabaseIndex& db,
                                std::uint64_t pool_seed) {
    const auto grids = read_grid_file(path);
    if (grids.size() != 1)
        throw InvalidInputError("query file must contain exactly one grid");
    const auto pooling = hierarchy::default_pooling(db.levels, grids[0].channels,
                                                    db.ball.dim, pool_seed);
    return hierarchy::embed_query(grids[0], pooling, db.ball);
}

int run_query(const QueryArgs& args) {
    const auto db = index::load_index(args.index_path);
    const auto cfg = retrieval_config(args, db.levels);
    const auto hq = embed_query_file(args.query_path, db, args.pool_seed);

    index::EvalCounter counter;
    const auto results = index::retrieve(hq, db, cfg, counter);
    if (args.as_json) {
        json out;
        out["eval_count"] = counter.distance_evals;
        out["results"] = json::array();
        for (const auto& r : results) {
            json item{{"rank", r.rank}, {"id", r.id}, {"score", r.fused}};
            for (const auto& [level, d] : r.level_distance)
                item["distance"][std::to_string(level)] = d;
            out["results"].push_back(item);
        }
        std::cout << out.dump(2) << "\n";
    } else {
        for (const auto& r : results)
            std::cout << r.rank << "\t" << r.id << "\t" << r.fused << "\n";
    }
    return 0;
}

// ---- viz --------------------------------------------------------------------

struct VizArgs {
    std::string index_path;
    std::string out_path;
};

int run_viz(const VizArgs& args) {
    const auto db = index::load_index(args.index_path);

    struct Row {
        std::uint64_t id;
        int level;
        int k;
        const geo::BallPoint* point;
    };
    std::vector<Row> rows;
    for (const auto& rec : db.records)
        for (int l = 1; l <= db.levels; ++l)
            if (db.has_level(l))
                for (std::size_t k = 0; k < rec.levels[l - 1].size(); ++k)
                    rows.push_back({rec.id, l, static_cast<int>(k + 1), &rec.levels[l - 1][k]});
    if (rows.empty()) throw InvalidInputError("index holds no descriptors");

    // Principal components over all exported descriptors; the angle is taken
    // in the plane of the top two.
    const int dim = db.ball.dim;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& row : rows)
        mean += Eigen::Map<const Eigen::VectorXd>(row.point->coords.data(), dim);
    mean /= static_cast<double>(rows.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& row : rows) {
        const Eigen::VectorXd centered =
            Eigen::Map<const Eigen::VectorXd>(row.point->coords.data(), dim) - mean;
        cov += centered * centered.transpose();
    }
    cov /= static_cast<double>(rows.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::VectorXd pc1 = solver.eigenvectors().col(dim - 1);
    const Eigen::VectorXd pc2 =
        dim > 1 ? Eigen::VectorXd(solver.eigenvectors().col(dim - 2))
                : Eigen::VectorXd(Eigen::VectorXd::Zero(dim));

    std::ofstream out(args.out_path);
    if (!out) throw InvalidInputError("cannot open " + args.out_path);
    out << "id,level,k,norm,angle\n";
    const double rc = std::sqrt(db.ball.curvature);
    for (const auto& row : rows) {
        const Eigen::Map<const Eigen::VectorXd> x(row.point->coords.data(), dim);
        out << row.id << "," << row.level << "," << row.k << "," << rc * x.norm() << ","
            << std::atan2(pc2.dot(x), pc1.dot(x)) << "\n";
    }
    std::cout << "wrote " << rows.size() << " descriptor rows to " << args.out_path << "\n";
    return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
    std::string index_path;
    std::string queries_dir;
    std::string mode = "hier";
    std::string preset;
    int kprime = 100;
    std::uint64_t pool_seed = 1;
    bool grid_weights = false;
    std::string report_path;
};

int run_bench(const BenchArgs& args) {
    const auto db = index::load_index(args.index_path);
    const fs::path qdir(args.queries_dir);

    json gt;
    std::ifstream gt_in(qdir / "gt.json");
    if (!gt_in) throw InvalidInputError("missing gt.json in " + args.queries_dir);
    gt_in >> gt;

    std::vector<geo::BallPoint> queries;
    std::vector<synth::QuerySample> truth;
    for (const auto& item : gt.at("queries")) {
        queries.push_back(
            embed_query_file(qdir / item.at("file").get<std::string>(), db, args.pool_seed));
        synth::QuerySample sample;
        sample.panorama_id = item.at("panorama_id").get<std::uint64_t>();
        sample.leaf = item.value("leaf", 0);
        truth.push_back(sample);
    }

    index::RetrievalConfig cfg;
    cfg.kprime = args.kprime;
    cfg.k = std::min(20, args.kprime);
    std::string mode = args.mode;
    if (args.preset == "O") {
        cfg.rescore_levels = {};
        cfg.weights = {{1, 1.0}};
    } else if (args.preset == "B") {
        cfg.rescore_levels = {std::min(4, db.levels)};
        cfg.weights = {{1, 0.5}, {cfg.rescore_levels[0], 0.5}};
    } else if (args.preset == "L") {
        cfg.rescore_levels = {db.levels};
        cfg.weights = {{1, 0.5}, {db.levels, 0.5}};
    } else if (args.preset == "SW") {
        mode = "exhaustive";
    } else if (!args.preset.empty()) {
        throw ConfigError("unknown preset: " + args.preset);
    }
    if (cfg.weights.empty()) cfg.weights = {{1, 1.0}};

    auto run_all = [&](const index::RetrievalConfig& c, double& mean_evals,
                       double& mean_micros) {
        std::vector<std::vector<index::ScoredResult>> results(queries.size());
        std::uint64_t total_evals = 0;
        double total_micros = 0.0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            index::EvalCounter counter;
            const auto start = std::chrono::steady_clock::now();
            results[i] = mode == "exhaustive"
                             ? index::exhaustive_search(queries[i], db, c.k, counter)
                             : index::retrieve(queries[i], db, c, counter);
            total_micros += std::chrono::duration<double, std::micro>(
                                std::chrono::steady_clock::now() - start)
                                .count();
            total_evals += counter.distance_evals;
        }
        mean_evals = static_cast<double>(total_evals) / queries.size();
        mean_micros = total_micros / queries.size();
        return results;
    };

    double mean_evals = 0.0, mean_micros = 0.0;
    auto results = run_all(cfg, mean_evals, mean_micros);
    if (args.grid_weights && mode != "exhaustive" && !cfg.rescore_levels.empty()) {
        double best = synth::evaluate_recall(results, truth, 1);
        for (double w1 : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
            index::RetrievalConfig c = cfg;
            c.weights[1] = w1;
            for (int l : c.rescore_levels) c.weights[l] = 1.0 - w1;
            if (w1 == 0.0 && c.rescore_levels.empty()) continue;
            double evals = 0.0, micros = 0.0;
            auto res = run_all(c, evals, micros);
            const double r = synth::evaluate_recall(res, truth, 1);
            if (r > best) {
                best = r;
                results = std::move(res);
                cfg = c;
                mean_evals = evals;
                mean_micros = micros;
            }
        }
    }

    json report;
    report["n_records"] = db.size();
    report["n_queries"] = queries.size();
    report["config"] = {{"mode", mode},
                        {"preset", args.preset},
                        {"kprime", cfg.kprime},
                        {"levels", cfg.rescore_levels},
                        {"weights", json::object()}};
    for (const auto& [l, w] : cfg.weights)
        report["config"]["weights"][std::to_string(l)] = w;
    for (int k : {1, 5, 10, 20})
        report["recall_at"][std::to_string(k)] = synth::evaluate_recall(results, truth, k);
    report["mean_eval_count"] = mean_evals;
    report["mean_query_micros"] = mean_micros;
    report["storage_bytes"] = fs::file_size(args.index_path);

    if (!args.report_path.empty())
        std::ofstream(args.report_path) << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ---- verify -----------------------------------------------------------------

bool verify_geometry() {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int dim : {2, 8}) {
        const geo::BallConfig cfg{1.0, dim, 1e-5};
        for (int i = 0; i < 1000; ++i) {
            auto sample = [&]() {
                std::vector<double> v(dim);
                for (double& x : v) x = 0.4 * gauss(rng);
                return geo::exp0(geo::TangentVec{v}, cfg);
            };
            const auto x = sample(), y = sample(), z = sample();
            if (std::abs(geo::dist(x, y) - geo::dist(y, x)) > 1e-12) return false;
            if (geo::dist(x, x) != 0.0) return false;
            if (geo::dist(x, z) > geo::dist(x, y) + geo::dist(y, z) + 1e-9) return false;
            const auto v = geo::log0(y);
            const auto back = geo::exp0(v, cfg);
            for (int d = 0; d < dim; ++d)
                if (std::abs(back.coords[d] - y.coords[d]) > 1e-9) return false;
        }
    }
    const geo::BallConfig c1{1.0, 1, 1e-5};
    const std::vector<geo::BallPoint> pair{geo::project_to_ball({0.0}, c1),
                                           geo::project_to_ball({0.6}, c1)};
    return std::abs(geo::einstein_midpoint(pair).coords[0] - 1.0 / 3.0) <= 1e-12;
}

bool verify_hierarchy() {
    for (int L : {4, 5}) {
        for (int level = 1; level <= L; ++level) {
            std::vector<bool> seen(1 << (L - 1), false);
            for (int k = 1; k <= (1 << (level - 1)); ++k)
                for (int j : hierarchy::group_indices(level, k, L)) {
                    if (seen[j - 1]) return false;
                    seen[j - 1] = true;
                }
            for (bool s : seen)
                if (!s) return false;
        }
    }
    return true;
}

bool verify_index() {
    synth::SceneSpec spec;
    spec.n_panoramas = 50;
    spec.channels = 8;
    spec.grid_height = 3;
    spec.grid_width = 3;
    spec.levels = 4;
    spec.queries_per_panorama = 1;
    spec.seed = 3;
    const auto ds = synth::generate_dataset(spec);
    const geo::BallConfig ball{1.0, 8, 1e-5};
    const auto pooling = hierarchy::default_pooling(4, 8, 8, 3);
    const auto db = index::build_index(ds.panoramas, pooling, ball, index::level_mask({1, 4}));

    index::RetrievalConfig cfg;
    cfg.kprime = 10;
    cfg.k = 5;
    cfg.rescore_levels = {4};
    cfg.weights = {{1, 0.5}, {4, 0.5}};

    const auto hq = hierarchy::embed_query(ds.queries[0].grid, pooling, ball);
    index::EvalCounter counter;
    index::retrieve(hq, db, cfg, counter);
    if (counter.distance_evals != 50 + 10 * 8) return false;

    const fs::path path = fs::temp_directory_path() / "hvr_verify.idx";
    index::persist_index(db, path);
    const auto loaded = index::load_index(path);
    fs::remove(path);
    index::EvalCounter c2;
    const auto a = index::retrieve(hq, db, cfg, counter);
    const auto b = index::retrieve(hq, loaded, cfg, c2);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].id != b[i].id || a[i].fused != b[i].fused) return false;
    return true;
}

bool verify_losses() {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const geo::BallConfig cfg{1.0, 3, 1e-5};
    auto point = [&]() {
        std::vector<double> v(3);
        for (double& x : v) x = 0.3 * gauss(rng);
        return geo::exp0(geo::TangentVec{v}, cfg);
    };
    int checked = 0;
    for (int trial = 0; trial < 100 && checked < 20; ++trial) {
        losses::TripletBatch batch;
        batch.query = point();
        auto tree = [&]() {
            hierarchy::DescriptorTree t;
            t.levels = 2;
            t.points = {{point()}, {point(), point()}};
            return t;
        };
        batch.positive = tree();
        batch.negatives = {tree()};
        batch.margin = 0.1;
        const auto report = losses::grad_check(batch, losses::LossKind::Total);
        if (report.near_kink) continue;
        if (report.max_rel_error >= 1e-4) return false;
        ++checked;
    }
    return checked == 20;
}

int run_verify() {
    struct Suite {
        const char* name;
        bool (*fn)();
    };
    const Suite suites[] = {{"geometry", verify_geometry},
                            {"hierarchy", verify_hierarchy},
                            {"index", verify_index},
                            {"losses", verify_losses}};
    int failures = 0;
    for (const auto& suite : suites) {
        const bool ok = suite.fn();
        std::cout << (ok ? "PASS" : "FAIL") << "  " << suite.name << "\n";
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical hyperbolic retrieval engine"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    int grid = 4;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--panoramas", synth_args.spec.n_panoramas)->required();
    synth_cmd->add_option("--levels", synth_args.spec.levels);
    synth_cmd->add_option("--dim", synth_args.spec.channels);
    synth_cmd->add_option("--grid", grid);
    synth_cmd->add_option("--noise", synth_args.spec.noise_sigma);
    synth_cmd->add_option("--queries", synth_args.spec.queries_per_panorama);
    synth_cmd->add_option("--seed", synth_args.spec.seed);
    synth_cmd->add_option("--out", synth_args.out_dir)->required();

    BuildArgs build_args;
    auto* build_cmd = app.add_subcommand("build", "build and persist an index");
    build_cmd->add_option("--features", build_args.features_dir)->required();
    build_cmd->add_option("--levels", build_args.levels);
    build_cmd->add_option("--store-levels", build_args.store_levels);
    build_cmd->add_option("--curvature", build_args.curvature);
    build_cmd->add_option("--dim", build_args.dim);
    build_cmd->add_option("--pool-seed", build_args.pool_seed);
    build_cmd->add_option("--out", build_args.out_path)->required();

    QueryArgs query_args;
    auto* query_cmd = app.add_subcommand("query", "query a persisted index");
    query_cmd->add_option("--index", query_args.index_path)->required();
    query_cmd->add_option("--query", query_args.query_path)->required();
    query_cmd->add_option("--kprime", query_args.kprime);
    query_cmd->add_option("--levels", query_args.levels);
    query_cmd->add_option("--weights", query_args.weights);
    query_cmd->add_option("--topk", query_args.topk);
    query_cmd->add_option("--pool-seed", query_args.pool_seed);
    query_cmd->add_flag("--json", query_args.as_json);

    VizArgs viz_args;
    auto* viz_cmd = app.add_subcommand("viz", "export descriptor norms and angles as CSV");
    viz_cmd->add_option("--index", viz_args.index_path)->required();
    viz_cmd->add_option("--out", viz_args.out_path)->required();

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "benchmark retrieval over a query set");
    bench_cmd->add_option("--index", bench_args.index_path)->required();
    bench_cmd->add_option("--queries", bench_args.queries_dir)->required();
    bench_cmd->add_option("--mode", bench_args.mode)
        ->check(CLI::IsMember({"hier", "exhaustive"}));
    bench_cmd->add_option("--preset", bench_args.preset);
    bench_cmd->add_option("--kprime", bench_args.kprime);
    bench_cmd->add_option("--pool-seed", bench_args.pool_seed);
    bench_cmd->add_flag("--grid-weights", bench_args.grid_weights);
    bench_cmd->add_option("--report", bench_args.report_path);

    auto* verify_cmd = app.add_subcommand("verify", "run the invariant suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            synth_args.spec.grid_height = grid;
            synth_args.spec.grid_width = grid;
            return run_synth(synth_args);
        }
        if (build_cmd->parsed()) return run_build(build_args);
        if (query_cmd->parsed()) return run_query(query_args);
        if (viz_cmd->parsed()) return run_viz(viz_args);
        if (bench_cmd->parsed()) return run_bench(bench_args);
        if (verify_cmd->parsed()) return run_verify();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
