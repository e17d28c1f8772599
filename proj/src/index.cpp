#include "hvr/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace hvr::index {

namespace {

constexpr char kMagic[4] = {'H', 'V', 'P', 'R'};
constexpr std::uint32_t kIndexVersion = 1;

template <class T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& in, std::uint64_t& offset, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(std::string("truncated index file reading ") + what, offset);
    offset += sizeof(T);
    return v;
}

// Round descriptor coordinates through 32-bit floats. The boundary margin
// (1e-5) dwarfs float rounding error, so the result stays interior and is
// used as-is without reprojection.
void quantize(std::vector<double>& coords) {
    for (double& x : coords) x = static_cast<double>(static_cast<float>(x));
}

const PanoramaRecord* find_record(const DatabaseIndex& index, std::uint64_t id) {
    auto it = std::lower_bound(index.records.begin(), index.records.end(), id,
                               [](const PanoramaRecord& r, std::uint64_t v) { return r.id < v; });
    if (it == index.records.end() || it->id != id) return nullptr;
    return &*it;
}

}  // namespace

void RetrievalConfig::validate(int levels) const {
    if (kprime < 1) throw ConfigError("kprime must be >= 1");
    if (k < 1 || k > kprime) throw ConfigError("k must lie in [1, kprime]");
    if (!(zscore_eps > 0.0)) throw ConfigError("zscore_eps must be positive");
    int prev = 1;
    for (int l : rescore_levels) {
        if (l < 2 || l > levels) throw ConfigError("rescore level out of range");
        if (l <= prev) throw ConfigError("rescore levels must be ascending and unique");
        prev = l;
    }
    bool any_nonzero = false;
    auto need_weight = [&](int l) {
        auto it = weights.find(l);
        if (it == weights.end()) throw ConfigError("missing weight for level " + std::to_string(l));
        if (!std::isfinite(it->second)) throw ConfigError("non-finite weight");
        if (it->second != 0.0) any_nonzero = true;
    };
    need_weight(1);
    for (int l : rescore_levels) need_weight(l);
    if (!any_nonzero) throw ConfigError("all fusion weights are zero");
}

std::uint16_t level_mask(const std::vector<int>& levels) {
    std::uint16_t mask = 0;
    for (int l : levels) {
        if (l < 1 || l > 16) throw ConfigError("level out of range for mask");
        mask |= static_cast<std::uint16_t>(1u << (l - 1));
    }
    return mask;
}

DatabaseIndex build_index(const std::vector<PanoramaInput>& inputs,
                          const hierarchy::PoolingConfig& pooling,
                          const geo::BallConfig& ball, std::uint16_t stored_mask) {
    const int levels = pooling.levels();
    if (stored_mask == 0) throw ConfigError("at least one level must be stored");
    if (stored_mask >> levels) throw ConfigError("stored level beyond tree depth");

    DatabaseIndex index;
    index.ball = ball;
    index.levels = levels;
    index.stored_mask = stored_mask;
    index.records.reserve(inputs.size());
    for (const PanoramaInput& input : inputs) {
        PanoramaRecord rec;
        rec.id = input.id;
        rec.geotag = input.geotag;
        hierarchy::DescriptorTree tree = hierarchy::build_tree(input.leaves, pooling, ball);
        rec.levels.resize(levels);
        for (int l = 1; l <= levels; ++l) {
            if (!((stored_mask >> (l - 1)) & 1u)) continue;
            rec.levels[l - 1] = std::move(tree.points[l - 1]);
            for (geo::BallPoint& p : rec.levels[l - 1]) quantize(p.coords);
        }
        index.records.push_back(std::move(rec));
    }
    std::sort(index.records.begin(), index.records.end(),
              [](const PanoramaRecord& a, const PanoramaRecord& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < index.records.size(); ++i)
        if (index.records[i - 1].id == index.records[i].id)
            throw InvalidInputError("duplicate panorama id " + std::to_string(index.records[i].id));
    return index;
}

std::uint64_t index_header_bytes() {
    return 4 + sizeof(std::uint32_t) + sizeof(double) + 2 * sizeof(std::uint16_t) +
           sizeof(std::uint32_t) + sizeof(std::uint64_t);
}

std::uint64_t record_payload_bytes(const DatabaseIndex& index, const PanoramaRecord& rec) {
    std::uint64_t bytes = sizeof(std::uint64_t) + 1;
    if (rec.geotag) bytes += 2 * sizeof(double);
    for (int l = 1; l <= index.levels; ++l)
        if (index.has_level(l))
            bytes += static_cast<std::uint64_t>(1u << (l - 1)) * index.ball.dim * sizeof(float);
    return bytes;
}

void persist_index(const DatabaseIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open index file for writing: " + path.string());
    out.write(kMagic, 4);
    write_raw(out, kIndexVersion);
    write_raw(out, index.ball.curvature);
    write_raw(out, static_cast<std::uint16_t>(index.levels));
    write_raw(out, index.stored_mask);
    write_raw(out, static_cast<std::uint32_t>(index.ball.dim));
    write_raw(out, static_cast<std::uint64_t>(index.records.size()));
    std::vector<float> buf;
    for (const PanoramaRecord& rec : index.records) {
        write_raw(out, rec.id);
        write_raw(out, static_cast<std::uint8_t>(rec.geotag ? 1 : 0));
        if (rec.geotag) {
            write_raw(out, rec.geotag->latitude);
            write_raw(out, rec.geotag->longitude);
        }
        for (int l = 1; l <= index.levels; ++l) {
            if (!index.has_level(l)) continue;
            for (const geo::BallPoint& p : rec.levels[l - 1]) {
                buf.assign(p.coords.begin(), p.coords.end());
                out.write(reinterpret_cast<const char*>(buf.data()),
                          static_cast<std::streamsize>(buf.size() * sizeof(float)));
            }
        }
    }
    if (!out) throw InvalidInputError("write failed: " + path.string());
}

DatabaseIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open index file: " + path.string());
    std::uint64_t offset = 0;

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad index file magic", 0);
    offset = 4;

    const auto version = read_raw<std::uint32_t>(in, offset, "version");
    if (version != kIndexVersion)
        throw FormatError("unsupported index version " + std::to_string(version),
                          offset - sizeof(std::uint32_t));

    DatabaseIndex index;
    index.ball.curvature = read_raw<double>(in, offset, "curvature");
    index.levels = read_raw<std::uint16_t>(in, offset, "level count");
    index.stored_mask = read_raw<std::uint16_t>(in, offset, "stored level mask");
    index.ball.dim = static_cast<int>(read_raw<std::uint32_t>(in, offset, "dimension"));
    if (index.levels < 1 || index.levels > 16)
        throw FormatError("level count out of range", offset);
    if (index.stored_mask == 0 || (index.stored_mask >> index.levels))
        throw FormatError("stored level mask inconsistent with level count", offset);
    index.ball.validate();
    const auto count = read_raw<std::uint64_t>(in, offset, "record count");

    index.records.reserve(count);
    std::vector<float> buf(index.ball.dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        PanoramaRecord rec;
        rec.id = read_raw<std::uint64_t>(in, offset, "record id");
        const auto flag = read_raw<std::uint8_t>(in, offset, "geotag flag");
        if (flag > 1) throw FormatError("invalid geotag flag", offset - 1);
        if (flag) {
            Geotag tag;
            tag.latitude = read_raw<double>(in, offset, "latitude");
            tag.longitude = read_raw<double>(in, offset, "longitude");
            rec.geotag = tag;
        }
        rec.levels.resize(index.levels);
        for (int l = 1; l <= index.levels; ++l) {
            if (!index.has_level(l)) continue;
            const int points = 1 << (l - 1);
            rec.levels[l - 1].reserve(points);
            for (int kk = 0; kk < points; ++kk) {
                in.read(reinterpret_cast<char*>(buf.data()),
                        static_cast<std::streamsize>(buf.size() * sizeof(float)));
                if (!in) throw FormatError("truncated descriptor payload", offset);
                offset += buf.size() * sizeof(float);
                geo::BallPoint p;
                p.cfg = index.ball;
                p.coords.assign(buf.begin(), buf.end());
                rec.levels[l - 1].push_back(std::move(p));
            }
        }
        if (r > 0 && index.records.back().id >= rec.id)
            throw FormatError("record ids not strictly ascending", offset);
        index.records.push_back(std::move(rec));
    }
    return index;
}

std::vector<std::pair<std::uint64_t, double>> coarse_search(const geo::BallPoint& query,
                                                            const DatabaseIndex& index,
                                                            int kprime,
                                                            EvalCounter& counter) {
    if (kprime < 1) throw ConfigError("kprime must be >= 1");
    if (index.records.empty()) return {};
    if (!index.has_level(1)) throw ConfigError("level 1 is not stored in this index");

    std::vector<std::pair<std::uint64_t, double>> all;
    all.reserve(index.records.size());
    for (const PanoramaRecord& rec : index.records)
        all.emplace_back(rec.id, geo::dist(query, rec.levels[0][0]));
    counter.distance_evals += index.records.size();

    const std::size_t keep = std::min<std::size_t>(kprime, all.size());
    std::partial_sort(all.begin(), all.begin() + keep, all.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second < b.second;
                          return a.first < b.first;
                      });
    all.resize(keep);
    return all;
}

double level_min_distance(const geo::BallPoint& query, const PanoramaRecord& record,
                          int level, EvalCounter& counter) {
    if (level < 1 || level > static_cast<int>(record.levels.size()))
        throw ConfigError("level out of range");
    const auto& points = record.levels[level - 1];
    if (points.empty()) throw ConfigError("level " + std::to_string(level) + " is not stored");
    double best = std::numeric_limits<double>::infinity();
    for (const geo::BallPoint& p : points) best = std::min(best, geo::dist(query, p));
    counter.distance_evals += points.size();
    return best;
}

std::vector<ScoredResult> rescore(const std::vector<CandidateDistances>& candidates,
                                  const RetrievalConfig& cfg) {
    std::vector<int> used_levels{1};
    used_levels.insert(used_levels.end(), cfg.rescore_levels.begin(), cfg.rescore_levels.end());

    std::vector<ScoredResult> out;
    out.reserve(candidates.size());
    for (const CandidateDistances& c : candidates) {
        ScoredResult r;
        r.id = c.id;
        r.level_distance = c.level_distance;
        out.push_back(std::move(r));
    }
    if (out.empty()) return out;

    const double n = static_cast<double>(out.size());
    for (int l : used_levels) {
        double mu = 0.0;
        for (const ScoredResult& r : out) mu += r.level_distance.at(l);
        mu /= n;
        double var = 0.0;
        for (const ScoredResult& r : out) {
            const double d = r.level_distance.at(l) - mu;
            var += d * d;
        }
        const double sigma = std::sqrt(var / n);  // population form
        const double w = cfg.weights.at(l);
        for (ScoredResult& r : out) {
            const double s = -(r.level_distance.at(l) - mu) / (sigma + cfg.zscore_eps);
            r.level_score[l] = s;
            r.fused += w * s;
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredResult& a, const ScoredResult& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        return a.id < b.id;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
    return out;
}

std::vector<ScoredResult> retrieve(const geo::BallPoint& query, const DatabaseIndex& index,
                                   const RetrievalConfig& cfg, EvalCounter& counter) {
    cfg.validate(index.levels);
    const auto shortlist = coarse_search(query, index, cfg.kprime, counter);

    std::vector<CandidateDistances> candidates;
    candidates.reserve(shortlist.size());
    for (const auto& [id, d1] : shortlist) {
        CandidateDistances c;
        c.id = id;
        c.level_distance[1] = d1;  // reused from the coarse phase
        const PanoramaRecord* rec = find_record(index, id);
        for (int l : cfg.rescore_levels)
            c.level_distance[l] = level_min_distance(query, *rec, l, counter);
        candidates.push_back(std::move(c));
    }
    std::vector<ScoredResult> out = rescore(candidates, cfg);
    if (out.size() > static_cast<std::size_t>(cfg.k)) out.resize(cfg.k);
    return out;
}

std::vector<ScoredResult> exhaustive_search(const geo::BallPoint& query,
                                            const DatabaseIndex& index, int k,
                                            EvalCounter& counter) {
    if (index.records.empty()) return {};
    if (!index.has_level(index.levels))
        throw ConfigError("leaf level is not stored in this index");
    std::vector<ScoredResult> all;
    all.reserve(index.records.size());
    for (const PanoramaRecord& rec : index.records) {
        ScoredResult r;
        r.id = rec.id;
        double best = std::numeric_limits<double>::infinity();
        for (const geo::BallPoint& p : rec.levels[index.levels - 1])
            best = std::min(best, geo::dist(query, p));
        counter.distance_evals += rec.levels[index.levels - 1].size();
        r.level_distance[index.levels] = best;
        r.fused = -best;
        all.push_back(std::move(r));
    }
    std::sort(all.begin(), all.end(), [](const ScoredResult& a, const ScoredResult& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        return a.id < b.id;
    });
    if (all.size() > static_cast<std::size_t>(std::max(k, 0))) all.resize(std::max(k, 0));
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<int>(i + 1);
    return all;
}

}  // namespace hvr::index
