#pragma once

// Immutable searchable database of descriptor trees: binary persistence,
// coarse top-K' search on the root descriptors, multi-level rescoring with
// z-score fusion, an exhaustive leaf-level search, and exact accounting of
// full-dimension distance evaluations.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "hvr/geometry.hpp"
#include "hvr/grid.hpp"
#include "hvr/hierarchy.hpp"

namespace hvr::index {

struct Geotag {
    double latitude = 0.0;
    double longitude = 0.0;
};

struct PanoramaRecord {
    std::uint64_t id = 0;
    std::optional<Geotag> geotag;
    // levels[l-1] holds the 2^(l-1) descriptors of level l when that level is
    // stored, and is empty otherwise.
    std::vector<std::vector<geo::BallPoint>> levels;
};

struct DatabaseIndex {
    geo::BallConfig ball;
    int levels = 0;                 // tree depth L
    std::uint16_t stored_mask = 0;  // bit (l-1) set iff level l is stored
    std::vector<PanoramaRecord> records;  // id-ascending

    bool has_level(int level) const {
        return level >= 1 && level <= levels && (stored_mask >> (level - 1)) & 1u;
    }
    std::size_t size() const { return records.size(); }
};

struct PanoramaInput {
    std::uint64_t id = 0;
    std::optional<Geotag> geotag;
    std::vector<FeatureGrid> leaves;  // exactly 2^(L-1), left to right
};

struct RetrievalConfig {
    int kprime = 10;                  // shortlist size K'
    std::vector<int> rescore_levels;  // subset of {2..L}, ascending
    std::map<int, double> weights;    // per level in {1} + rescore_levels
    double zscore_eps = 1e-8;
    int k = 1;                        // final result count, 1 <= k <= kprime

    void validate(int levels) const;
};

struct ScoredResult {
    std::uint64_t id = 0;
    std::map<int, double> level_distance;  // raw d_l per used level
    std::map<int, double> level_score;     // normalized s_l per used level
    double fused = 0.0;
    int rank = 0;
};

// Count of full-dimension hyperbolic distance evaluations for one query.
struct EvalCounter {
    std::uint64_t distance_evals = 0;
};

// Shortlist candidate with its raw per-level distances, fed to rescore.
struct CandidateDistances {
    std::uint64_t id = 0;
    std::map<int, double> level_distance;
};

std::uint16_t level_mask(const std::vector<int>& levels);

// Builds one tree per panorama and keeps only the stored levels, with every
// stored descriptor rounded through 32-bit floats so in-memory queries match
// queries against a persisted copy exactly.
DatabaseIndex build_index(const std::vector<PanoramaInput>& inputs,
                          const hierarchy::PoolingConfig& pooling,
                          const geo::BallConfig& ball, std::uint16_t stored_mask);

void persist_index(const DatabaseIndex& index, const std::filesystem::path& path);
DatabaseIndex load_index(const std::filesystem::path& path);

// Fixed serialized sizes, for storage accounting.
std::uint64_t index_header_bytes();
std::uint64_t record_payload_bytes(const DatabaseIndex& index, const PanoramaRecord& rec);

// Top-K' records by root distance, ascending, ties by ascending id.
// Adds N to the counter. K' larger than the database is clamped.
std::vector<std::pair<std::uint64_t, double>> coarse_search(const geo::BallPoint& query,
                                                            const DatabaseIndex& index,
                                                            int kprime,
                                                            EvalCounter& counter);

// min_k d_c(query, h^(l,k)); adds 2^(l-1) to the counter.
double level_min_distance(const geo::BallPoint& query, const PanoramaRecord& record,
                          int level, EvalCounter& counter);

// Z-score normalization per level over the candidate set, then the weighted
// sum; sorted by fused score descending, ties by ascending id.
std::vector<ScoredResult> rescore(const std::vector<CandidateDistances>& candidates,
                                  const RetrievalConfig& cfg);

// coarse_search -> level_min_distance over the rescore levels -> rescore ->
// truncate to k. Counter total: N + K'*sum over rescore levels of 2^(l-1).
std::vector<ScoredResult> retrieve(const geo::BallPoint& query, const DatabaseIndex& index,
                                   const RetrievalConfig& cfg, EvalCounter& counter);

// Ranks every record by its minimum leaf-level distance; adds N*2^(L-1).
std::vector<ScoredResult> exhaustive_search(const geo::BallPoint& query,
                                            const DatabaseIndex& index, int k,
                                            EvalCounter& counter);

}  // namespace hvr::index
