#pragma once

// Spatial feature grids (stand-in for backbone output) and their binary
// file format: magic "HFGR", u32 version, u32 leaf count, u32 h, u32 w,
// u32 channels, then the leaf grids in order as row-major 32-bit floats.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hvr/errors.hpp"

namespace hvr {

struct FeatureGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    // Row-major (h, w, channels), all entries finite.
    std::vector<double> values;

    double at(int r, int c, int ch) const {
        return values[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    double& at(int r, int c, int ch) {
        return values[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    std::size_t cell_count() const { return static_cast<std::size_t>(height) * width; }

    void validate() const;
};

inline constexpr std::uint32_t kGridFormatVersion = 1;

void write_grid_file(const std::filesystem::path& path,
                     const std::vector<FeatureGrid>& leaves);
std::vector<FeatureGrid> read_grid_file(const std::filesystem::path& path);

}  // namespace hvr
