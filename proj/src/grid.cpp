#include "hvr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hvr {

namespace {

constexpr char kMagic[4] = {'H', 'F', 'G', 'R'};

template <class T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& in, std::uint64_t& offset, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(std::string("truncated grid file reading ") + what, offset);
    offset += sizeof(T);
    return v;
}

}  // namespace

void FeatureGrid::validate() const {
    if (height < 1 || width < 1 || channels < 1)
        throw InvalidInputError("feature grid dimensions must be >= 1");
    if (values.size() != cell_count() * static_cast<std::size_t>(channels))
        throw InvalidInputError("feature grid value count does not match its shape");
    if (!std::all_of(values.begin(), values.end(),
                     [](double x) { return std::isfinite(x); }))
        throw InvalidInputError("feature grid contains a non-finite value");
}

void write_grid_file(const std::filesystem::path& path,
                     const std::vector<FeatureGrid>& leaves) {
    if (leaves.empty()) throw InvalidInputError("grid file needs at least one leaf");
    const FeatureGrid& first = leaves.front();
    for (const FeatureGrid& g : leaves) {
        g.validate();
        if (g.height != first.height || g.width != first.width ||
            g.channels != first.channels)
            throw InvalidInputError("all leaves in one grid file must share a shape");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot open grid file for writing: " + path.string());
    out.write(kMagic, 4);
    write_raw(out, kGridFormatVersion);
    write_raw(out, static_cast<std::uint32_t>(leaves.size()));
    write_raw(out, static_cast<std::uint32_t>(first.height));
    write_raw(out, static_cast<std::uint32_t>(first.width));
    write_raw(out, static_cast<std::uint32_t>(first.channels));
    std::vector<float> buf;
    for (const FeatureGrid& g : leaves) {
        buf.assign(g.values.begin(), g.values.end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw InvalidInputError("write failed: " + path.string());
}

std::vector<FeatureGrid> read_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open grid file: " + path.string());
    std::uint64_t offset = 0;

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad grid file magic", 0);
    offset = 4;

    const auto version = read_raw<std::uint32_t>(in, offset, "version");
    if (version != kGridFormatVersion)
        throw FormatError("unsupported grid file version " + std::to_string(version),
                          offset - sizeof(std::uint32_t));
    const auto leaf_count = read_raw<std::uint32_t>(in, offset, "leaf count");
    const auto h = read_raw<std::uint32_t>(in, offset, "height");
    const auto w = read_raw<std::uint32_t>(in, offset, "width");
    const auto ch = read_raw<std::uint32_t>(in, offset, "channels");
    if (leaf_count == 0 || h == 0 || w == 0 || ch == 0)
        throw FormatError("zero dimension in grid file header", offset);

    const std::size_t per_leaf = static_cast<std::size_t>(h) * w * ch;
    std::vector<FeatureGrid> leaves(leaf_count);
    std::vector<float> buf(per_leaf);
    for (auto& g : leaves) {
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(per_leaf * sizeof(float)));
        if (!in) throw FormatError("truncated grid payload", offset);
        offset += per_leaf * sizeof(float);
        g.height = static_cast<int>(h);
        g.width = static_cast<int>(w);
        g.channels = static_cast<int>(ch);
        g.values.assign(buf.begin(), buf.end());
    }
    return leaves;
}

}  // namespace hvr
