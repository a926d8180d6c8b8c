#pragma once

// Geo-referenced gravity raster: storage, nearest-cell lookup, matching
// windows, sub-cell geometry, synthetic fields and the GMAP file format.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"

namespace gravmatch {

struct CellIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    friend constexpr bool operator==(CellIndex, CellIndex) = default;
};

/// Row-major raster of gravity values (mGal). Cell (i, j) is centred at
/// (origin_lon + j * res_lon, origin_lat + i * res_lat). Immutable once built.
class GravityMap {
public:
    GravityMap(double origin_lon, double origin_lat, double res_lon, double res_lat,
               std::size_t nrows, std::size_t ncols, std::vector<double> values)
        : origin_lon_(origin_lon), origin_lat_(origin_lat), res_lon_(res_lon), res_lat_(res_lat),
          nrows_(nrows), ncols_(ncols), values_(std::move(values)) {
        if (!(res_lon_ > 0.0) || !(res_lat_ > 0.0))
            throw InvalidArgument("map resolution must be positive");
        if (nrows_ == 0 || ncols_ == 0)
            throw InvalidArgument("map must have at least one row and column");
        if (!std::isfinite(origin_lon_) || !std::isfinite(origin_lat_) || !std::isfinite(res_lon_) ||
            !std::isfinite(res_lat_))
            throw InvalidArgument("map georeference must be finite");
        if (values_.size() != nrows_ * ncols_)
            throw InvalidArgument("map holds " + std::to_string(values_.size()) + " values, expected " +
                                  std::to_string(nrows_ * ncols_));
        for (double v : values_)
            if (!std::isfinite(v)) throw InvalidArgument("map values must be finite");
    }

    double origin_lon() const { return origin_lon_; }
    double origin_lat() const { return origin_lat_; }
    double res_lon() const { return res_lon_; }
    double res_lat() const { return res_lat_; }
    std::size_t nrows() const { return nrows_; }
    std::size_t ncols() const { return ncols_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::size_t row, std::size_t col) const { return values_[row * ncols_ + col]; }
    double at(CellIndex c) const { return at(c.row, c.col); }

    LonLat center(CellIndex c) const {
        return {origin_lon_ + static_cast<double>(c.col) * res_lon_,
                origin_lat_ + static_cast<double>(c.row) * res_lat_};
    }

    friend bool operator==(const GravityMap&, const GravityMap&) = default;

private:
    double origin_lon_;
    double origin_lat_;
    double res_lon_;
    double res_lat_;
    std::size_t nrows_;
    std::size_t ncols_;
    std::vector<double> values_;
};

namespace detail {

// Nearest index along one axis; exact half fractions go to the lower index.
inline std::optional<std::size_t> round_half_down(double frac, std::size_t count) {
    if (!std::isfinite(frac)) return std::nullopt;
    const double idx = std::ceil(frac - 0.5);
    if (idx < 0.0 || idx >= static_cast<double>(count)) return std::nullopt;
    return static_cast<std::size_t>(idx);
}

}  // namespace detail

/// Cell whose centre is nearest to `p` in degree space.
inline CellIndex nearest_cell(const GravityMap& map, LonLat p) {
    const auto col = detail::round_half_down((p.lon - map.origin_lon()) / map.res_lon(), map.ncols());
    const auto row = detail::round_half_down((p.lat - map.origin_lat()) / map.res_lat(), map.nrows());
    if (!col || !row) {
        std::ostringstream os;
        os.precision(12);
        os << "position (" << p.lon << ", " << p.lat << ") lies outside the map";
        throw OutOfBounds(os.str());
    }
    return {*row, *col};
}

/// Nearest-neighbour gravity value at `p`.
inline double lookup(const GravityMap& map, LonLat p) { return map.at(nearest_cell(map, p)); }

struct WindowCell {
    int label = 0;  // 1-based, row-major over offsets
    CellIndex index;
    LonLat position;
    double gravity = 0.0;
};

/// The n x n block of cells around an INS estimate at one time index.
struct GridWindow {
    std::size_t t = 0;
    CellIndex center;
    int n = 0;
    double res_lon = 0.0;
    double res_lat = 0.0;
    std::vector<WindowCell> cells;

    int size() const { return n * n; }
    int center_label() const { return (n * n + 1) / 2; }
    const WindowCell& cell(int label) const { return cells.at(static_cast<std::size_t>(label - 1)); }
};

inline int window_label(int row_offset, int col_offset, int n) {
    const int h = (n - 1) / 2;
    return (row_offset + h) * n + (col_offset + h) + 1;
}

inline GridWindow build_window(const GravityMap& map, LonLat s_ins, int n, std::size_t t = 0) {
    if (n < 3 || n % 2 == 0) throw InvalidArgument("window size must be odd and >= 3");
    const CellIndex c = nearest_cell(map, s_ins);
    const auto h = static_cast<std::ptrdiff_t>((n - 1) / 2);
    const auto row = static_cast<std::ptrdiff_t>(c.row);
    const auto col = static_cast<std::ptrdiff_t>(c.col);
    if (row - h < 0 || col - h < 0 || row + h >= static_cast<std::ptrdiff_t>(map.nrows()) ||
        col + h >= static_cast<std::ptrdiff_t>(map.ncols()))
        throw WindowClipped("window of size " + std::to_string(n) + " around cell (" + std::to_string(c.row) +
                            ", " + std::to_string(c.col) + ") leaves the map");

    GridWindow w;
    w.t = t;
    w.center = c;
    w.n = n;
    w.res_lon = map.res_lon();
    w.res_lat = map.res_lat();
    w.cells.reserve(static_cast<std::size_t>(n * n));
    for (std::ptrdiff_t dr = -h; dr <= h; ++dr) {
        for (std::ptrdiff_t dc = -h; dc <= h; ++dc) {
            const CellIndex idx{static_cast<std::size_t>(row + dr), static_cast<std::size_t>(col + dc)};
            w.cells.push_back({window_label(static_cast<int>(dr), static_cast<int>(dc), n), idx, map.center(idx),
                               map.at(idx)});
        }
    }
    return w;
}

/// Sub-cell label l (1-based, row-major) to its (row, col) offsets in [-h, h].
inline std::pair<int, int> subcell_offsets(int l, int o) {
    const int h = (o - 1) / 2;
    return {(l - 1) / o - h, (l - 1) % o - h};
}

inline LonLat subcell_center(LonLat cell_center, double res_lon, double res_lat, int o, int row_off,
                             int col_off) {
    return {cell_center.lon + col_off * (res_lon / o), cell_center.lat + row_off * (res_lat / o)};
}

/// Centres of the o x o sub-cells of window cell `j`; the cell centre is at l = (o^2 + 1) / 2.
inline std::vector<LonLat> subcell_centers(const GridWindow& window, int j, int o) {
    if (o < 1 || o % 2 == 0) throw InvalidArgument("sub-cell factor must be odd and >= 1");
    if (j < 1 || j > window.size()) throw InvalidArgument("cell label out of range");
    const LonLat c = window.cell(j).position;
    std::vector<LonLat> out;
    out.reserve(static_cast<std::size_t>(o * o));
    for (int l = 1; l <= o * o; ++l) {
        const auto [dr, dc] = subcell_offsets(l, o);
        out.push_back(subcell_center(c, window.res_lon, window.res_lat, o, dr, dc));
    }
    return out;
}

/// Keeps every `factor`-th row and column starting at index 0.
inline GravityMap downsample(const GravityMap& map, std::size_t factor) {
    if (factor == 0) throw InvalidArgument("downsample factor must be positive");
    if (factor == 1) return map;
    const std::size_t rows = (map.nrows() + factor - 1) / factor;
    const std::size_t cols = (map.ncols() + factor - 1) / factor;
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) values.push_back(map.at(r * factor, c * factor));
    const auto f = static_cast<double>(factor);
    return GravityMap(map.origin_lon(), map.origin_lat(), map.res_lon() * f, map.res_lat() * f, rows, cols,
                      std::move(values));
}

// ---------------------------------------------------------------------------
// Synthetic fields

enum class Roughness { smooth, rough };

inline constexpr double kGravityOffsetMgal = 9.79e5;

struct SynthMapParams {
    LonLat origin{140.0, -38.0};
    double width_deg = 1.28;
    double height_deg = 1.28;
    double resolution_deg = 0.01;
    Roughness roughness = Roughness::rough;
    std::uint64_t seed = 42;
    std::optional<int> bump_count;  // overrides the density preset
};

namespace detail {

// Platform-independent uniform draw in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

}  // namespace detail

/// Constant offset plus a sum of randomly placed isotropic Gaussian bumps.
/// Rough: 200 bumps per 128 x 128 cells, amplitude U(-40, 40) mGal, width U(2, 10) cells.
/// Smooth: 40 bumps per 128 x 128 cells, amplitude U(-8, 8) mGal, width U(20, 60) cells.
inline GravityMap synth_map(const SynthMapParams& p) {
    if (!(p.resolution_deg > 0.0)) throw InvalidArgument("resolution must be positive");
    const auto cols = static_cast<std::size_t>(std::llround(p.width_deg / p.resolution_deg));
    const auto rows = static_cast<std::size_t>(std::llround(p.height_deg / p.resolution_deg));
    if (cols < 64 || rows < 64) throw InvalidArgument("synthetic maps need at least 64x64 cells");

    const bool rough = p.roughness == Roughness::rough;
    const double per_block = rough ? 200.0 : 40.0;
    const int count = p.bump_count.value_or(
        static_cast<int>(std::llround(per_block * static_cast<double>(rows * cols) / (128.0 * 128.0))));
    const double amp = rough ? 40.0 : 8.0;
    const double wmin = rough ? 2.0 : 20.0;
    const double wmax = rough ? 10.0 : 60.0;

    std::vector<double> values(rows * cols, kGravityOffsetMgal);
    std::mt19937_64 rng(p.seed);
    for (int k = 0; k < count; ++k) {
        const double cx = detail::uniform(rng, 0.0, static_cast<double>(cols));
        const double cy = detail::uniform(rng, 0.0, static_cast<double>(rows));
        const double a = detail::uniform(rng, -amp, amp);
        const double w = detail::uniform(rng, wmin, wmax);
        // Contributions beyond 8 widths are below 1e-12 of the amplitude.
        const double reach = 8.0 * w;
        const auto r0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - reach)));
        const auto r1 = static_cast<std::size_t>(std::min(static_cast<double>(rows), std::ceil(cy + reach + 1)));
        const auto c0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - reach)));
        const auto c1 = static_cast<std::size_t>(std::min(static_cast<double>(cols), std::ceil(cx + reach + 1)));
        const double inv = 1.0 / (2.0 * w * w);
        for (std::size_t r = r0; r < r1; ++r) {
            const double dy = static_cast<double>(r) - cy;
            for (std::size_t c = c0; c < c1; ++c) {
                const double dx = static_cast<double>(c) - cx;
                values[r * cols + c] += a * std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }
    return GravityMap(p.origin.lon, p.origin.lat, p.resolution_deg, p.resolution_deg, rows, cols,
                      std::move(values));
}

// ---------------------------------------------------------------------------
// GMAP binary format: "GMAP0001", 4 x f64 georeference, 2 x u64 shape,
// then nrows * ncols f64 values row-major. All little-endian.

inline constexpr std::string_view kMapMagic = "GMAP0001";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::string_view in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

inline double get_f64(std::string_view in, std::size_t pos) { return std::bit_cast<double>(get_u64(in, pos)); }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

inline std::string encode_map(const GravityMap& map) {
    std::string out(kMapMagic);
    detail::put_f64(out, map.origin_lon());
    detail::put_f64(out, map.origin_lat());
    detail::put_f64(out, map.res_lon());
    detail::put_f64(out, map.res_lat());
    detail::put_u64(out, map.nrows());
    detail::put_u64(out, map.ncols());
    for (double v : map.values()) detail::put_f64(out, v);
    return out;
}

inline GravityMap decode_map(std::string_view bytes) {
    constexpr std::size_t header = 8 + 6 * 8;
    if (bytes.size() < header) throw MalformedFile("truncated header");
    if (bytes.substr(0, 8) != kMapMagic) throw MalformedFile("bad magic");
    const double lon0 = detail::get_f64(bytes, 8);
    const double lat0 = detail::get_f64(bytes, 16);
    const double rx = detail::get_f64(bytes, 24);
    const double ry = detail::get_f64(bytes, 32);
    const std::uint64_t rows = detail::get_u64(bytes, 40);
    const std::uint64_t cols = detail::get_u64(bytes, 48);
    if (rows == 0 || cols == 0 || cols > (bytes.size() - header) / 8 / rows)
        throw MalformedFile("value payload does not match the declared shape");
    const std::uint64_t count = rows * cols;
    if (bytes.size() != header + 8 * count) throw MalformedFile("value payload does not match the declared shape");
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        values[i] = detail::get_f64(bytes, header + 8 * i);
        if (!std::isfinite(values[i])) throw MalformedFile("non-finite value at index " + std::to_string(i));
    }
    try {
        return GravityMap(lon0, lat0, rx, ry, rows, cols, std::move(values));
    } catch (const InvalidArgument& e) {
        throw MalformedFile(e.what());
    }
}

inline void save_map(const GravityMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    const std::string bytes = encode_map(map);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidArgument("short write to " + path);
}

inline GravityMap load_map(const std::string& path) { return decode_map(detail::read_file(path)); }

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw MalformedFile("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw MalformedFile("not a finite number: '" + s + "'");
    return v;
}

}  // namespace detail

/// Plain-text raster: a georeference line (origin_lon, origin_lat, res_lon,
/// res_lat), optionally preceded by a line naming those columns, then one
/// comma-separated line of values per map row.
inline GravityMap parse_csv_map(std::istream& in) {
    std::vector<std::vector<std::string>> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(detail::split_csv(line));
    }
    std::size_t next = 0;
    if (next < lines.size() && !lines[next].empty() && lines[next][0] == "origin_lon") ++next;
    if (next >= lines.size() || lines[next].size() != 4) throw MalformedFile("missing georeference line");
    const auto& geo = lines[next++];
    const double lon0 = detail::parse_double(geo[0]);
    const double lat0 = detail::parse_double(geo[1]);
    const double rx = detail::parse_double(geo[2]);
    const double ry = detail::parse_double(geo[3]);
    if (next >= lines.size()) throw MalformedFile("no value rows");
    const std::size_t cols = lines[next].size();
    std::vector<double> values;
    for (std::size_t r = next; r < lines.size(); ++r) {
        if (lines[r].size() != cols) throw MalformedFile("ragged value row " + std::to_string(r + 1));
        for (const auto& f : lines[r]) values.push_back(detail::parse_double(f));
    }
    try {
        return GravityMap(lon0, lat0, rx, ry, lines.size() - next, cols, std::move(values));
    } catch (const InvalidArgument& e) {
        throw MalformedFile(e.what());
    }
}

inline GravityMap load_csv_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedFile("cannot open " + path);
    return parse_csv_map(in);
}

/// CSV raster when the path ends in ".csv", GMAP otherwise.
inline GravityMap load_any_map(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_csv_map(path);
    return load_map(path);
}

}  // namespace gravmatch
