// Field file formats: PGM images (P2/P5) and raw float32 grids with a text
// sidecar header.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"

namespace shadeprint {

namespace detail {

inline std::string read_pnm_token(std::istream& in) {
    std::string tok;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

inline int parse_int(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(std::string("malformed PGM ") + what + ": '" + s + "'");
    }
}

}  // namespace detail

/// Reads a P2 or P5 PGM. Pixel (col, row) maps to node (col, height-1-row) so
/// that y grows upwards; intensities are scaled from 0..maxval to [0,1].
inline ScalarField2D read_pgm(const std::string& path, double pixel_size = 1.0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image " + path);
    const std::string magic = detail::read_pnm_token(in);
    if (magic != "P2" && magic != "P5") throw InputError(path + ": not a P2/P5 PGM file");
    const int w = detail::parse_int(detail::read_pnm_token(in), "width");
    const int h = detail::parse_int(detail::read_pnm_token(in), "height");
    const int maxval = detail::parse_int(detail::read_pnm_token(in), "maxval");
    if (w < 2 || h < 2) throw InputError(path + ": image must be at least 2x2");
    if (maxval <= 0 || maxval > 65535) throw InputError(path + ": maxval out of range");

    ScalarField2D f(Grid2D(Vec2::Zero(), Vec2::Constant(pixel_size), {w, h}));
    const double scale = 1.0 / maxval;
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            int v = 0;
            if (magic == "P2") {
                v = detail::parse_int(detail::read_pnm_token(in), "pixel");
            } else if (maxval < 256) {
                const int c = in.get();
                if (c == EOF) throw InputError(path + ": truncated pixel data");
                v = c;
            } else {
                const int hi = in.get();
                const int lo = in.get();
                if (lo == EOF) throw InputError(path + ": truncated pixel data");
                v = (hi << 8) | lo;
            }
            if (v < 0 || v > maxval) throw InputError(path + ": pixel value exceeds maxval");
            f.at({col, h - 1 - row}) = v * scale;
        }
    }
    return f;
}

/// Writes values clamped to [lo, hi] and scaled to 0..maxval.
inline void write_pgm(const ScalarField2D& f, const std::string& path, double lo = 0.0, double hi = 1.0,
                      bool binary = true, int maxval = 255) {
    if (!(hi > lo)) throw InputError("write_pgm: empty value range");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write image " + path);
    const int w = f.grid.dims[0];
    const int h = f.grid.dims[1];
    out << (binary ? "P5" : "P2") << "\n" << w << " " << h << "\n" << maxval << "\n";
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const double t = std::clamp((f.at({col, h - 1 - row}) - lo) / (hi - lo), 0.0, 1.0);
            const int v = static_cast<int>(std::lround(t * maxval));
            if (binary) {
                if (maxval < 256) {
                    out.put(static_cast<char>(v));
                } else {
                    out.put(static_cast<char>(v >> 8));
                    out.put(static_cast<char>(v & 0xff));
                }
            } else {
                out << v << ((col + 1 == w) ? '\n' : ' ');
            }
        }
    }
}

/// Reads a PGM mask: nonzero pixels are inside the domain.
inline std::vector<std::uint8_t> read_pgm_mask(const std::string& path, const Grid2D& expect) {
    const ScalarField2D m = read_pgm(path);
    if (m.grid.dims != expect.dims) throw InputError(path + ": mask size differs from the image");
    std::vector<std::uint8_t> mask(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m.values[i] > 0.0 ? 1 : 0;
    return mask;
}

/// Heightmap as CSV: one row per y (top row first), comma separated.
/// Nodes outside the mask are written as nan and come back masked out.
inline void write_csv(const ScalarField2D& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << std::setprecision(17);
    const int w = f.grid.dims[0];
    const int h = f.grid.dims[1];
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            if (col) out << ',';
            const Index<2> c{col, h - 1 - row};
            if (f.in_domain(c))
                out << f.at(c);
            else
                out << "nan";
        }
        out << '\n';
    }
}

inline ScalarField2D read_csv(const std::string& path, double pixel_size = 1.0) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                r.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InputError(path + ": malformed number '" + cell + "'");
            }
        }
        if (!rows.empty() && r.size() != rows.front().size()) throw InputError(path + ": ragged CSV rows");
        rows.push_back(std::move(r));
    }
    if (rows.size() < 2 || rows.front().size() < 2) throw InputError(path + ": CSV grid must be at least 2x2");
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    ScalarField2D f(Grid2D(Vec2::Zero(), Vec2::Constant(pixel_size), {w, h}));
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w; ++col) f.at({col, h - 1 - row}) = rows[row][col];
    bool any_nan = false;
    for (double v : f.values) any_nan |= std::isnan(v);
    if (any_nan) {
        f.mask.assign(f.size(), 1);
        for (std::size_t i = 0; i < f.size(); ++i)
            if (std::isnan(f.values[i])) f.mask[i] = 0, f.values[i] = 0.0;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Raw float32 grids: `path` holds little-endian float32 values in node order
// (x fastest); `path + ".hdr"` holds the grid geometry as text.

namespace detail {

inline bool host_little_endian() {
    const std::uint16_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

inline void put_f32_le(std::ostream& out, float v) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    if (!host_little_endian()) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline float get_f32_le(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("raw field: truncated data");
    if (!host_little_endian()) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
    float v;
    std::memcpy(&v, b, 4);
    return v;
}

}  // namespace detail

template <int D>
void write_raw_field(const ScalarField<D>& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    for (double v : f.values) detail::put_f32_le(out, static_cast<float>(v));
    std::ofstream hdr(path + ".hdr");
    if (!hdr) throw InputError("cannot write " + path + ".hdr");
    hdr << std::setprecision(17);
    hdr << "dimension " << D << "\n";
    hdr << "dims";
    for (int k = 0; k < D; ++k) hdr << ' ' << f.grid.dims[k];
    hdr << "\norigin";
    for (int k = 0; k < D; ++k) hdr << ' ' << f.grid.origin[k];
    hdr << "\nspacing";
    for (int k = 0; k < D; ++k) hdr << ' ' << f.grid.spacing[k];
    hdr << "\ntype float32\nendian little\n";
}

template <int D>
ScalarField<D> read_raw_field(const std::string& path) {
    std::ifstream hdr(path + ".hdr");
    if (!hdr) throw InputError("missing header " + path + ".hdr");
    Grid<D> g;
    std::string key;
    int dim = -1;
    while (hdr >> key) {
        if (key == "dimension") {
            hdr >> dim;
        } else if (key == "dims") {
            for (int k = 0; k < D; ++k) hdr >> g.dims[k];
        } else if (key == "origin") {
            for (int k = 0; k < D; ++k) hdr >> g.origin[k];
        } else if (key == "spacing") {
            for (int k = 0; k < D; ++k) hdr >> g.spacing[k];
        } else if (key == "type") {
            std::string t;
            hdr >> t;
            if (t != "float32") throw InputError("raw field: unsupported type " + t);
        } else if (key == "endian") {
            std::string e;
            hdr >> e;
            if (e != "little") throw InputError("raw field: unsupported endianness " + e);
        } else {
            throw InputError("raw field header: unknown key " + key);
        }
        if (!hdr) throw InputError("raw field header: malformed value for " + key);
    }
    if (dim != D) throw InputError("raw field: dimension mismatch");
    g.check();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    ScalarField<D> f(g);
    for (double& v : f.values) v = detail::get_f32_le(in);
    return f;
}

}  // namespace shadeprint
