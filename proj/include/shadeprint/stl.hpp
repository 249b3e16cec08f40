// STL reading and writing. ASCII follows the classic listing
// (solid / facet normal / outer loop / vertex / endloop / endfacet /
// endsolid, two blanks per nesting level); binary is the usual 80-byte
// header, little-endian facet count and 50-byte records.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "shadeprint/error.hpp"
#include "shadeprint/mesh.hpp"

namespace shadeprint {

enum class StlFormat { Ascii, Binary };

inline StlFormat parse_stl_format(const std::string& s) {
    if (s == "ascii") return StlFormat::Ascii;
    if (s == "binary") return StlFormat::Binary;
    throw InputError("unknown STL format '" + s + "' (expected ascii or binary)");
}

namespace detail {

inline std::string fmt_f32(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
    return buf;
}

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& out, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(out, bits);
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline double get_f32(const unsigned char* p) {
    const std::uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace detail

inline void write_stl_ascii(const TriangleMesh& m, std::ostream& out) {
    const std::string name = m.name.empty() ? "shadeprint" : m.name;
    out << "solid " << name << "\n";
    for (const Facet& f : m.facets) {
        out << "  facet normal " << detail::fmt_f32(f.normal.x()) << " " << detail::fmt_f32(f.normal.y()) << " "
            << detail::fmt_f32(f.normal.z()) << "\n";
        out << "    outer loop\n";
        for (const Vec3& p : f.v)
            out << "      vertex " << detail::fmt_f32(p.x()) << " " << detail::fmt_f32(p.y()) << " "
                << detail::fmt_f32(p.z()) << "\n";
        out << "    endloop\n";
        out << "  endfacet\n";
    }
    out << "endsolid " << name << "\n";
}

inline void write_stl_binary(const TriangleMesh& m, std::ostream& out) {
    char header[80] = {};
    const std::string h = "binary STL " + m.name;
    std::memcpy(header, h.data(), std::min<std::size_t>(h.size(), 80));
    // A binary header must not look like an ASCII file.
    if (std::strncmp(header, "solid", 5) == 0) header[0] = 'S';
    out.write(header, 80);
    detail::put_u32_le(out, static_cast<std::uint32_t>(m.facets.size()));
    for (const Facet& f : m.facets) {
        for (int k = 0; k < 3; ++k) detail::put_f32(out, f.normal[k]);
        for (const Vec3& p : f.v)
            for (int k = 0; k < 3; ++k) detail::put_f32(out, p[k]);
        out.write("\0\0", 2);
    }
}

/// Parses the ASCII listing; any unexpected keyword raises InputError with the
/// line number.
inline TriangleMesh read_stl_ascii(std::istream& in) {
    TriangleMesh m;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw InputError("STL line " + std::to_string(lineno) + ": " + what);
    };
    auto next = [&](std::istringstream& ls) -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            ls = std::istringstream(line);
            return true;
        }
        return false;
    };
    auto expect = [&](std::istringstream& ls, const std::string& kw) {
        std::string word;
        if (!next(ls)) fail("unexpected end of file, expected '" + kw + "'");
        ls >> word;
        if (word != kw) fail("expected '" + kw + "', found '" + word + "'");
    };
    auto numbers = [&](std::istringstream& ls) {
        Vec3 v;
        for (int k = 0; k < 3; ++k) {
            std::string tok;
            if (!(ls >> tok)) fail("missing number");
            try {
                std::size_t used = 0;
                v[k] = std::stod(tok, &used);
                if (used != tok.size()) fail("malformed number '" + tok + "'");
            } catch (const std::logic_error&) {
                fail("malformed number '" + tok + "'");
            }
        }
        std::string extra;
        if (ls >> extra) fail("trailing text '" + extra + "'");
        return v;
    };

    std::istringstream ls;
    expect(ls, "solid");
    std::getline(ls >> std::ws, m.name);
    while (!m.name.empty() && (m.name.back() == '\r' || m.name.back() == ' ')) m.name.pop_back();
    for (;;) {
        std::string word;
        if (!next(ls)) fail("missing 'endsolid'");
        ls >> word;
        if (word == "endsolid") break;
        if (word != "facet") fail("expected 'facet' or 'endsolid', found '" + word + "'");
        ls >> word;
        if (word != "normal") fail("expected 'normal' after 'facet'");
        Facet f;
        f.normal = numbers(ls);
        expect(ls, "outer");
        ls >> word;
        if (word != "loop") fail("expected 'outer loop'");
        for (int c = 0; c < 3; ++c) {
            expect(ls, "vertex");
            f.v[c] = numbers(ls);
        }
        expect(ls, "endloop");
        expect(ls, "endfacet");
        m.facets.push_back(f);
    }
    return m;
}

inline TriangleMesh read_stl_binary(const std::string& bytes) {
    if (bytes.size() < 84) throw InputError("binary STL shorter than its header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t n = detail::get_u32_le(p + 80);
    if (bytes.size() != 84 + 50ull * n)
        throw InputError("binary STL size does not match its facet count (" + std::to_string(n) + ")");
    TriangleMesh m;
    m.name.assign(bytes.data(), strnlen(bytes.data(), 80));
    if (m.name.rfind("binary STL ", 0) == 0) m.name = m.name.substr(11);
    m.facets.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const unsigned char* r = p + 84 + 50ull * i;
        Facet& f = m.facets[i];
        for (int k = 0; k < 3; ++k) f.normal[k] = detail::get_f32(r + 4 * k);
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k) f.v[c][k] = detail::get_f32(r + 12 + 12 * c + 4 * k);
    }
    return m;
}

/// Reads either flavour. A file whose size matches the binary layout for its
/// count field is binary; otherwise it must be ASCII.
inline TriangleMesh stl_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 84) {
        const std::uint32_t n = detail::get_u32_le(reinterpret_cast<const unsigned char*>(bytes.data()) + 80);
        if (bytes.size() == 84 + 50ull * n) return read_stl_binary(bytes);
    }
    std::istringstream ss(bytes);
    return read_stl_ascii(ss);
}

/// Writes after validation; refuses meshes with defects and lists them.
inline void stl_write(const TriangleMesh& m, const std::string& path, StlFormat fmt, bool validate_first = true) {
    if (validate_first) {
        const MeshReport rep = validate(m);
        if (!rep.ok()) {
            std::string msg = "refusing to write an invalid mesh: " + rep.summary();
            for (std::size_t i = 0; i < rep.issues.size() && i < 5; ++i) msg += "\n  " + rep.issues[i].message;
            throw InputError(msg);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    if (fmt == StlFormat::Ascii)
        write_stl_ascii(m, out);
    else
        write_stl_binary(m, out);
    if (!out) throw InputError("write failed for " + path);
}

}  // namespace shadeprint
