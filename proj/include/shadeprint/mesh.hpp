// Triangle meshes: facets with explicit normals, heightfield solids,
// isosurfaces of 3D fields and the watertightness/STL-rule validator.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"

namespace shadeprint {

struct Facet {
    std::array<Vec3, 3> v;
    Vec3 normal = Vec3::Zero();

    /// (V2 - V1) x (V3 - V2); zero for a degenerate facet.
    Vec3 winding_normal() const { return (v[1] - v[0]).cross(v[2] - v[1]); }
    double area() const { return 0.5 * winding_normal().norm(); }

    static Facet from_vertices(const Vec3& a, const Vec3& b, const Vec3& c) {
        Facet f;
        f.v = {a, b, c};
        const Vec3 n = f.winding_normal();
        if (n.norm() > 0.0) f.normal = n.normalized();
        return f;
    }
};

struct TriangleMesh {
    std::string name = "shadeprint";
    std::vector<Facet> facets;
    Vec3 shift = Vec3::Zero();  // translation applied by prepare_for_export

    std::size_t size() const { return facets.size(); }
    void add(const Vec3& a, const Vec3& b, const Vec3& c) { facets.push_back(Facet::from_vertices(a, b, c)); }

    void bounds(Vec3& lo, Vec3& hi) const {
        lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        hi = -lo;
        for (const Facet& f : facets)
            for (const Vec3& p : f.v) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    }

    /// Divergence-theorem volume; positive for outward-oriented closed meshes.
    double signed_volume() const {
        double vol = 0.0;
        for (const Facet& f : facets) vol += f.v[0].dot(f.v[1].cross(f.v[2]));
        return vol / 6.0;
    }

    void translate(const Vec3& t) {
        for (Facet& f : facets)
            for (Vec3& p : f.v) p += t;
    }
};

/// Moves the mesh so that every coordinate is strictly positive. Axes whose
/// minimum is already positive stay put; others are shifted so their minimum
/// lands on `spacing`. The applied translation accumulates in mesh.shift.
inline Vec3 prepare_for_export(TriangleMesh& mesh, double spacing) {
    if (!(spacing > 0.0)) throw InputError("export shift spacing must be positive");
    if (mesh.facets.empty()) return Vec3::Zero();
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    Vec3 t = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
        if (lo[k] <= 0.0) t[k] = spacing - lo[k];
    if (t != Vec3::Zero()) {
        mesh.translate(t);
        mesh.shift += t;
    }
    return t;
}

/// Closed solid under a heightfield: two triangles per fully masked cell on
/// top, the mirrored plate at base_z below, and vertical walls along every
/// cell edge that borders exactly one included cell.
inline TriangleMesh heightfield_to_solid(const ScalarField2D& u, double base_z, double min_thickness = 0.0) {
    u.check();
    const Grid2D& g = u.grid;
    const int nx = g.dims[0], ny = g.dims[1];
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.in_domain(i) && !(u.values[i] > base_z + min_thickness))
            throw InputError("heightfield dips below the base plate (need u > base_z + thickness)");

    auto cell_in = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= nx - 1 || j >= ny - 1) return false;
        return u.in_domain(Index<2>{i, j}) && u.in_domain(Index<2>{i + 1, j}) && u.in_domain(Index<2>{i, j + 1}) &&
               u.in_domain(Index<2>{i + 1, j + 1});
    };
    auto top = [&](int i, int j) {
        const Vec2 p = g.position(Index<2>{i, j});
        return Vec3(p.x(), p.y(), u.at(Index<2>{i, j}));
    };
    auto bot = [&](int i, int j) {
        const Vec2 p = g.position(Index<2>{i, j});
        return Vec3(p.x(), p.y(), base_z);
    };

    TriangleMesh m;
    m.name = "heightfield";
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            if (!cell_in(i, j)) continue;
            // top, counter-clockwise seen from +z
            m.add(top(i, j), top(i + 1, j), top(i + 1, j + 1));
            m.add(top(i, j), top(i + 1, j + 1), top(i, j + 1));
            // bottom, counter-clockwise seen from -z
            m.add(bot(i, j), bot(i + 1, j + 1), bot(i + 1, j));
            m.add(bot(i, j), bot(i, j + 1), bot(i + 1, j + 1));
            // walls: edge (a -> b) runs counter-clockwise around the cell, so
            // the outward side is on its right
            auto wall = [&](int ai, int aj, int bi, int bj) {
                m.add(bot(ai, aj), bot(bi, bj), top(bi, bj));
                m.add(bot(ai, aj), top(bi, bj), top(ai, aj));
            };
            if (!cell_in(i, j - 1)) wall(i, j, i + 1, j);
            if (!cell_in(i + 1, j)) wall(i + 1, j, i + 1, j + 1);
            if (!cell_in(i, j + 1)) wall(i + 1, j + 1, i, j + 1);
            if (!cell_in(i - 1, j)) wall(i, j + 1, i, j);
        }
    if (m.facets.empty()) throw InputError("heightfield mask contains no complete cell");
    return m;
}

// ---------------------------------------------------------------------------
// Validation

struct MeshIssue {
    enum class Kind { TJunction, NonPositive, Orientation, OpenEdge, Degenerate, Volume };
    Kind kind;
    std::string message;
};

inline const char* issue_name(MeshIssue::Kind k) {
    switch (k) {
        case MeshIssue::Kind::TJunction: return "t-junction";
        case MeshIssue::Kind::NonPositive: return "non-positive coordinate";
        case MeshIssue::Kind::Orientation: return "orientation mismatch";
        case MeshIssue::Kind::OpenEdge: return "open edge";
        case MeshIssue::Kind::Degenerate: return "degenerate facet";
        case MeshIssue::Kind::Volume: return "non-positive volume";
    }
    return "?";
}

struct MeshReport {
    std::vector<MeshIssue> issues;
    std::size_t facets = 0;
    std::size_t vertices = 0;  // after welding
    double volume = 0.0;

    std::size_t count(MeshIssue::Kind k) const {
        return static_cast<std::size_t>(
            std::count_if(issues.begin(), issues.end(), [k](const MeshIssue& i) { return i.kind == k; }));
    }
    bool ok() const { return issues.empty(); }
    bool watertight() const { return count(MeshIssue::Kind::OpenEdge) == 0 && count(MeshIssue::Kind::TJunction) == 0; }

    std::string summary() const {
        std::ostringstream os;
        os << facets << " facets, " << vertices << " vertices, volume " << volume;
        if (ok()) return os.str() + ", no defects";
        std::map<std::string, std::size_t> by;
        for (const auto& i : issues) ++by[issue_name(i.kind)];
        for (const auto& [k, n] : by) os << ", " << n << " " << k;
        return os.str();
    }
};

namespace detail {

// Welds vertices closer than tol via a hash of quantized positions.
class VertexWelder {
public:
    explicit VertexWelder(double tol) : tol_(tol) {}

    std::uint32_t add(const Vec3& p) {
        const auto key = quantize(p);
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    auto it = cells_.find(pack({key[0] + dx, key[1] + dy, key[2] + dz}));
                    if (it == cells_.end()) continue;
                    for (std::uint32_t id : it->second)
                        if ((points_[id] - p).norm() <= tol_) return id;
                }
        const auto id = static_cast<std::uint32_t>(points_.size());
        points_.push_back(p);
        cells_[pack(key)].push_back(id);
        return id;
    }

    const std::vector<Vec3>& points() const { return points_; }

private:
    std::array<std::int64_t, 3> quantize(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / tol_)), static_cast<std::int64_t>(std::floor(p.y() / tol_)),
                static_cast<std::int64_t>(std::floor(p.z() / tol_))};
    }
    static std::uint64_t pack(const std::array<std::int64_t, 3>& k) {
        const auto h = [](std::int64_t v) { return static_cast<std::uint64_t>(v) * 0x9E3779B97F4A7C15ULL; };
        return h(k[0]) ^ (h(k[1]) >> 21 | h(k[1]) << 43) ^ (h(k[2]) >> 42 | h(k[2]) << 22);
    }

    double tol_;
    std::vector<Vec3> points_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

inline std::string fmt_point(const Vec3& p) {
    std::ostringstream os;
    os << "(" << p.x() << ", " << p.y() << ", " << p.z() << ")";
    return os.str();
}

}  // namespace detail

/// Checks the three STL rules (no vertex on another facet's side, strictly
/// positive coordinates, normal and winding both outward) plus closedness.
/// `require_positive` can be switched off for meshes not yet shifted for export.
inline MeshReport validate(const TriangleMesh& mesh, bool require_positive = true) {
    MeshReport rep;
    rep.facets = mesh.facets.size();
    if (mesh.facets.empty()) {
        rep.issues.push_back({MeshIssue::Kind::OpenEdge, "mesh has no facets"});
        return rep;
    }
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    const double diag = (hi - lo).norm();
    const double tol = 1e-6 * std::max(diag, 1e-300);

    detail::VertexWelder welder(tol);
    std::vector<std::array<std::uint32_t, 3>> tris(mesh.facets.size());
    for (std::size_t k = 0; k < mesh.facets.size(); ++k)
        for (int c = 0; c < 3; ++c) tris[k][c] = welder.add(mesh.facets[k].v[c]);
    const auto& pts = welder.points();
    rep.vertices = pts.size();

    // rule 2
    if (require_positive)
        for (const Vec3& p : pts)
            if (p.x() <= 0.0 || p.y() <= 0.0 || p.z() <= 0.0)
                rep.issues.push_back({MeshIssue::Kind::NonPositive, "vertex " + detail::fmt_point(p) + " is not strictly positive"});

    // rule 3, stated normal against winding
    for (std::size_t k = 0; k < mesh.facets.size(); ++k) {
        const Facet& f = mesh.facets[k];
        const Vec3 w = f.winding_normal();
        if (w.norm() <= tol * tol || tris[k][0] == tris[k][1] || tris[k][1] == tris[k][2] || tris[k][0] == tris[k][2]) {
            rep.issues.push_back({MeshIssue::Kind::Degenerate, "facet " + std::to_string(k) + " has zero area"});
            continue;
        }
        if (f.normal.norm() == 0.0 || w.normalized().dot(f.normal.normalized()) < 1.0 - 1e-6)
            rep.issues.push_back({MeshIssue::Kind::Orientation, "facet " + std::to_string(k) + ": normal disagrees with vertex order"});
    }

    // edges: each undirected edge must be used twice, once per direction
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::array<int, 2>> edges;
    for (const auto& t : tris)
        for (int c = 0; c < 3; ++c) {
            const std::uint32_t a = t[c], b = t[(c + 1) % 3];
            if (a == b) continue;
            auto& e = edges[{std::min(a, b), std::max(a, b)}];
            ++e[a < b ? 0 : 1];
        }
    for (const auto& [key, e] : edges) {
        const int total = e[0] + e[1];
        const std::string where = detail::fmt_point(pts[key.first]) + "-" + detail::fmt_point(pts[key.second]);
        if (total != 2)
            rep.issues.push_back({MeshIssue::Kind::OpenEdge, "edge " + where + " used by " + std::to_string(total) + " facet(s)"});
        else if (e[0] != 1)
            rep.issues.push_back({MeshIssue::Kind::Orientation, "edge " + where + " traversed twice in the same direction"});
    }

    // rule 1: a welded vertex strictly inside another facet's edge
    {
        double mean_len = 0.0;
        for (const auto& [key, e] : edges) mean_len += (pts[key.first] - pts[key.second]).norm();
        mean_len /= static_cast<double>(edges.size());
        const double cell = std::max(mean_len, 10.0 * tol);
        std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> bins;
        auto cell_of = [&](const Vec3& p) {
            return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor((p.x() - lo.x()) / cell)),
                                               static_cast<std::int64_t>(std::floor((p.y() - lo.y()) / cell)),
                                               static_cast<std::int64_t>(std::floor((p.z() - lo.z()) / cell))};
        };
        auto key_of = [](std::int64_t x, std::int64_t y, std::int64_t z) {
            return (static_cast<std::uint64_t>(x) * 73856093ULL) ^ (static_cast<std::uint64_t>(y) * 19349663ULL) ^
                   (static_cast<std::uint64_t>(z) * 83492791ULL);
        };
        for (std::uint32_t id = 0; id < pts.size(); ++id) {
            const auto c = cell_of(pts[id]);
            bins[key_of(c[0], c[1], c[2])].push_back(id);
        }
        for (const auto& [key, e] : edges) {
            const Vec3& a = pts[key.first];
            const Vec3& b = pts[key.second];
            const Vec3 ab = b - a;
            const double len2 = ab.squaredNorm();
            const auto c0 = cell_of(a.cwiseMin(b) - Vec3::Constant(tol));
            const auto c1 = cell_of(a.cwiseMax(b) + Vec3::Constant(tol));
            for (std::int64_t x = c0[0]; x <= c1[0]; ++x)
                for (std::int64_t y = c0[1]; y <= c1[1]; ++y)
                    for (std::int64_t z = c0[2]; z <= c1[2]; ++z) {
                        auto it = bins.find(key_of(x, y, z));
                        if (it == bins.end()) continue;
                        for (std::uint32_t id : it->second) {
                            if (id == key.first || id == key.second) continue;
                            const Vec3& p = pts[id];
                            const double t = (p - a).dot(ab) / len2;
                            if (t <= 0.0 || t >= 1.0) continue;
                            if ((a + t * ab - p).norm() > tol) continue;
                            rep.issues.push_back({MeshIssue::Kind::TJunction,
                                                  "vertex " + detail::fmt_point(p) + " lies on the side " +
                                                      detail::fmt_point(a) + "-" + detail::fmt_point(b)});
                        }
                    }
        }
    }

    rep.volume = mesh.signed_volume();
    if (!(rep.volume > 0.0))
        rep.issues.push_back({MeshIssue::Kind::Volume, "enclosed volume is not positive (facets point inward?)"});
    return rep;
}

// ---------------------------------------------------------------------------
// Isosurfaces

/// Surface {phi = level} of a 3D field by marching tetrahedra (six tetrahedra
/// per cube, all sharing the main diagonal, so neighbouring cubes agree on
/// shared faces). Facets face towards increasing phi, so for phi < level
/// inside, normals point outward. Vertices on shared grid edges are
/// identical, hence a region away from the grid boundary gives a closed mesh.
/// Masked-out nodes count as outside (phi - level = one grid step).
inline TriangleMesh isosurface(const ScalarField3D& phi, double level = 0.0) {
    phi.check();
    const Grid3D& g = phi.grid;
    const double outside = g.min_spacing();
    auto val = [&](const Index<3>& c) {
        const std::size_t id = g.index(c);
        if (!phi.in_domain(id)) return outside;
        const double v = phi.values[id] - level;
        return v == 0.0 ? 1e-300 : v;  // keep vertices off exact nodes
    };
    static const int cube[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static const int tets[6][4] = {{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}};

    TriangleMesh m;
    m.name = "isosurface";
    for (int k = 0; k + 1 < g.dims[2]; ++k)
        for (int j = 0; j + 1 < g.dims[1]; ++j)
            for (int i = 0; i + 1 < g.dims[0]; ++i) {
                std::array<Index<3>, 8> c;
                std::array<double, 8> v;
                std::array<Vec3, 8> p;
                for (int q = 0; q < 8; ++q) {
                    c[q] = {i + cube[q][0], j + cube[q][1], k + cube[q][2]};
                    v[q] = val(c[q]);
                    p[q] = g.position(c[q]);
                }
                for (const auto& t : tets) {
                    std::array<int, 4> in{}, out{};
                    int ni = 0, no = 0;
                    for (int q = 0; q < 4; ++q) (v[t[q]] < 0.0 ? in[ni++] : out[no++]) = t[q];
                    if (ni == 0 || no == 0) continue;
                    auto cut = [&](int a, int b) {
                        // parametrize from the lower node id so shared edges match bit for bit
                        if (g.index(c[a]) > g.index(c[b])) std::swap(a, b);
                        const double s = v[a] / (v[a] - v[b]);
                        return Vec3(p[a] + s * (p[b] - p[a]));
                    };
                    // centroid of the inside part orients the facet
                    Vec3 cin = Vec3::Zero();
                    for (int q = 0; q < ni; ++q) cin += p[in[q]];
                    cin /= ni;
                    auto emit = [&](const Vec3& a, const Vec3& b, const Vec3& d) {
                        Vec3 n = (b - a).cross(d - b);
                        if (n.dot(a - cin) < 0.0)
                            m.add(a, d, b);
                        else
                            m.add(a, b, d);
                    };
                    if (ni == 1) {
                        emit(cut(in[0], out[0]), cut(in[0], out[1]), cut(in[0], out[2]));
                    } else if (ni == 3) {
                        emit(cut(out[0], in[0]), cut(out[0], in[1]), cut(out[0], in[2]));
                    } else {
                        const Vec3 a = cut(in[0], out[0]), b = cut(in[0], out[1]);
                        const Vec3 d = cut(in[1], out[1]), e = cut(in[1], out[0]);
                        emit(a, b, d);
                        emit(a, d, e);
                    }
                }
            }
    return m;
}

}  // namespace shadeprint
