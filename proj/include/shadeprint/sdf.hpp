// Signed distance to a closed triangle mesh. The magnitude is the distance to
// the nearest facet, the sign comes from the total solid angle the facets
// subtend (4 pi inside, 0 outside).
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"
#include "shadeprint/mesh.hpp"

namespace shadeprint {

/// Closest point on the closed triangle (a, b, c) to p (Voronoi-region walk).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_distance(const Vec3& p, const Facet& f) {
    return (p - closest_point_on_triangle(p, f.v[0], f.v[1], f.v[2])).norm();
}

struct SolidAngle {
    double value = 0.0;
    bool singular = false;  // p lies on the facet (numerically)
};

/// Signed solid angle of the facet seen from p (van Oosterom-Strackee).
/// Positive when p is on the side opposite to the winding normal, i.e. sees
/// the interior side of an outward-oriented facet.
inline SolidAngle solid_angle(const Vec3& p, const Facet& f, double eps = 1e-12) {
    const Vec3 a = f.v[0] - p, b = f.v[1] - p, c = f.v[2] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    SolidAngle out;
    const double scale = std::max({la, lb, lc});
    if (std::abs(num) <= eps * scale * scale * scale && den <= 0.0) {
        // In the facet plane and inside the triangle (or on a vertex).
        out.singular = true;
        return out;
    }
    out.value = 2.0 * std::atan2(num, den);
    return out;
}

/// Distance queries against one mesh. Facets are binned on a uniform grid by
/// their bounding boxes; a query scans bins in growing shells and stops once
/// the shell is farther than the best facet found.
class MeshDistance {
public:
    explicit MeshDistance(const TriangleMesh& mesh, bool require_closed = true) : mesh_(mesh) {
        if (mesh.facets.empty()) throw InputError("signed distance: empty mesh");
        if (require_closed) {
            const MeshReport rep = validate(mesh, false);
            if (rep.count(MeshIssue::Kind::OpenEdge) > 0 || rep.count(MeshIssue::Kind::Orientation) > 0)
                throw InputError("signed distance needs a watertight, consistently oriented mesh: " + rep.summary());
        }
        mesh.bounds(lo_, hi_);
        const Vec3 ext = (hi_ - lo_).cwiseMax(Vec3::Constant(1e-12));
        // About two facets per bin on average.
        const double vol = ext.prod();
        const double cell = std::cbrt(vol * 2.0 / static_cast<double>(mesh.facets.size()));
        for (int k = 0; k < 3; ++k) nb_[k] = std::clamp(static_cast<int>(std::ceil(ext[k] / std::max(cell, 1e-300))), 1, 256);
        for (int k = 0; k < 3; ++k) cell_[k] = ext[k] / nb_[k];
        bins_.assign(static_cast<std::size_t>(nb_[0]) * nb_[1] * nb_[2], {});
        boxes_.resize(mesh.facets.size());
        for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
            Vec3 blo = mesh.facets[f].v[0], bhi = blo;
            for (const Vec3& q : mesh.facets[f].v) blo = blo.cwiseMin(q), bhi = bhi.cwiseMax(q);
            boxes_[f] = {blo, bhi};
            const auto c0 = bin_of(blo), c1 = bin_of(bhi);
            for (int z = c0[2]; z <= c1[2]; ++z)
                for (int y = c0[1]; y <= c1[1]; ++y)
                    for (int x = c0[0]; x <= c1[0]; ++x) bins_[flat(x, y, z)].push_back(static_cast<std::uint32_t>(f));
        }
        stamp_.assign(mesh.facets.size(), 0);
    }

    const TriangleMesh& mesh() const { return mesh_; }

    /// Unsigned distance to the nearest facet.
    double unsigned_distance(const Vec3& p) const {
        ++epoch_;
        double best = std::numeric_limits<double>::infinity();
        const auto c = bin_of(p);
        const int rmax = std::max({nb_[0], nb_[1], nb_[2]});
        for (int r = 0; r <= rmax; ++r) {
            // Everything in shell r is at least this far from p.
            if (shell_lower_bound(p, c, r) >= best) break;
            bool any = false;
            for (int z = c[2] - r; z <= c[2] + r; ++z)
                for (int y = c[1] - r; y <= c[1] + r; ++y)
                    for (int x = c[0] - r; x <= c[0] + r; ++x) {
                        if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != r) continue;
                        if (x < 0 || y < 0 || z < 0 || x >= nb_[0] || y >= nb_[1] || z >= nb_[2]) continue;
                        any = true;
                        for (std::uint32_t f : bins_[flat(x, y, z)]) {
                            if (stamp_[f] == epoch_) continue;
                            stamp_[f] = epoch_;
                            if (box_distance(p, boxes_[f].first, boxes_[f].second) >= best) continue;
                            best = std::min(best, point_triangle_distance(p, mesh_.facets[f]));
                        }
                    }
            if (!any && r > 0 && outside_all(c, r)) break;
        }
        return best;
    }

    /// Sum of signed solid angles over all facets; NaN when p is on a facet.
    double angle_sum(const Vec3& p) const {
        double sum = 0.0;
        for (const Facet& f : mesh_.facets) {
            const SolidAngle s = solid_angle(p, f);
            if (s.singular) return std::numeric_limits<double>::quiet_NaN();
            sum += s.value;
        }
        return sum;
    }

    /// Negative inside. Points closer than 1e-9 to the surface count as inside.
    double signed_distance(const Vec3& p) const {
        const double d = unsigned_distance(p);
        if (d < 1e-9) return -d;
        return inside(p) ? -d : d;
    }

    bool inside(const Vec3& p) const {
        const double s = angle_sum(p);
        return std::isnan(s) || s > 2.0 * M_PI;
    }

private:
    std::array<int, 3> bin_of(const Vec3& p) const {
        std::array<int, 3> c{};
        for (int k = 0; k < 3; ++k) c[k] = std::clamp(static_cast<int>(std::floor((p[k] - lo_[k]) / cell_[k])), 0, nb_[k] - 1);
        return c;
    }
    std::size_t flat(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * nb_[1] + static_cast<std::size_t>(y)) * nb_[0] + static_cast<std::size_t>(x);
    }
    static double box_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
        return (p - p.cwiseMax(lo).cwiseMin(hi)).norm();
    }
    // Distance from p to the region outside the (2r-1)^3 block of bins
    // around c, i.e. a lower bound for anything first met in shell r.
    double shell_lower_bound(const Vec3& p, const std::array<int, 3>& c, int r) const {
        if (r == 0) return 0.0;
        double lb = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const double blo = lo_[k] + (c[k] - r + 1) * cell_[k];
            const double bhi = lo_[k] + (c[k] + r) * cell_[k];
            // bins beyond the grid on this side do not exist
            if (c[k] - r >= 0) lb = std::min(lb, std::max(0.0, p[k] - blo));
            if (c[k] + r < nb_[k]) lb = std::min(lb, std::max(0.0, bhi - p[k]));
        }
        return std::max(lb, box_distance(p, lo_, hi_));
    }
    bool outside_all(const std::array<int, 3>& c, int r) const {
        for (int k = 0; k < 3; ++k)
            if (c[k] - r >= 0 || c[k] + r < nb_[k]) return false;
        return true;
    }

    const TriangleMesh& mesh_;
    Vec3 lo_, hi_;
    std::array<int, 3> nb_{};
    Vec3 cell_;
    std::vector<std::vector<std::uint32_t>> bins_;
    std::vector<std::pair<Vec3, Vec3>> boxes_;
    mutable std::vector<std::uint64_t> stamp_;
    mutable std::uint64_t epoch_ = 0;
};

inline double signed_distance(const TriangleMesh& mesh, const Vec3& p) { return MeshDistance(mesh).signed_distance(p); }

/// Samples the signed distance on every node of the grid.
///
/// Only the sign needs care: a node whose distance exceeds the gap to a
/// neighbour cannot be separated from it by the surface, so signs spread
/// along such links and solid-angle sums are only evaluated where a link is
/// missing.
inline ScalarField3D sample_sdf(const TriangleMesh& mesh, const Grid3D& grid) {
    const MeshDistance md(mesh);
    ScalarField3D out(grid, 0.0);
    const std::size_t n = grid.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = md.unsigned_distance(grid.position(i));
    std::vector<std::int8_t> sign(n, 0);
    std::deque<std::size_t> queue;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (sign[seed] != 0) continue;
        sign[seed] = (d[seed] < 1e-9 || md.inside(grid.position(seed))) ? -1 : 1;
        queue.push_back(seed);
        while (!queue.empty()) {
            const std::size_t id = queue.front();
            queue.pop_front();
            const Index<3> c = grid.coords(id);
            for (int k = 0; k < 3; ++k)
                for (int s : {-1, 1}) {
                    Index<3> q = c;
                    q[k] += s;
                    if (!grid.contains(q)) continue;
                    const std::size_t qi = grid.index(q);
                    if (sign[qi] != 0) continue;
                    const double gap = grid.spacing[k] * (1.0 + 1e-9);
                    if (d[id] > gap || d[qi] > gap) {
                        sign[qi] = sign[id];
                        queue.push_back(qi);
                    }
                }
        }
    }
    for (std::size_t i = 0; i < n; ++i) out.values[i] = sign[i] * d[i];
    return out;
}

/// Geodesic icosphere: 20 * 4^level facets on the sphere of radius r.
inline TriangleMesh icosphere(int level, double radius = 1.0, const Vec3& centre = Vec3::Zero()) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            return mid[key] = static_cast<int>(v.size()) - 1;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& tri : f) {
            const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f.swap(next);
    }
    TriangleMesh m;
    m.name = "icosphere";
    for (const auto& tri : f) m.add(centre + radius * v[tri[0]], centre + radius * v[tri[1]], centre + radius * v[tri[2]]);
    return m;
}

}  // namespace shadeprint
