// Shared synthetic fixtures for the unit tests and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "shadeprint/mesh.hpp"
#include "shadeprint/overhang.hpp"
#include "shadeprint/photostereo.hpp"
#include "shadeprint/sfs.hpp"
#include "shadeprint/slicer.hpp"

namespace fixtures {

using namespace shadeprint;

// Unit hemisphere seen from above under a vertical light, on [-L, L]^2.
// The silhouette is the reconstruction domain and g = 0 outside it.
inline SfSProblem hemisphere(int n, double L = 1.1) {
    const Grid2D g(Vec2(-L, -L), Vec2::Constant(2.0 * L / (n - 1)), {n, n});
    SfSProblem pb;
    pb.image = ScalarField2D::sample(g, [](const Vec2& p) {
        const double r2 = p.squaredNorm();
        return r2 < 1.0 ? std::sqrt(1.0 - r2) : 0.0;
    });
    pb.image.mask.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) pb.image.mask[i] = g.position(i).squaredNorm() < 1.0;
    pb.occluding_boundary = true;
    return pb;
}

inline double hemisphere_height(const Vec2& p) {
    const double r2 = p.squaredNorm();
    return r2 < 1.0 ? std::sqrt(1.0 - r2) : 0.0;
}

// Two-light photometric stereo pair of a height function on [-1,1]^2, with
// exact Dirichlet data on the frame.
inline PSProblem ps_pair(int n, const std::function<double(const Vec2&)>& u,
                         const std::function<Vec2(const Vec2&)>& grad, const Vec3& l1 = Vec3(0, 0, 1),
                         const Vec3& l2 = Vec3(0.6, 0, 0.8)) {
    const Grid2D g(Vec2(-1, -1), Vec2::Constant(2.0 / (n - 1)), {n, n});
    PSProblem pb;
    pb.l1 = l1;
    pb.l2 = l2;
    auto shade = [&](const Vec3& l) {
        return ScalarField2D::sample(g, [&](const Vec2& p) {
            const Vec2 d = grad(p);
            return Vec3(-d.x(), -d.y(), 1.0).normalized().dot(l);
        });
    };
    pb.i1 = shade(l1);
    pb.i2 = shade(l2);
    pb.boundary.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) pb.boundary[i] = u(g.position(i));
    return pb;
}

inline double bump(const Vec2& p) { return 0.5 * std::exp(-4.0 * p.squaredNorm()); }
inline Vec2 bump_grad(const Vec2& p) { return -8.0 * p * bump(p); }

// Signed distances of simple solids.
inline double box_sdf(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    const Vec3 c = 0.5 * (lo + hi), e = 0.5 * (hi - lo);
    const Vec3 q = (p - c).cwiseAbs() - e;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

inline double cylinder_sdf(const Vec3& p, double r, double z0, double z1) {
    const Vec2 d(Vec2(p.x(), p.y()).norm() - r, std::max(z0 - p.z(), p.z() - z1));
    return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

// T-bracket standing on z = 0: stem |x|,|y| <= 0.2 up to z = 0.8, arm
// |x| <= 1, |y| <= 0.2 for z in [0.8, 1.1].
inline ScalarField3D t_bracket(double h) {
    const Grid3D g(Vec3(-1.4, -0.4, -0.1), Vec3::Constant(h),
                   {int(2.8 / h) + 1, int(0.8 / h) + 1, int(1.4 / h) + 1});
    return ScalarField3D::sample(g, [](const Vec3& p) {
        return std::min(box_sdf(p, Vec3(-.2, -.2, 0), Vec3(.2, .2, .8)), box_sdf(p, Vec3(-1, -.2, .8), Vec3(1, .2, 1.1)));
    });
}

// Inside the bracket, the part that a 45 degree cone from the stem cannot
// reach: the arm beyond |x| - 0.2 > z - 0.8.
inline bool t_bracket_overhang(const Vec3& p) { return p.z() >= 0.8 && std::abs(p.x()) - 0.2 > p.z() - 0.8; }

// Mushroom: thin stem r = 0.15 up to z = 0.6 under a cap r = 0.6, z in [0.6, 0.8].
inline ScalarField3D mushroom(double h) {
    const int n = int(1.6 / h) + 1, nz = int(1.1 / h) + 1;
    const Grid3D g(Vec3(-0.8, -0.8, -0.1), Vec3::Constant(h), {n, n, nz});
    return ScalarField3D::sample(g, [](const Vec3& p) {
        return std::min(cylinder_sdf(p, 0.15, 0, 0.6), cylinder_sdf(p, 0.6, 0.6, 0.8));
    });
}

// Square pyramid with 45 degree faces, base 1.2 x 1.2 on z = 0.
inline ScalarField3D pyramid(double h) {
    const int n = int(1.6 / h) + 1, nz = int(1.1 / h) + 1;
    const Grid3D g(Vec3(-0.8, -0.8, -0.1), Vec3::Constant(h), {n, n, nz});
    return ScalarField3D::sample(g, [](const Vec3& p) {
        const double s = 0.6 - p.z();
        const double q = std::max(std::abs(p.x()), std::abs(p.y()));
        return std::max({q - s, -p.z(), p.z() - 0.6});
    });
}

// Axis-aligned box [lo, hi] as 12 outward facets.
inline TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
    const Grid2D g(Vec2(lo.x(), lo.y()), Vec2(hi.x() - lo.x(), hi.y() - lo.y()), {2, 2});
    TriangleMesh m = heightfield_to_solid(ScalarField2D(g, hi.z()), lo.z());
    m.name = "box";
    return m;
}

inline TriangleMesh unit_cube(double offset = 1.0) {
    return box_mesh(Vec3::Constant(offset), Vec3::Constant(offset + 1.0));
}

// Cube with one top triangle split at the midpoint of the shared diagonal,
// so the new vertex sits on the side of the neighbouring triangle.
inline TriangleMesh cube_with_t_junction() {
    TriangleMesh m = unit_cube();
    for (std::size_t k = 0; k < m.facets.size(); ++k) {
        const Facet f = m.facets[k];
        if (f.normal.z() < 0.9) continue;
        const Vec3 a = f.v[0], b = f.v[1], c = f.v[2];
        const Vec3 mid = 0.5 * (a + c);
        m.facets.erase(m.facets.begin() + static_cast<std::ptrdiff_t>(k));
        m.add(a, b, mid);
        m.add(mid, b, c);
        break;
    }
    return m;
}

inline TriangleMesh cube_with_flipped_normal() {
    TriangleMesh m = unit_cube();
    m.facets[3].normal = -m.facets[3].normal;
    return m;
}

inline TriangleMesh cube_at_origin() { return unit_cube(0.0); }

// Two thin slanted branches rising from a base slab, like a phone holder
// seen in section.
inline Layer two_branch_layer(double z = 0.2) {
    Polyline2D p;
    p.closed = true;
    p.vertices = {{0, 0}, {40, 0}, {40, 4}, {34, 4}, {44, 30}, {40, 31.5}, {29, 4},
                  {15, 4}, {6, 31.5}, {2, 30}, {10, 4}, {0, 4}};
    Layer l;
    l.z = z;
    l.contours = {p};
    return l;
}

inline Layer square_layer(double side = 1.0, double z = 0.0) {
    Polyline2D p;
    p.closed = true;
    p.vertices = {{0, 0}, {side, 0}, {side, side}, {0, side}};
    Layer l;
    l.z = z;
    l.contours = {p};
    return l;
}

// Distance from p to the polyline (closed loops include the wrap edge).
inline double polyline_distance(const Polyline2D& pl, const Vec2& p) {
    double d = INFINITY;
    const std::size_t n = pl.vertices.size();
    const std::size_t edges = pl.closed ? n : n - 1;
    for (std::size_t i = 0; i < edges; ++i)
        d = std::min(d, detail::segment_distance(p, pl.vertices[i], pl.vertices[(i + 1) % n]));
    return d;
}

// Range of distances from each ring vertex to the ring one spacing further
// out (the layer contour for the first ring).
inline std::pair<double, double> ring_gap_range(const Layer& layer, const InfillResult& r, double spacing) {
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 0; i < r.curves.size(); ++i) {
        const double outer = r.levels[i] - spacing;
        for (const Vec2& v : r.curves[i].vertices) {
            double d = INFINITY;
            if (outer < 0.5 * spacing) {
                for (const auto& c : layer.contours) d = std::min(d, polyline_distance(c, v));
            } else {
                for (std::size_t j = 0; j < r.curves.size(); ++j)
                    if (std::abs(r.levels[j] - outer) < 1e-9) d = std::min(d, polyline_distance(r.curves[j], v));
            }
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    return {lo, hi};
}

}  // namespace fixtures
