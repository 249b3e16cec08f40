// Layer slicing, infill (eikonal offsets or a square grid), toolpath ordering,
// G-code emission/parsing and print metrics.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shadeprint/contour.hpp"
#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"
#include "shadeprint/levelset.hpp"
#include "shadeprint/mesh.hpp"

namespace shadeprint {

struct Layer {
    double z = 0.0;
    std::vector<Polyline2D> contours;  // closed; outer loops counter-clockwise, holes clockwise
};

// ---------------------------------------------------------------------------
// Slicing

/// Cross-section of a closed mesh with the plane z. If the plane passes
/// through a vertex it is lowered by 1e-7 * perturb until it does not.
/// Segments run along z x n, so outer loops come out counter-clockwise.
inline Layer slice_at(const TriangleMesh& mesh, double z, double perturb = 1.0) {
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    const double diag = (hi - lo).norm();
    auto hits_vertex = [&](double zz) {
        for (const Facet& f : mesh.facets)
            for (const Vec3& p : f.v)
                if (p.z() == zz) return true;
        return false;
    };
    for (int guard = 0; hits_vertex(z) && guard < 1000; ++guard) z -= 1e-7 * perturb;

    // Weld vertices so that intersection points on shared edges get one key.
    detail::VertexWelder welder(1e-9 * std::max(diag, 1e-300));
    struct Seg {
        std::pair<std::uint32_t, std::uint32_t> from, to;
        Vec2 a, b;
    };
    std::vector<Seg> segs;
    for (const Facet& f : mesh.facets) {
        std::array<std::uint32_t, 3> id;
        for (int c = 0; c < 3; ++c) id[c] = welder.add(f.v[c]);
        std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, Vec2>> cuts;
        for (int c = 0; c < 3; ++c) {
            const Vec3& p = f.v[c];
            const Vec3& q = f.v[(c + 1) % 3];
            if ((p.z() < z) == (q.z() < z)) continue;
            const double t = (z - p.z()) / (q.z() - p.z());
            const Vec3 x = p + t * (q - p);
            cuts.push_back({{std::min(id[c], id[(c + 1) % 3]), std::max(id[c], id[(c + 1) % 3])}, Vec2(x.x(), x.y())});
        }
        if (cuts.size() != 2) continue;
        const Vec3 dir3 = Vec3(0, 0, 1).cross(f.winding_normal());
        const Vec2 dir(dir3.x(), dir3.y());
        Seg s{cuts[0].first, cuts[1].first, cuts[0].second, cuts[1].second};
        if ((s.b - s.a).dot(dir) < 0.0) std::swap(s.from, s.to), std::swap(s.a, s.b);
        segs.push_back(s);
    }

    Layer layer;
    layer.z = z;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> by_start;
    for (std::size_t i = 0; i < segs.size(); ++i)
        if (!by_start.emplace(segs[i].from, i).second)
            throw InputError("slice at z=" + std::to_string(z) + ": two segments start on the same edge (non-manifold mesh?)");
    std::vector<std::uint8_t> used(segs.size(), 0);
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        Polyline2D loop;
        loop.closed = true;
        std::size_t cur = s0;
        for (;;) {
            used[cur] = 1;
            loop.vertices.push_back(segs[cur].a);
            auto it = by_start.find(segs[cur].to);
            if (it == by_start.end())
                throw InputError("slice at z=" + std::to_string(z) + ": open contour near (" + std::to_string(segs[cur].b.x()) +
                                 ", " + std::to_string(segs[cur].b.y()) + "); the mesh is not watertight");
            cur = it->second;
            if (cur == s0) break;
            if (used[cur]) throw InputError("slice at z=" + std::to_string(z) + ": contours cross");
        }
        detail::dedupe_vertices(loop, 1e-12 * std::max(diag, 1e-300));
        if (loop.vertices.size() >= 3) layer.contours.push_back(std::move(loop));
    }
    return layer;
}

/// Planes z_min + k * layer_height, k = 1, 2, ... up to the top of the mesh;
/// each plane is the top of its layer, where the nozzle runs.
inline std::vector<Layer> slice(const TriangleMesh& mesh, double layer_height) {
    if (!(layer_height > 0.0)) throw InputError("slice: layer height must be positive");
    if (mesh.facets.empty()) return {};
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    std::vector<Layer> layers;
    for (int k = 1;; ++k) {
        const double z = lo.z() + k * layer_height;
        if (z > hi.z() + 1e-9 * layer_height) break;
        Layer l = slice_at(mesh, z, layer_height);
        if (!l.contours.empty()) layers.push_back(std::move(l));
    }
    return layers;
}

// ---------------------------------------------------------------------------
// Layer geometry helpers

namespace detail {

inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double l2 = ab.squaredNorm();
    const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

inline double boundary_distance(const Layer& layer, const Vec2& p) {
    double d = kInf;
    for (const auto& c : layer.contours)
        for (std::size_t i = 0, n = c.vertices.size(); i < n; ++i)
            d = std::min(d, segment_distance(p, c.vertices[i], c.vertices[(i + 1) % n]));
    return d;
}

/// Even-odd inside test over all contours.
inline bool inside_layer(const Layer& layer, const Vec2& p) {
    bool in = false;
    for (const auto& c : layer.contours)
        for (std::size_t i = 0, n = c.vertices.size(); i < n; ++i) {
            const Vec2& a = c.vertices[i];
            const Vec2& b = c.vertices[(i + 1) % n];
            if ((a.y() > p.y()) != (b.y() > p.y())) {
                const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
                if (x > p.x()) in = !in;
            }
        }
    return in;
}

/// Sorted abscissae where the horizontal line y crosses the contours
/// (half-open rule on the y extent of each edge).
inline std::vector<double> row_crossings(const Layer& layer, double y, int axis) {
    std::vector<double> xs;
    const int o = 1 - axis;  // coordinate along the line
    for (const auto& c : layer.contours)
        for (std::size_t i = 0, n = c.vertices.size(); i < n; ++i) {
            const Vec2& a = c.vertices[i];
            const Vec2& b = c.vertices[(i + 1) % n];
            if ((a[axis] > y) != (b[axis] > y)) xs.push_back(a[o] + (y - a[axis]) / (b[axis] - a[axis]) * (b[o] - a[o]));
        }
    std::sort(xs.begin(), xs.end());
    return xs;
}

inline void douglas_peucker(const std::vector<Vec2>& pts, std::size_t i0, std::size_t i1, double tol,
                            std::vector<std::uint8_t>& keep) {
    if (i1 <= i0 + 1) return;
    double worst = -1.0;
    std::size_t at = i0;
    for (std::size_t i = i0 + 1; i < i1; ++i) {
        const double d = segment_distance(pts[i], pts[i0], pts[i1]);
        if (d > worst) worst = d, at = i;
    }
    if (worst > tol) {
        keep[at] = 1;
        douglas_peucker(pts, i0, at, tol, keep);
        douglas_peucker(pts, at, i1, tol, keep);
    }
}

}  // namespace detail

/// Douglas-Peucker simplification; closed loops are split at their first
/// vertex and the vertex farthest from it.
inline Polyline2D simplify(const Polyline2D& pl, double tol) {
    const std::size_t n = pl.vertices.size();
    if (n < 4 || !(tol > 0.0)) return pl;
    std::vector<Vec2> pts = pl.vertices;
    if (pl.closed) pts.push_back(pts.front());
    std::vector<std::uint8_t> keep(pts.size(), 0);
    keep.front() = keep.back() = 1;
    if (pl.closed) {
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if ((pts[i] - pts[0]).norm() > best) best = (pts[i] - pts[0]).norm(), far = i;
        keep[far] = 1;
        detail::douglas_peucker(pts, 0, far, tol, keep);
        detail::douglas_peucker(pts, far, pts.size() - 1, tol, keep);
    } else {
        detail::douglas_peucker(pts, 0, pts.size() - 1, tol, keep);
    }
    Polyline2D out;
    out.closed = pl.closed;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (keep[i]) out.vertices.push_back(pts[i]);
    if (pl.closed) out.vertices.pop_back();
    if (pl.closed && out.vertices.size() < 3) return pl;
    return out;
}

// ---------------------------------------------------------------------------
// Infill

struct InfillResult {
    std::vector<Polyline2D> curves;
    std::vector<double> levels;   // offset distance of each curve (eikonal infill)
    std::size_t thin_regions = 0;  // connected pieces too thin for any curve
    ScalarField2D distance;        // interior distance T (eikonal infill); negative outside
};

/// Offset curves at distances k * spacing from the layer boundary: the level
/// sets of the interior distance T solving |grad T| = 1, T = 0 on the
/// contours. Levels closer than spacing/2 to a piece's maximum of T are
/// skipped there (they would collapse onto the medial axis).
inline InfillResult infill_eikonal(const Layer& layer, double spacing, double grid_step = 0.0) {
    if (!(spacing > 0.0)) throw InputError("infill: spacing must be positive");
    const double h = grid_step > 0.0 ? grid_step : spacing / 4.0;
    if (!(spacing > h)) throw InputError("infill: spacing must exceed the raster step");
    InfillResult out;
    if (layer.contours.empty()) return out;

    Vec2 lo = Vec2::Constant(kInf), hi = Vec2::Constant(-kInf);
    for (const auto& c : layer.contours)
        for (const Vec2& p : c.vertices) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    lo -= Vec2::Constant(2.0 * h);
    hi += Vec2::Constant(2.0 * h);
    const Index<2> dims{static_cast<int>(std::ceil((hi.x() - lo.x()) / h)) + 1,
                        static_cast<int>(std::ceil((hi.y() - lo.y()) / h)) + 1};
    const Grid2D g(lo, Vec2::Constant(h), dims);
    const std::size_t n = g.size();

    // Inside mask by scanlines.
    std::vector<std::uint8_t> inside(n, 0);
    for (int j = 0; j < dims[1]; ++j) {
        const double y = lo.y() + j * h;
        const auto xs = detail::row_crossings(layer, y, 1);
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int i0 = std::max(0, static_cast<int>(std::ceil((xs[k] - lo.x()) / h)));
            const int i1 = std::min(dims[0] - 1, static_cast<int>(std::floor((xs[k + 1] - lo.x()) / h)));
            for (int i = i0; i <= i1; ++i) inside[static_cast<std::size_t>(j) * dims[0] + i] = 1;
        }
    }

    // Exact distance near the boundary, eikonal solve elsewhere.
    ScalarField2D init(g, kInf);
    std::vector<std::uint8_t> fixed(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Index<2> c = g.coords(i);
        bool near = false;
        for (int dj = -2; dj <= 2 && !near; ++dj)
            for (int di = -2; di <= 2 && !near; ++di) {
                const Index<2> q{c[0] + di, c[1] + dj};
                if (g.contains(q) && inside[g.index(q)] != inside[i]) near = true;
            }
        if (near) {
            const double d = detail::boundary_distance(layer, g.position(i));
            init.values[i] = inside[i] ? d : -d;
            fixed[i] = 1;
        } else if (!inside[i]) {
            init.values[i] = -2.0 * h;  // far outside: only the sign matters
            fixed[i] = 1;
        }
    }
    std::vector<double> speed(n, 1.0);
    auto res = solve_eikonal<2>(init, fixed, speed);
    out.distance = std::move(res.T);

    // Connected pieces of the interior and their maximum distance.
    std::vector<int> label(n, -1);
    std::vector<double> piece_max;
    for (std::size_t s = 0; s < n; ++s) {
        if (!inside[s] || label[s] >= 0) continue;
        const int id = static_cast<int>(piece_max.size());
        piece_max.push_back(0.0);
        std::vector<std::size_t> stack{s};
        label[s] = id;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            piece_max[id] = std::max(piece_max[id], out.distance.values[cur]);
            const Index<2> c = g.coords(cur);
            for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                const Index<2> q{c[0] + dx, c[1] + dy};
                if (!g.contains(q)) continue;
                const std::size_t qi = g.index(q);
                if (inside[qi] && label[qi] < 0) label[qi] = id, stack.push_back(qi);
            }
        }
    }
    auto piece_of = [&](const Vec2& p) {
        const Index<2> c{std::clamp(static_cast<int>(std::lround((p.x() - lo.x()) / h)), 0, dims[0] - 1),
                         std::clamp(static_cast<int>(std::lround((p.y() - lo.y()) / h)), 0, dims[1] - 1)};
        // nearest labelled node in a small window
        double best = kInf;
        int id = -1;
        for (int dj = -2; dj <= 2; ++dj)
            for (int di = -2; di <= 2; ++di) {
                const Index<2> q{c[0] + di, c[1] + dj};
                if (!g.contains(q) || label[g.index(q)] < 0) continue;
                const double d = (g.position(q) - p).norm();
                if (d < best) best = d, id = label[g.index(q)];
            }
        return id;
    };

    double tmax = 0.0;
    for (double m : piece_max) tmax = std::max(tmax, m);
    std::vector<std::uint8_t> piece_used(piece_max.size(), 0);
    for (int k = 1; k * spacing <= tmax - 0.5 * spacing; ++k) {
        const double level = k * spacing;
        for (Polyline2D& pl : extract_contours(out.distance, level)) {
            if (pl.vertices.size() < 3) continue;
            const int piece = piece_of(pl.vertices.front());
            if (piece < 0 || level > piece_max[piece] - 0.5 * spacing) continue;
            piece_used[piece] = 1;
            // Distance grows inward, so the low side (left of the curve) faces
            // the boundary; reverse to run counter-clockwise like the outer wall.
            pl.reverse();
            out.curves.push_back(simplify(pl, 0.05 * h));
            out.levels.push_back(level);
        }
    }
    for (std::uint8_t u : piece_used)
        if (!u) ++out.thin_regions;
    return out;
}

/// Axis-parallel lines at absolute multiples of spacing, clipped to the
/// layer interior (even-odd). Pieces running along the boundary are dropped.
inline InfillResult infill_square(const Layer& layer, double spacing) {
    if (!(spacing > 0.0)) throw InputError("infill: spacing must be positive");
    InfillResult out;
    if (layer.contours.empty()) return out;
    Vec2 lo = Vec2::Constant(kInf), hi = Vec2::Constant(-kInf);
    for (const auto& c : layer.contours)
        for (const Vec2& p : c.vertices) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    const double tol = 1e-9 * std::max((hi - lo).norm(), 1.0);
    for (int axis = 0; axis < 2; ++axis) {
        // axis 0: vertical lines x = m * spacing; axis 1: horizontal lines.
        const long long m0 = static_cast<long long>(std::ceil(lo[axis] / spacing));
        const long long m1 = static_cast<long long>(std::floor(hi[axis] / spacing));
        for (long long m = m0; m <= m1; ++m) {
            const double c = m * spacing;
            const auto xs = detail::row_crossings(layer, c, axis);
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                if (xs[k + 1] - xs[k] <= tol) continue;
                Vec2 a, b;
                a[axis] = b[axis] = c;
                a[1 - axis] = xs[k];
                b[1 - axis] = xs[k + 1];
                if (detail::boundary_distance(layer, 0.5 * (a + b)) <= tol) continue;
                Polyline2D pl;
                pl.vertices = {a, b};
                out.curves.push_back(pl);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toolpath and G-code

struct Feeds {
    double perimeter = 1800.0;  // mm/min
    double infill = 2700.0;
    double travel = 6000.0;
};

struct Move {
    Vec3 target = Vec3::Zero();
    double feed = 0.0;  // mm/min
    bool extrude = false;
};

struct ToolPath {
    Vec3 start = Vec3::Zero();
    std::vector<Move> moves;
};

/// Coordinates on the 1e-5 mm lattice the G-code is written on, so that the
/// emitted program parses back to exactly the same doubles.
inline double quantize5(double v) { return std::round(v * 1e5) / 1e5; }

inline Vec3 quantize5(const Vec3& p) { return Vec3(quantize5(p.x()), quantize5(p.y()), quantize5(p.z())); }

/// Per layer: every contour (perimeter feed), then the infill curves in
/// greedy nearest-endpoint order (open curves may be reversed, closed ones
/// start at their nearest vertex).
inline ToolPath plan_toolpath(const std::vector<Layer>& layers, const std::vector<std::vector<Polyline2D>>& infill,
                              const Feeds& feeds = {}) {
    if (infill.size() != layers.size() && !infill.empty()) throw InputError("toolpath: one infill list per layer expected");
    if (!(feeds.perimeter > 0.0 && feeds.infill > 0.0 && feeds.travel > 0.0)) throw InputError("toolpath: feeds must be positive");
    ToolPath tp;
    Vec3 pos = tp.start;
    auto check = [](const Vec3& p) {
        if (!p.allFinite()) throw InputError("toolpath: non-finite coordinate");
    };
    auto go = [&](const Vec3& p, double feed, bool extrude) {
        check(p);
        const Vec3 q = quantize5(p);
        if (q == pos) return;
        tp.moves.push_back({q, feed, extrude});
        pos = q;
    };
    auto run = [&](const Polyline2D& pl, double z, double feed, std::size_t first, bool reversed) {
        const std::size_t n = pl.vertices.size();
        auto at = [&](std::size_t k) {
            const std::size_t i = reversed ? (first + n - k) % n : (first + k) % n;
            return Vec3(pl.vertices[i].x(), pl.vertices[i].y(), z);
        };
        go(at(0), feeds.travel, false);
        const std::size_t count = pl.closed ? n + 1 : n;
        for (std::size_t k = 1; k < count; ++k) go(at(k), feed, true);
    };

    for (std::size_t li = 0; li < layers.size(); ++li) {
        const double z = layers[li].z;
        for (const auto& c : layers[li].contours) {
            if (c.vertices.size() < 2) continue;
            std::size_t first = 0;
            double best = kInf;
            for (std::size_t i = 0; i < c.vertices.size(); ++i) {
                const double d = (Vec3(c.vertices[i].x(), c.vertices[i].y(), z) - pos).norm();
                if (d < best) best = d, first = i;
            }
            run(c, z, feeds.perimeter, first, false);
        }
        if (infill.empty()) continue;
        std::vector<const Polyline2D*> todo;
        for (const auto& pl : infill[li])
            if (pl.vertices.size() >= 2) todo.push_back(&pl);
        while (!todo.empty()) {
            double best = kInf;
            std::size_t pick = 0, first = 0;
            bool rev = false;
            for (std::size_t k = 0; k < todo.size(); ++k) {
                const Polyline2D& pl = *todo[k];
                auto dist = [&](std::size_t i) { return (Vec3(pl.vertices[i].x(), pl.vertices[i].y(), z) - pos).norm(); };
                if (pl.closed) {
                    for (std::size_t i = 0; i < pl.vertices.size(); ++i)
                        if (dist(i) < best) best = dist(i), pick = k, first = i, rev = false;
                } else {
                    if (dist(0) < best) best = dist(0), pick = k, first = 0, rev = false;
                    const std::size_t last = pl.vertices.size() - 1;
                    if (dist(last) < best) best = dist(last), pick = k, first = last, rev = true;
                }
            }
            const Polyline2D& pl = *todo[pick];
            if (pl.closed)
                run(pl, z, feeds.infill, first, false);
            else
                run(pl, z, feeds.infill, rev ? pl.vertices.size() - 1 : 0, rev);
            todo.erase(todo.begin() + static_cast<std::ptrdiff_t>(pick));
        }
    }
    return tp;
}

struct PrintMetrics {
    double print_time = 0.0;       // s
    double material_length = 0.0;  // mm of extruding moves
    double travel_length = 0.0;    // mm of non-extruding moves
    std::size_t move_count = 0;    // travel moves
    std::size_t extrude_moves = 0;
};

inline PrintMetrics metrics(const ToolPath& tp) {
    PrintMetrics m;
    Vec3 pos = tp.start;
    for (const Move& mv : tp.moves) {
        const double len = (mv.target - pos).norm();
        m.print_time += len / mv.feed * 60.0;
        if (mv.extrude) {
            m.material_length += len;
            ++m.extrude_moves;
        } else {
            m.travel_length += len;
            ++m.move_count;
        }
        pos = mv.target;
    }
    return m;
}

struct GCodeProgram {
    std::vector<std::string> lines;
    double total_e = 0.0;

    std::string text() const {
        std::string s;
        for (const auto& l : lines) s += l + "\n";
        return s;
    }
};

inline const std::vector<std::string>& gcode_preamble() {
    static const std::vector<std::string> lines = {"G21 ; millimetres", "G90 ; absolute positioning",
                                                   "M82 ; absolute extrusion", "G28 ; home", "G92 E0"};
    return lines;
}

inline const std::vector<std::string>& gcode_postamble() {
    static const std::vector<std::string> lines = {"G10 ; retract", "M84 ; motors off"};
    return lines;
}

/// One "G1 F X Y Z E" line per move. E is cumulative: each extruding move
/// adds flow * length. F, X, Y, Z carry 5 decimals; E carries 10 so that the
/// final E matches flow * material length to 1e-9 relative.
inline GCodeProgram emit_gcode(const ToolPath& tp, double flow = 0.05) {
    if (!(flow > 0.0)) throw InputError("G-code: flow coefficient must be positive");
    GCodeProgram prog;
    prog.lines = gcode_preamble();
    Vec3 pos = tp.start;
    double e = 0.0;
    char buf[256];
    for (const Move& mv : tp.moves) {
        if (!mv.target.allFinite() || !std::isfinite(mv.feed)) throw InputError("G-code: non-finite move");
        if (!(mv.feed > 0.0)) throw InputError("G-code: feed must be positive");
        if (mv.extrude) e += flow * (mv.target - pos).norm();
        std::snprintf(buf, sizeof buf, "G1 F%.5f X%.5f Y%.5f Z%.5f E%.10f", mv.feed, mv.target.x(), mv.target.y(),
                      mv.target.z(), e);
        prog.lines.emplace_back(buf);
        pos = mv.target;
    }
    prog.total_e = e;
    for (const auto& l : gcode_postamble()) prog.lines.push_back(l);
    return prog;
}

struct ParsedGCode {
    ToolPath path;
    double final_e = 0.0;
    bool e_monotone = true;
};

/// Reads back G1 lines (other commands and comments are skipped). Missing
/// words keep their previous value; a move extrudes when E grows.
inline ParsedGCode parse_gcode(const std::string& text) {
    ParsedGCode out;
    std::istringstream in(text);
    std::string line;
    Vec3 pos = Vec3::Zero();
    double feed = 0.0, e = 0.0;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto semi = line.find(';');
        if (semi != std::string::npos) line.resize(semi);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word) || word != "G1") continue;
        Vec3 target = pos;
        double ne = e;
        bool has_e = false;
        while (ls >> word) {
            if (word.size() < 2) throw InputError("G-code line " + std::to_string(lineno) + ": bad word '" + word + "'");
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(word.substr(1), &used);
                if (used != word.size() - 1) throw std::invalid_argument(word);
            } catch (const std::logic_error&) {
                throw InputError("G-code line " + std::to_string(lineno) + ": bad number in '" + word + "'");
            }
            switch (word[0]) {
                case 'F': feed = v; break;
                case 'X': target.x() = v; break;
                case 'Y': target.y() = v; break;
                case 'Z': target.z() = v; break;
                case 'E': ne = v, has_e = true; break;
                default: throw InputError("G-code line " + std::to_string(lineno) + ": unsupported word '" + word + "'");
            }
        }
        if (has_e && ne < e) out.e_monotone = false;
        out.path.moves.push_back({target, feed, has_e && ne > e});
        pos = target;
        e = ne;
    }
    out.final_e = e;
    return out;
}

}  // namespace shadeprint
