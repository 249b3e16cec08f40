// Two-image photometric stereo for Lambertian surfaces under orthographic
// projection. The pair of irradiance equations reduces to the linear
// transport problem b . grad u = f, solved by first-order upwinding.
#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"

namespace shadeprint {

struct PSProblem {
    ScalarField2D i1, i2;  // share one grid; the mask of i1 is the domain
    Vec3 l1{0.0, 0.0, 1.0}, l2{0.0, 0.0, 1.0};
    // Dirichlet data on boundary nodes (and masked-out nodes). Empty means 0.
    std::vector<double> boundary;

    double g(std::size_t i) const { return boundary.empty() ? 0.0 : boundary[i]; }

    void check() const {
        i1.check();
        i2.check();
        if (!(i1.grid == i2.grid)) throw InputError("photometric stereo: images must share one grid");
        if (i2.has_mask() && i2.mask != i1.mask && i1.has_mask())
            throw InputError("photometric stereo: images must share one mask");
        for (const Vec3* l : {&l1, &l2}) {
            if (std::abs(l->norm() - 1.0) > 1e-9) throw InputError("photometric stereo: lights must be unit vectors");
            if (!(l->z() > 0.0)) throw InputError("photometric stereo: lights need a positive third component");
        }
        if (l1.cross(l2).norm() < 1e-9) throw InputError("photometric stereo: lights must not be parallel");
        if (!boundary.empty() && boundary.size() != i1.size()) throw InputError("photometric stereo: boundary size mismatch");
    }
};

struct TransportField {
    Grid2D grid;
    std::vector<Vec2> b;
    ScalarField2D f;
};

/// b = I2 l1' - I1 l1'', f = I2 l1'_3 - I1 l2'_3 per node (component-wise as
/// in the transport equation). Masked-out nodes get b = 0, f = 0.
inline TransportField assemble_bf(const PSProblem& pb) {
    pb.check();
    TransportField out;
    out.grid = pb.i1.grid;
    out.b.assign(out.grid.size(), Vec2::Zero());
    out.f = ScalarField2D(out.grid, 0.0);
    out.f.mask = pb.i1.mask;
    for (std::size_t i = 0; i < out.grid.size(); ++i) {
        if (!pb.i1.in_domain(i)) continue;
        const double a = pb.i1.values[i], c = pb.i2.values[i];
        out.b[i] = Vec2(c * pb.l1.x() - a * pb.l2.x(), c * pb.l1.y() - a * pb.l2.y());
        out.f.values[i] = c * pb.l1.z() - a * pb.l2.z();
    }
    return out;
}

struct TransportSolution {
    ScalarField2D u;
    double residual = 0.0;  // sup |b . grad u - f| with central differences, interior nodes
    int sweeps = 0;
    bool converged = false;
    std::vector<std::uint8_t> degenerate;   // |b| below threshold
    std::vector<std::uint8_t> unreachable;  // not connected to the Dirichlet data along characteristics
    std::size_t degenerate_count = 0;
    std::size_t unreachable_count = 0;
};

namespace detail {

// Orientation shared by all nodes: principal axis of sum b b^T. It is
// invariant under b -> -b, so swapping the two images gives the same scheme.
inline Vec2 dominant_direction(const std::vector<Vec2>& b) {
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    for (const Vec2& v : b) m += v * v.transpose();
    Vec2 d(1.0, 0.0);
    if (m.trace() > 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
        d = es.eigenvectors().col(1);
    }
    if (d.x() < 0.0 || (d.x() == 0.0 && d.y() < 0.0)) d = -d;
    return d;
}

}  // namespace detail

/// Solves b . grad u = f with u = g on the domain boundary (grid edge nodes
/// and nodes next to masked-out ones) and on masked-out nodes.
///
/// Each node's equation is oriented so that b points along a common dominant
/// direction; the upwind neighbour on each axis is then picked by the sign of
/// the oriented b. Gauss-Seidel sweeps in four orders run to convergence.
inline TransportSolution solve_transport(const TransportField& tf, const std::vector<double>& boundary = {},
                                         int max_sweeps = 10000, double tol = 1e-14) {
    const Grid2D& grid = tf.grid;
    const std::size_t n = grid.size();
    if (tf.b.size() != n || tf.f.size() != n) throw InputError("transport: field sizes do not match the grid");
    if (!boundary.empty() && boundary.size() != n) throw InputError("transport: boundary size mismatch");
    const int nx = grid.dims[0], ny = grid.dims[1];
    const ScalarField2D& f = tf.f;

    TransportSolution sol;
    sol.u = ScalarField2D(grid, 0.0);
    sol.u.mask = f.mask;
    sol.degenerate.assign(n, 0);
    sol.unreachable.assign(n, 0);
    std::vector<double>& u = sol.u.values;

    // Dirichlet nodes.
    std::vector<std::uint8_t> fixed(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Index<2> c = grid.coords(i);
        bool edge = !f.in_domain(i) || c[0] == 0 || c[1] == 0 || c[0] == nx - 1 || c[1] == ny - 1;
        for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const Index<2> q{c[0] + dx, c[1] + dy};
            if (grid.contains(q) && !f.in_domain(q)) edge = true;
        }
        if (edge) {
            fixed[i] = 1;
            u[i] = boundary.empty() ? 0.0 : boundary[i];
        }
    }

    double bmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (f.in_domain(i)) bmax = std::max(bmax, tf.b[i].norm());
    const double eps = 1e-9 * bmax;
    const Vec2 dir = detail::dominant_direction(tf.b);
    const Vec2 perp(-dir.y(), dir.x());

    // Oriented coefficients and upwind neighbours per node.
    struct Row {
        double bx = 0.0, by = 0.0, rhs = 0.0, diag = 0.0;
        std::size_t nbx = 0, nby = 0;
    };
    std::vector<Row> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (fixed[i]) continue;
        Vec2 b = tf.b[i];
        double rhs = f.values[i];
        if (b.norm() <= eps) {
            sol.degenerate[i] = 1;
            ++sol.degenerate_count;
            continue;
        }
        const double s = b.dot(dir);
        if (s < 0.0 || (s == 0.0 && b.dot(perp) < 0.0)) b = -b, rhs = -rhs;
        Row& r = rows[i];
        r.bx = std::abs(b.x()) / grid.spacing[0];
        r.by = std::abs(b.y()) / grid.spacing[1];
        r.rhs = rhs;
        r.diag = r.bx + r.by;
        r.nbx = b.x() > 0.0 ? i - 1 : i + 1;
        r.nby = b.y() > 0.0 ? i - static_cast<std::size_t>(nx) : i + static_cast<std::size_t>(nx);
    }

    // Reachability: a node is reached once its upwind neighbours are.
    std::vector<std::uint8_t> reached(fixed);
    for (bool grew = true; grew;) {
        grew = false;
        for (int order = 0; order < 4; ++order)
            for (int jj = 0; jj < ny; ++jj)
                for (int ii = 0; ii < nx; ++ii) {
                    const int j = (order & 2) ? ny - 1 - jj : jj;
                    const int i = (order & 1) ? nx - 1 - ii : ii;
                    const std::size_t id = static_cast<std::size_t>(j) * nx + i;
                    if (reached[id] || sol.degenerate[id]) continue;
                    const Row& r = rows[id];
                    if ((r.bx == 0.0 || reached[r.nbx]) && (r.by == 0.0 || reached[r.nby])) {
                        reached[id] = 1;
                        grew = true;
                    }
                }
    }

    for (int it = 0; it < max_sweeps; ++it) {
        double change = 0.0, scale = 0.0;
        const int order = it % 4;
        for (int jj = 0; jj < ny; ++jj)
            for (int ii = 0; ii < nx; ++ii) {
                const int j = (order & 2) ? ny - 1 - jj : jj;
                const int i = (order & 1) ? nx - 1 - ii : ii;
                const std::size_t id = static_cast<std::size_t>(j) * nx + i;
                if (!reached[id] || fixed[id]) continue;
                const Row& r = rows[id];
                double acc = r.rhs;
                if (r.bx > 0.0) acc += r.bx * u[r.nbx];
                if (r.by > 0.0) acc += r.by * u[r.nby];
                const double v = acc / r.diag;
                change = std::max(change, std::abs(v - u[id]));
                scale = std::max(scale, std::abs(v));
                u[id] = v;
            }
        sol.sweeps = it + 1;
        if (change <= tol * std::max(1.0, scale)) {
            sol.converged = true;
            break;
        }
    }

    // Nodes the characteristics never reach: flag, then fill by repeated
    // averaging of already known 4-neighbours.
    std::vector<std::uint8_t> known(reached);
    for (std::size_t i = 0; i < n; ++i)
        if (!reached[i]) sol.unreachable[i] = 1, ++sol.unreachable_count;
    for (bool grew = sol.unreachable_count > 0; grew;) {
        grew = false;
        std::vector<std::uint8_t> next(known);
        for (std::size_t id = 0; id < n; ++id) {
            if (known[id]) continue;
            const Index<2> c = grid.coords(id);
            double sum = 0.0;
            int cnt = 0;
            for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                const Index<2> q{c[0] + dx, c[1] + dy};
                if (grid.contains(q) && known[grid.index(q)]) sum += u[grid.index(q)], ++cnt;
            }
            if (cnt > 0) {
                u[id] = sum / cnt;
                next[id] = 1;
                grew = true;
            }
        }
        known.swap(next);
    }

    for (std::size_t id = 0; id < n; ++id) {
        if (fixed[id]) continue;
        const Vec2 gu = gradient_central(sol.u, grid.coords(id));
        sol.residual = std::max(sol.residual, std::abs(tf.b[id].dot(gu) - f.values[id]));
    }
    return sol;
}

inline TransportSolution solve_photometric_stereo(const PSProblem& pb) {
    return solve_transport(assemble_bf(pb), pb.boundary);
}

struct AlbedoResult {
    ScalarField2D albedo;       // masked where N . L' <= eps
    double max_discrepancy = 0.0;  // sup |I1/(N.L') - I2/(N.L'')| over nodes where both are defined
};

/// gamma_D = I1 / (N . L') with N the unit normal of u; nodes with N . L' <= eps
/// (or a shadow, I1 = I2 = 0) are masked out.
inline AlbedoResult recover_albedo(const PSProblem& pb, const ScalarField2D& u, double eps = 1e-6) {
    pb.check();
    if (!(u.grid == pb.i1.grid)) throw InputError("albedo: height grid differs from the images");
    AlbedoResult out;
    out.albedo = ScalarField2D(u.grid, 0.0);
    out.albedo.mask.assign(u.size(), 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!pb.i1.in_domain(i)) continue;
        const double a = pb.i1.values[i], c = pb.i2.values[i];
        if (a == 0.0 && c == 0.0) continue;
        const Vec2 p = gradient_central(u, u.grid.coords(i));
        const Vec3 nrm = Vec3(-p.x(), -p.y(), 1.0).normalized();
        const double d1 = nrm.dot(pb.l1), d2 = nrm.dot(pb.l2);
        if (d1 <= eps) continue;
        out.albedo.values[i] = a / d1;
        out.albedo.mask[i] = 1;
        if (d2 > eps) out.max_discrepancy = std::max(out.max_discrepancy, std::abs(a / d1 - c / d2));
    }
    return out;
}

/// Three images from non-coplanar lights. The three pairwise equations
/// b_k . grad u = f_k are combined in the least-squares sense along the
/// dominant characteristic direction d: (sum_k (b_k.d) b_k) . grad u = sum_k (b_k.d) f_k.
inline TransportSolution solve_photometric_stereo3(const ScalarField2D& i1, const ScalarField2D& i2,
                                                   const ScalarField2D& i3, const Vec3& l1, const Vec3& l2,
                                                   const Vec3& l3, const std::vector<double>& boundary = {}) {
    if (std::abs(l1.dot(l2.cross(l3))) < 1e-9) throw InputError("photometric stereo: three lights must be non-coplanar");
    const std::array<PSProblem, 3> pairs{PSProblem{i1, i2, l1, l2, boundary}, PSProblem{i1, i3, l1, l3, boundary},
                                         PSProblem{i2, i3, l2, l3, boundary}};
    std::array<TransportField, 3> tf;
    for (int k = 0; k < 3; ++k) {
        tf[k] = assemble_bf(pairs[k]);
        tf[k].f.mask = i1.mask;
    }
    std::vector<Vec2> all;
    for (const auto& t : tf) all.insert(all.end(), t.b.begin(), t.b.end());
    const Vec2 d = detail::dominant_direction(all);
    TransportField comb;
    comb.grid = i1.grid;
    comb.b.assign(comb.grid.size(), Vec2::Zero());
    comb.f = ScalarField2D(comb.grid, 0.0);
    comb.f.mask = i1.mask;
    for (std::size_t i = 0; i < comb.grid.size(); ++i)
        for (const auto& t : tf) {
            const double w = t.b[i].dot(d);
            comb.b[i] += w * t.b[i];
            comb.f.values[i] += w * t.f.values[i];
        }
    return solve_transport(comb, boundary);
}

}  // namespace shadeprint
