// Uniform node-centred grids and the scalar fields sampled on them.
//
// Every solver in the library works on these types: images, heightmaps,
// Kruzkov variables, level-set functions and arrival times are all
// ScalarField<2> or ScalarField<3>.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "shadeprint/error.hpp"

namespace shadeprint {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

template <int D>
using Index = std::array<int, static_cast<std::size_t>(D)>;

/// Node-centred uniform grid. Node k sits at origin + spacing * k.
/// `dims` counts nodes per axis (at least 2).
template <int D>
struct Grid {
    Vec<D> origin = Vec<D>::Zero();
    Vec<D> spacing = Vec<D>::Ones();
    Index<D> dims{};

    Grid() { dims.fill(2); }
    Grid(const Vec<D>& o, const Vec<D>& s, const Index<D>& n) : origin(o), spacing(s), dims(n) { check(); }

    void check() const {
        for (int k = 0; k < D; ++k) {
            if (!(spacing[k] > 0.0)) throw InputError("grid spacing must be positive on every axis");
            if (dims[k] < 2) throw InputError("grid needs at least two nodes per axis");
        }
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (int k = 0; k < D; ++k) n *= static_cast<std::size_t>(dims[k]);
        return n;
    }

    std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int k = 0; k < axis; ++k) s *= static_cast<std::size_t>(dims[k]);
        return s;
    }

    std::size_t index(const Index<D>& c) const {
        std::size_t id = 0;
        for (int k = D - 1; k >= 0; --k) id = id * static_cast<std::size_t>(dims[k]) + static_cast<std::size_t>(c[k]);
        return id;
    }

    Index<D> coords(std::size_t id) const {
        Index<D> c{};
        for (int k = 0; k < D; ++k) {
            c[k] = static_cast<int>(id % static_cast<std::size_t>(dims[k]));
            id /= static_cast<std::size_t>(dims[k]);
        }
        return c;
    }

    bool contains(const Index<D>& c) const {
        for (int k = 0; k < D; ++k)
            if (c[k] < 0 || c[k] >= dims[k]) return false;
        return true;
    }

    Vec<D> position(const Index<D>& c) const {
        Vec<D> p;
        for (int k = 0; k < D; ++k) p[k] = origin[k] + spacing[k] * c[k];
        return p;
    }
    Vec<D> position(std::size_t id) const { return position(coords(id)); }

    Vec<D> upper() const {
        Vec<D> p;
        for (int k = 0; k < D; ++k) p[k] = origin[k] + spacing[k] * (dims[k] - 1);
        return p;
    }

    double min_spacing() const { return spacing.minCoeff(); }

    bool inside_box(const Vec<D>& p, double slack = 1e-12) const {
        const Vec<D> hi = upper();
        for (int k = 0; k < D; ++k) {
            const double tol = slack * spacing[k];
            if (p[k] < origin[k] - tol || p[k] > hi[k] + tol) return false;
        }
        return true;
    }

    Vec<D> clamp_to_box(Vec<D> p) const {
        const Vec<D> hi = upper();
        for (int k = 0; k < D; ++k) p[k] = std::clamp(p[k], origin[k], hi[k]);
        return p;
    }

    bool operator==(const Grid& o) const { return origin == o.origin && spacing == o.spacing && dims == o.dims; }
};

using Grid2D = Grid<2>;
using Grid3D = Grid<3>;

/// Nodal samples of a scalar function, with an optional domain mask.
/// An empty mask means every node belongs to the domain.
template <int D>
struct ScalarField {
    Grid<D> grid;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    ScalarField() = default;
    explicit ScalarField(const Grid<D>& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

    template <class F>
    static ScalarField sample(const Grid<D>& g, F&& f) {
        ScalarField out(g);
        for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.position(i));
        return out;
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& at(const Index<D>& c) { return values[grid.index(c)]; }
    double at(const Index<D>& c) const { return values[grid.index(c)]; }

    bool has_mask() const { return !mask.empty(); }
    bool in_domain(std::size_t i) const { return mask.empty() || mask[i] != 0; }
    bool in_domain(const Index<D>& c) const { return in_domain(grid.index(c)); }

    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }

    void check() const {
        grid.check();
        if (values.size() != grid.size()) throw InputError("field value count does not match the grid");
        if (!mask.empty() && mask.size() != grid.size()) throw InputError("field mask size does not match the grid");
    }
};

using ScalarField2D = ScalarField<2>;
using ScalarField3D = ScalarField<3>;

struct Polyline2D {
    std::vector<Vec2> vertices;
    bool closed = false;

    double length() const {
        double len = 0.0;
        for (std::size_t i = 1; i < vertices.size(); ++i) len += (vertices[i] - vertices[i - 1]).norm();
        if (closed && vertices.size() > 2) len += (vertices.front() - vertices.back()).norm();
        return len;
    }

    /// Shoelace area; positive for counter-clockwise loops.
    double signed_area() const {
        if (!closed || vertices.size() < 3) return 0.0;
        double a = 0.0;
        for (std::size_t i = 0, n = vertices.size(); i < n; ++i) {
            const Vec2& p = vertices[i];
            const Vec2& q = vertices[(i + 1) % n];
            a += p.x() * q.y() - q.x() * p.y();
        }
        return 0.5 * a;
    }

    void reverse() { std::reverse(vertices.begin(), vertices.end()); }
};

// ---------------------------------------------------------------------------
// Interpolation

/// Multilinear interpolation stencil: up to 2^D node ids with weights that
/// are nonnegative and sum to one.
template <int D>
struct InterpStencil {
    std::array<std::size_t, (1 << D)> nodes{};
    std::array<double, (1 << D)> weights{};
};

template <int D>
InterpStencil<D> interp_stencil(const Grid<D>& g, const Vec<D>& p) {
    if (!g.inside_box(p)) throw std::domain_error("interpolation point outside the grid");
    Index<D> base{};
    std::array<double, D> t{};
    for (int k = 0; k < D; ++k) {
        const double s = (p[k] - g.origin[k]) / g.spacing[k];
        int c = static_cast<int>(std::floor(s));
        c = std::clamp(c, 0, g.dims[k] - 2);
        base[k] = c;
        t[k] = std::clamp(s - c, 0.0, 1.0);
    }
    InterpStencil<D> st;
    for (int corner = 0; corner < (1 << D); ++corner) {
        Index<D> c = base;
        double w = 1.0;
        for (int k = 0; k < D; ++k) {
            const bool up = (corner >> k) & 1;
            c[k] += up ? 1 : 0;
            w *= up ? t[k] : 1.0 - t[k];
        }
        st.nodes[corner] = g.index(c);
        st.weights[corner] = w;
    }
    return st;
}

template <int D>
double interpolate(const ScalarField<D>& f, const Vec<D>& p) {
    const auto st = interp_stencil(f.grid, p);
    double v = 0.0;
    for (int c = 0; c < (1 << D); ++c) v += st.weights[c] * f.values[st.nodes[c]];
    return v;
}

/// Same as interpolate() but reads from an external node vector laid out on `g`.
template <int D>
double interpolate(const Grid<D>& g, const std::vector<double>& values, const Vec<D>& p) {
    const auto st = interp_stencil(g, p);
    double v = 0.0;
    for (int c = 0; c < (1 << D); ++c) v += st.weights[c] * values[st.nodes[c]];
    return v;
}

inline double interp_bilinear(const ScalarField2D& f, const Vec2& p) { return interpolate(f, p); }

// ---------------------------------------------------------------------------
// Finite differences

namespace detail {

template <int D>
double diff_axis(const ScalarField<D>& f, Index<D> c, int axis, int bias) {
    const int n = f.grid.dims[axis];
    const double h = f.grid.spacing[axis];
    const int i = c[axis];
    auto val = [&](int k) {
        Index<D> q = c;
        q[axis] = k;
        return f.at(q);
    };
    const bool has_lo = i > 0;
    const bool has_hi = i < n - 1;
    if (bias < 0 && has_lo) return (val(i) - val(i - 1)) / h;
    if (bias > 0 && has_hi) return (val(i + 1) - val(i)) / h;
    if (has_lo && has_hi) return (val(i + 1) - val(i - 1)) / (2.0 * h);
    if (has_hi) return (val(i + 1) - val(i)) / h;
    return (val(i) - val(i - 1)) / h;
}

}  // namespace detail

/// Second-order central differences, one-sided at the grid boundary.
template <int D>
Vec<D> gradient_central(const ScalarField<D>& f, const std::type_identity_t<Index<D>>& node) {
    Vec<D> g;
    for (int k = 0; k < D; ++k) g[k] = detail::diff_axis(f, node, k, 0);
    return g;
}

/// One-sided differences taken from the side the flow comes from: a positive
/// direction component uses the backward difference. Zero components fall
/// back to central differences.
template <int D>
Vec<D> gradient_upwind(const ScalarField<D>& f, const std::type_identity_t<Index<D>>& node, const std::type_identity_t<Vec<D>>& direction) {
    Vec<D> g;
    for (int k = 0; k < D; ++k) {
        const int bias = direction[k] > 0.0 ? -1 : (direction[k] < 0.0 ? 1 : 0);
        g[k] = detail::diff_axis(f, node, k, bias);
    }
    return g;
}

}  // namespace shadeprint
