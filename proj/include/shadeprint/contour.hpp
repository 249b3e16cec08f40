// Marching-squares iso-contours of a 2D field.
#pragma once

#include <unordered_map>
#include <vector>

#include "shadeprint/field.hpp"

namespace shadeprint {

namespace detail {

// Drops consecutive vertices closer than `tol`; for closed loops also the
// wrap-around duplicate.
inline void dedupe_vertices(Polyline2D& pl, double tol) {
    std::vector<Vec2> out;
    out.reserve(pl.vertices.size());
    for (const Vec2& v : pl.vertices)
        if (out.empty() || (v - out.back()).norm() > tol) out.push_back(v);
    if (pl.closed)
        while (out.size() > 1 && (out.front() - out.back()).norm() <= tol) out.pop_back();
    pl.vertices = std::move(out);
}

}  // namespace detail

/// Iso-contours of `field` at `level`.
///
/// Polylines are oriented with the region where field < level on their left.
/// A node whose value equals `level` is treated as lying slightly above it.
/// Saddle cells are split by the value at the cell centre. Cells touching a
/// masked-out node are skipped, so contours that reach the mask come back open.
inline std::vector<Polyline2D> extract_contours(const ScalarField2D& field, double level) {
    const Grid2D& g = field.grid;
    const int nx = g.dims[0];
    const int ny = g.dims[1];
    const double eps = 1e-12 * g.min_spacing();

    auto value = [&](int i, int j) {
        const double v = field.values[g.index({i, j})];
        return v == level ? level + eps : v;
    };
    auto high = [&](int i, int j) { return value(i, j) > level; };

    // Edge ids: 2*node for the +x edge leaving the node, 2*node+1 for the +y edge.
    auto hedge = [&](int i, int j) { return 2 * (static_cast<long long>(j) * nx + i); };
    auto vedge = [&](int i, int j) { return 2 * (static_cast<long long>(j) * nx + i) + 1; };

    auto crossing = [&](long long edge) {
        const long long node = edge / 2;
        const int i = static_cast<int>(node % nx);
        const int j = static_cast<int>(node / nx);
        const int i2 = (edge % 2 == 0) ? i + 1 : i;
        const int j2 = (edge % 2 == 0) ? j : j + 1;
        const double a = value(i, j);
        const double b = value(i2, j2);
        const double t = (level - a) / (b - a);
        const Vec2 pa = g.position(Index<2>{i, j});
        const Vec2 pb = g.position(Index<2>{i2, j2});
        return Vec2(pa + t * (pb - pa));
    };

    std::unordered_map<long long, long long> next;  // start edge -> end edge
    std::unordered_map<long long, int> has_pred;

    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            if (field.has_mask() && (!field.in_domain(Index<2>{i, j}) || !field.in_domain(Index<2>{i + 1, j}) ||
                                     !field.in_domain(Index<2>{i, j + 1}) || !field.in_domain(Index<2>{i + 1, j + 1})))
                continue;
            // Corners counter-clockwise, edges e_k joins corner k to corner k+1.
            const std::array<Index<2>, 4> c{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
            const std::array<long long, 4> e{hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j)};
            std::array<bool, 4> hi{};
            for (int k = 0; k < 4; ++k) hi[k] = high(c[k][0], c[k][1]);

            std::array<int, 4> kind{};  // +1: low->high (segment start), -1: high->low (segment end)
            int count = 0;
            for (int k = 0; k < 4; ++k) {
                const bool a = hi[k];
                const bool b = hi[(k + 1) % 4];
                kind[k] = (a == b) ? 0 : (b ? 1 : -1);
                count += kind[k] != 0;
            }
            if (count == 0) continue;

            bool centre_high = false;
            if (count == 4) {
                const double centre =
                    0.25 * (value(i, j) + value(i + 1, j) + value(i + 1, j + 1) + value(i, j + 1));
                centre_high = centre > level;
            }
            for (int k = 0; k < 4; ++k) {
                if (kind[k] != 1) continue;
                int end = -1;
                if (count == 2) {
                    for (int m = 0; m < 4; ++m)
                        if (kind[m] == -1) end = m;
                } else {
                    end = centre_high ? (k + 3) % 4 : (k + 1) % 4;
                }
                next[e[k]] = e[end];
                has_pred[e[end]] = 1;
            }
        }
    }

    std::vector<Polyline2D> out;
    std::unordered_map<long long, int> used;
    auto trace = [&](long long start) {
        Polyline2D pl;
        long long cur = start;
        pl.vertices.push_back(crossing(cur));
        used[cur] = 1;
        while (true) {
            auto it = next.find(cur);
            if (it == next.end()) break;
            cur = it->second;
            if (cur == start) {
                pl.closed = true;
                break;
            }
            pl.vertices.push_back(crossing(cur));
            used[cur] = 1;
        }
        detail::dedupe_vertices(pl, 1e-9 * g.min_spacing());
        if (pl.closed && pl.vertices.size() < 3) return;
        if (pl.vertices.size() < 2) return;
        out.push_back(std::move(pl));
    };

    // Open chains first (they start on an edge nobody leads into), then loops.
    std::vector<long long> starts;
    starts.reserve(next.size());
    for (const auto& kv : next) starts.push_back(kv.first);
    std::sort(starts.begin(), starts.end());
    for (long long s : starts)
        if (!has_pred.count(s)) trace(s);
    for (long long s : starts)
        if (!used.count(s)) trace(s);
    return out;
}

}  // namespace shadeprint
