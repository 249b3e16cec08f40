// Level-set machinery: fast-sweeping eikonal solvers (isotropic and
// anisotropic), explicit upwind front evolution, normals and curvature, and
// reinitialization to a signed distance.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"

namespace shadeprint {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct EikonalOptions {
    int max_sweeps = 400;  // one sweep = one pass in one of the 2^D orders
    double tol = 1e-12;    // stop when a full round of orders changes nothing by more than tol
};

struct SweepStats {
    int sweeps = 0;
    bool converged = false;
};

/// Gauss-Seidel sweeps over the 2^D alternating orders. `update(node, a, nb)`
/// receives, per axis, the smaller of the two neighbour values (`a[k]`, +inf
/// when absent) and that neighbour's id (`nb[k]`); it returns a candidate
/// value. Nodes flagged in `fixed` are never written.
template <int D, class Update>
SweepStats fast_sweep(const Grid<D>& g, std::vector<double>& T, const std::vector<std::uint8_t>& fixed,
                      Update&& update, const EikonalOptions& opt = {}) {
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    const std::size_t n = g.size();
    std::array<std::size_t, D> stride{};
    for (int k = 0; k < D; ++k) stride[k] = g.stride(k);
    SweepStats st;
    double round_change = 0.0;
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        const int order = sweep % (1 << D);
        if (order == 0) round_change = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            Index<D> c = g.coords(r);
            for (int k = 0; k < D; ++k)
                if ((order >> k) & 1) c[k] = g.dims[k] - 1 - c[k];
            const std::size_t id = g.index(c);
            if (fixed[id]) continue;
            std::array<double, D> a;
            std::array<std::size_t, D> nb;
            bool any = false;
            for (int k = 0; k < D; ++k) {
                a[k] = kInf;
                nb[k] = none;
                if (c[k] > 0 && T[id - stride[k]] < a[k]) a[k] = T[id - stride[k]], nb[k] = id - stride[k];
                if (c[k] + 1 < g.dims[k] && T[id + stride[k]] < a[k]) a[k] = T[id + stride[k]], nb[k] = id + stride[k];
                any = any || a[k] < kInf;
            }
            if (!any) continue;
            const double t = update(id, a, nb);
            if (t < T[id]) {
                const double d = T[id] - t;
                if (!(d < kInf) || d > round_change) round_change = std::isfinite(d) ? d : kInf;
                T[id] = t;
            }
        }
        st.sweeps = sweep + 1;
        if (order == (1 << D) - 1 && round_change <= opt.tol) {
            st.converged = true;
            break;
        }
    }
    return st;
}

/// Godunov update for sum_k ((T - a_k)^+ / h_k)^2 = s^2 with slowness s.
template <int D>
double godunov_update(std::array<double, D> a, std::array<double, D> h, double s) {
    std::array<int, D> ord;
    for (int k = 0; k < D; ++k) ord[k] = k;
    std::sort(ord.begin(), ord.end(), [&](int x, int y) { return a[x] < a[y]; });
    double t = kInf;
    double sa = 0.0, sa2 = 0.0, sw = 0.0;  // sums of a/h^2, a^2/h^2, 1/h^2
    for (int m = 0; m < D; ++m) {
        const int k = ord[m];
        if (!(a[k] < kInf)) break;
        const double w = 1.0 / (h[k] * h[k]);
        sw += w;
        sa += a[k] * w;
        sa2 += a[k] * a[k] * w;
        const double disc = sa * sa - sw * (sa2 - s * s);
        if (disc < 0.0) break;
        t = (sa + std::sqrt(disc)) / sw;
        if (m + 1 < D && !(t > a[ord[m + 1]])) break;
    }
    return t;
}

template <int D>
struct EikonalResult {
    ScalarField<D> T;
    SweepStats stats;
};

/// Solves v |grad T| = 1. Nodes with `fixed[i] != 0` keep their value from
/// `initial` (sources, T = 0, or Dirichlet data); every other node starts at
/// +inf. A node whose initial value is +inf and which is fixed acts as a wall.
/// `speed` is per node and must be positive where the solve is performed.
template <int D>
EikonalResult<D> solve_eikonal(const ScalarField<D>& initial, const std::vector<std::uint8_t>& fixed,
                               const std::vector<double>& speed, const EikonalOptions& opt = {}) {
    initial.check();
    const Grid<D>& g = initial.grid;
    if (fixed.size() != g.size() || speed.size() != g.size()) throw InputError("eikonal: size mismatch");
    EikonalResult<D> res{ScalarField<D>(g, kInf), {}};
    res.T.mask = initial.mask;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (fixed[i]) {
            res.T.values[i] = initial.values[i];
        } else if (!(speed[i] > 0.0)) {
            throw InputError("eikonal: speed must be positive on every free node");
        }
    }
    std::array<double, D> h;
    for (int k = 0; k < D; ++k) h[k] = g.spacing[k];
    res.stats = fast_sweep<D>(
        g, res.T.values, fixed,
        [&](std::size_t id, const std::array<double, D>& a, const auto&) {
            return godunov_update<D>(a, h, 1.0 / speed[id]);
        },
        opt);
    return res;
}

/// Convenience form: point/region sources get T = 0, `domain` (empty = all)
/// restricts the solve; nodes outside it are walls.
template <int D>
EikonalResult<D> solve_stationary_eikonal(const Grid<D>& g, const std::vector<double>& speed,
                                          const std::vector<std::uint8_t>& sources,
                                          const std::vector<std::uint8_t>& domain = {},
                                          const EikonalOptions& opt = {}) {
    if (sources.size() != g.size()) throw InputError("eikonal: source mask size mismatch");
    ScalarField<D> init(g, kInf);
    std::vector<std::uint8_t> fixed(g.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool inside = domain.empty() || domain[i];
        if (sources[i] && inside) {
            init.values[i] = 0.0;
            fixed[i] = 1;
            any = true;
        } else if (!inside) {
            fixed[i] = 1;
        }
    }
    if (!any) throw InputError("eikonal: no source node inside the domain");
    std::vector<double> sp = speed;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (fixed[i] && !(sp[i] > 0.0)) sp[i] = 1.0;
    auto res = solve_eikonal<D>(init, fixed, sp, opt);
    if (!domain.empty()) res.T.mask = domain;
    return res;
}

/// Directional speed v(x, a) for a unit front normal a.
template <int D>
using AnisotropicSpeed = std::function<double(const Vec<D>& x, const Vec<D>& a)>;

/// Solves v(x, grad T / |grad T|) |grad T| = 1 by fast sweeping. The local
/// update is the smallest T with H((T - a_k)^+ / h_k) >= 1, where
/// H(p) = |p| v(x, p/|p|); it is found by bisection, which requires H to be
/// non-decreasing in each |p_k| (true for the overhang speed with alpha <= pi/4
/// and for any isotropic speed).
template <int D>
EikonalResult<D> solve_anisotropic_eikonal(const Grid<D>& g, const AnisotropicSpeed<D>& speed,
                                           const std::vector<std::uint8_t>& sources,
                                           const std::vector<std::uint8_t>& domain = {},
                                           const EikonalOptions& opt = {}) {
    if (sources.size() != g.size()) throw InputError("eikonal: source mask size mismatch");
    EikonalResult<D> res{ScalarField<D>(g, kInf), {}};
    std::vector<std::uint8_t> fixed(g.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool inside = domain.empty() || domain[i];
        if (sources[i] && inside) {
            res.T.values[i] = 0.0;
            fixed[i] = 1;
            any = true;
        } else if (!inside) {
            fixed[i] = 1;
        }
    }
    if (!any) throw InputError("eikonal: no source node inside the domain");
    std::array<double, D> h;
    for (int k = 0; k < D; ++k) h[k] = g.spacing[k];

    auto hamiltonian = [&](const Vec<D>& x, const std::array<double, D>& a, const std::array<int, D>& sgn, double t) {
        Vec<D> p = Vec<D>::Zero();
        for (int k = 0; k < D; ++k)
            if (t > a[k]) p[k] = sgn[k] * (t - a[k]) / h[k];
        const double np = p.norm();
        if (np == 0.0) return 0.0;
        return np * speed(x, p / np);
    };

    res.stats = fast_sweep<D>(
        g, res.T.values, fixed,
        [&](std::size_t id, const std::array<double, D>& a, const std::array<std::size_t, D>& nb) {
            const Vec<D> x = g.position(id);
            // Gradient sign per axis: T grows away from the upwind neighbour.
            std::array<int, D> sgn;
            double lo = kInf, hi = kInf;
            for (int k = 0; k < D; ++k) {
                sgn[k] = (nb[k] < id) ? 1 : -1;
                if (!(a[k] < kInf)) continue;
                lo = std::min(lo, a[k]);
                Vec<D> e = Vec<D>::Zero();
                e[k] = sgn[k];
                const double v = speed(x, e);
                if (!(v > 0.0)) throw InputError("anisotropic eikonal: speed must be positive");
                hi = std::min(hi, a[k] + h[k] / v);
            }
            // H is monotone in t, H(lo) = 0 and H(hi) >= 1.
            for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (hamiltonian(x, a, sgn, mid) >= 1.0)
                    hi = mid;
                else
                    lo = mid;
            }
            return hi;
        },
        opt);
    if (!domain.empty()) res.T.mask = domain;
    return res;
}

// ---------------------------------------------------------------------------
// Front evolution

template <int D>
struct LevelSetState {
    ScalarField<D> phi;  // negative inside the object, zero on the front
    double t = 0.0;
};

/// How the front moves. Normal speeds move the front along +grad(phi), i.e.
/// outward for positive speed.
template <int D>
struct SpeedLaw {
    enum class Kind { Advective, NormalScalar, NormalAnisotropic, NormalField };
    Kind kind = Kind::NormalScalar;
    std::function<Vec<D>(const Vec<D>& x, double t)> velocity;
    std::function<double(const Vec<D>& x, double t)> scalar;
    std::function<double(const Vec<D>& x, double t, const Vec<D>& n)> anisotropic;
    // Per-node speeds computed from the current state (used by overhang repair).
    std::function<void(const LevelSetState<D>& s, std::vector<double>& speed)> field;

    static SpeedLaw advective(std::function<Vec<D>(const Vec<D>&, double)> f) {
        SpeedLaw l;
        l.kind = Kind::Advective;
        l.velocity = std::move(f);
        return l;
    }
    static SpeedLaw normal(std::function<double(const Vec<D>&, double)> f) {
        SpeedLaw l;
        l.kind = Kind::NormalScalar;
        l.scalar = std::move(f);
        return l;
    }
    static SpeedLaw normal_anisotropic(std::function<double(const Vec<D>&, double, const Vec<D>&)> f) {
        SpeedLaw l;
        l.kind = Kind::NormalAnisotropic;
        l.anisotropic = std::move(f);
        return l;
    }
    static SpeedLaw normal_field(std::function<void(const LevelSetState<D>&, std::vector<double>&)> f) {
        SpeedLaw l;
        l.kind = Kind::NormalField;
        l.field = std::move(f);
        return l;
    }
};

namespace detail {

// One-sided differences with zero-gradient ghost nodes at the box boundary.
template <int D>
void one_sided(const ScalarField<D>& f, std::size_t id, const Index<D>& c, int k, double& back, double& fwd) {
    const std::size_t s = f.grid.stride(k);
    const double h = f.grid.spacing[k];
    const double v = f.values[id];
    back = c[k] > 0 ? (v - f.values[id - s]) / h : 0.0;
    fwd = c[k] + 1 < f.grid.dims[k] ? (f.values[id + s] - v) / h : 0.0;
}

template <int D>
double godunov_norm(const ScalarField<D>& f, std::size_t id, double speed) {
    const Index<D> c = f.grid.coords(id);
    double sum = 0.0;
    for (int k = 0; k < D; ++k) {
        double b, fw;
        one_sided(f, id, c, k, b, fw);
        if (speed > 0.0)
            sum += std::max({std::max(b, 0.0) * std::max(b, 0.0), std::min(fw, 0.0) * std::min(fw, 0.0)});
        else
            sum += std::max({std::min(b, 0.0) * std::min(b, 0.0), std::max(fw, 0.0) * std::max(fw, 0.0)});
    }
    return std::sqrt(sum);
}

}  // namespace detail

/// `steps` explicit first-order upwind steps of size dt. Throws InputError if
/// dt exceeds 0.5 h / max|v| for the speeds about to be applied; the state is
/// left at the last completed step in that case.
template <int D>
LevelSetState<D> evolve(LevelSetState<D> state, const SpeedLaw<D>& law, double dt, int steps) {
    state.phi.check();
    if (!(dt > 0.0) || steps < 0) throw InputError("evolve: dt must be positive and steps nonnegative");
    const Grid<D>& g = state.phi.grid;
    const std::size_t n = g.size();
    const double h = g.min_spacing();
    std::vector<double> speed(n, 0.0);
    std::vector<Vec<D>> vel;
    std::vector<double> next(n);
    for (int step = 0; step < steps; ++step) {
        double vmax = 0.0;
        using K = typename SpeedLaw<D>::Kind;
        if (law.kind == K::Advective) {
            vel.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                vel[i] = law.velocity(g.position(i), state.t);
                vmax = std::max(vmax, vel[i].cwiseAbs().maxCoeff());
            }
        } else {
            if (law.kind == K::NormalScalar) {
                for (std::size_t i = 0; i < n; ++i) speed[i] = law.scalar(g.position(i), state.t);
            } else if (law.kind == K::NormalAnisotropic) {
                for (std::size_t i = 0; i < n; ++i) {
                    Vec<D> gr = gradient_central(state.phi, g.coords(i));
                    const double gn = gr.norm();
                    gr = gn > 0.0 ? Vec<D>(gr / gn) : Vec<D>::Zero();
                    speed[i] = law.anisotropic(g.position(i), state.t, gr);
                }
            } else {
                speed.assign(n, 0.0);
                law.field(state, speed);
                if (speed.size() != n) throw InputError("evolve: speed field has the wrong size");
            }
            for (double v : speed) {
                if (!std::isfinite(v)) throw NumericalError("evolve: non-finite speed");
                vmax = std::max(vmax, std::abs(v));
            }
        }
        if (vmax > 0.0 && dt > 0.5 * h / vmax * (1.0 + 1e-12))
            throw InputError("evolve: time step violates the CFL bound dt <= 0.5 h / max|v|");

        if (law.kind == K::Advective) {
            for (std::size_t i = 0; i < n; ++i) {
                const Index<D> c = g.coords(i);
                double adv = 0.0;
                for (int k = 0; k < D; ++k) {
                    if (vel[i][k] == 0.0) continue;
                    double b, fw;
                    detail::one_sided(state.phi, i, c, k, b, fw);
                    adv += vel[i][k] * (vel[i][k] > 0.0 ? b : fw);
                }
                next[i] = state.phi.values[i] - dt * adv;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (speed[i] == 0.0) {
                    next[i] = state.phi.values[i];
                    continue;
                }
                next[i] = state.phi.values[i] - dt * speed[i] * detail::godunov_norm(state.phi, i, speed[i]);
            }
        }
        state.phi.values.swap(next);
        state.t += dt;
    }
    return state;
}

template <int D>
struct NormalCurvature {
    Vec<D> normal = Vec<D>::Zero();
    double curvature = 0.0;
    bool defined = false;
};

/// Unit normal grad(phi)/|grad(phi)| and curvature div(N) by central
/// differences (clamped at the box boundary).
template <int D>
NormalCurvature<D> normal_and_curvature(const ScalarField<D>& phi, const std::type_identity_t<Index<D>>& node, double eps = 1e-12) {
    const Grid<D>& g = phi.grid;
    auto at = [&](Index<D> c) {
        for (int k = 0; k < D; ++k) c[k] = std::clamp(c[k], 0, g.dims[k] - 1);
        return phi.at(c);
    };
    Vec<D> grad;
    Eigen::Matrix<double, D, D> hess;
    for (int k = 0; k < D; ++k) {
        Index<D> p = node, m = node;
        ++p[k];
        --m[k];
        const double hk = g.spacing[k];
        grad[k] = (at(p) - at(m)) / (2.0 * hk);
        hess(k, k) = (at(p) - 2.0 * at(node) + at(m)) / (hk * hk);
        for (int l = k + 1; l < D; ++l) {
            const double hl = g.spacing[l];
            Index<D> pp = node, pm = node, mp = node, mm = node;
            ++pp[k], ++pp[l];
            ++pm[k], --pm[l];
            --mp[k], ++mp[l];
            --mm[k], --mm[l];
            hess(k, l) = hess(l, k) = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * hk * hl);
        }
    }
    NormalCurvature<D> out;
    const double gn = grad.norm();
    if (!(gn > eps)) return out;
    out.defined = true;
    out.normal = grad / gn;
    out.curvature = (hess.trace() * gn * gn - grad.dot(hess * grad)) / (gn * gn * gn);
    return out;
}

template <int D>
struct ReinitResult {
    LevelSetState<D> state;
    bool degenerate = false;  // no coherent front (e.g. sign flips everywhere)
};

/// Replaces phi by the signed distance to its own zero level. Nodes next to a
/// sign change get their closest front point from a first-order projection
/// (x - phi grad/|grad|^2), then closest points are swept outwards so every
/// node measures a true Euclidean distance instead of an eikonal estimate.
template <int D>
ReinitResult<D> reinitialize(const LevelSetState<D>& in) {
    const ScalarField<D>& phi = in.phi;
    phi.check();
    const Grid<D>& g = phi.grid;
    const std::size_t n = g.size();
    std::vector<double> dist(n, kInf);
    std::vector<Vec<D>> closest(n, Vec<D>::Zero());
    std::vector<std::uint8_t> fixed(n, 0);
    std::size_t seeds = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = phi.values[i];
        const Index<D> c = g.coords(i);
        const Vec<D> x = g.position(c);
        if (v == 0.0) {
            dist[i] = 0.0;
            closest[i] = x;
            fixed[i] = 1;
            ++seeds;
            continue;
        }
        // nearest axis crossing of the linear interpolant
        double best = kInf;
        Vec<D> at = x;
        for (int k = 0; k < D; ++k)
            for (int s : {-1, 1}) {
                Index<D> q = c;
                q[k] += s;
                if (q[k] < 0 || q[k] >= g.dims[k]) continue;
                const double w = phi.at(q);
                if ((v < 0.0) == (w < 0.0) && w != 0.0) continue;
                const double t = g.spacing[k] * v / (v - w);
                if (t < best) {
                    best = t;
                    at = x;
                    at[k] += s * t;
                }
            }
        if (!(best < kInf)) continue;
        const Vec<D> gr = gradient_central(phi, c);
        const double g2 = gr.squaredNorm();
        if (g2 > 0.0 && std::abs(v) / std::sqrt(g2) <= best) {
            dist[i] = std::abs(v) / std::sqrt(g2);
            closest[i] = x - v * gr / g2;
        } else {
            dist[i] = best;
            closest[i] = at;
        }
        fixed[i] = 1;
        ++seeds;
    }
    ReinitResult<D> out{in, false};
    if (seeds == 0) return out;  // no front: nothing to measure against
    if (2 * seeds > n) {
        out.degenerate = true;
        return out;
    }
    // every node of the 3^D block offers its closest point, not only the
    // upwind face neighbours
    int block = 1;
    for (int k = 0; k < D; ++k) block *= 3;
    fast_sweep<D>(g, dist, fixed, [&](std::size_t id, const auto&, const auto&) {
        const Index<D> c = g.coords(id);
        const Vec<D> x = g.position(c);
        double t = dist[id];
        for (int m = 0; m < block; ++m) {
            Index<D> q = c;
            bool inside = true;
            for (int k = 0, r = m; k < D; ++k, r /= 3) {
                q[k] += r % 3 - 1;
                inside = inside && q[k] >= 0 && q[k] < g.dims[k];
            }
            if (!inside) continue;
            const std::size_t qi = g.index(q);
            if (!(dist[qi] < kInf)) continue;
            const double d = (x - closest[qi]).norm();
            if (d < t) {
                t = d;
                closest[id] = closest[qi];
            }
        }
        return t;
    });
    // The swept points are sparse along the front, which costs O(h) right
    // next to it. Slide each point to the foot of the node on the
    // interpolated zero level; any front point bounds the distance from
    // above, so keeping the minimum is safe.
    std::array<std::vector<double>, D> grad;
    for (int k = 0; k < D; ++k) grad[k].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec<D> gr = gradient_central(phi, g.coords(i));
        for (int k = 0; k < D; ++k) grad[k][i] = gr[k];
    }
    auto grad_at = [&](const Vec<D>& q) {
        Vec<D> r;
        for (int k = 0; k < D; ++k) r[k] = interpolate(g, grad[k], q);
        return r;
    };
    const double hmin = g.spacing.minCoeff();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(dist[i] > 0.0 && dist[i] < kInf)) continue;
        const Vec<D> x = g.position(i);
        Vec<D> p = closest[i];
        for (int it = 0; it < 4; ++it) {
            if (!g.inside_box(p)) break;
            const Vec<D> gp = grad_at(p);
            if (!(gp.squaredNorm() > 0.0)) break;
            const Vec<D> nrm = gp.normalized();
            Vec<D> q = x - (x - p).dot(nrm) * nrm;
            bool on_front = false;
            for (int j = 0; j < 8 && g.inside_box(q); ++j) {
                const Vec<D> gq = grad_at(q);
                const double v = interpolate(phi, q);
                if (!(gq.squaredNorm() > 0.0)) break;
                if (std::abs(v) <= 1e-6 * hmin * gq.norm()) {
                    on_front = true;
                    break;
                }
                q -= v * gq / gq.squaredNorm();
            }
            if (!on_front) break;
            p = q;
            dist[i] = std::min(dist[i], (x - p).norm());
        }
    }
    for (std::size_t i = 0; i < n; ++i) out.state.phi.values[i] = phi.values[i] < 0.0 ? -dist[i] : dist[i];
    return out;
}

}  // namespace shadeprint
