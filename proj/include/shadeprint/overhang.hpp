// Overhangs in FDM printing: classification of surface normals against the
// limit angle, detection by comparing the vertical arrival time with the
// time of an anisotropic front grown from the first layer, and repair by a
// level-set growth that only ever adds material.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"
#include "shadeprint/levelset.hpp"
#include "shadeprint/mesh.hpp"

namespace shadeprint {

struct PrintConfig {
    double alpha = M_PI / 4.0;    // limit overhang angle
    Vec3 build{0.0, 0.0, 1.0};    // unit build direction h
    double v0 = 1.0;              // print rate
    double z_min = 0.0;           // build plate height (along h)
    double c1 = 0.0;              // 0 selects 1 / (z_max - z_min)
    double c2 = 0.0;              // 0 selects the grid spacing
    double t_final = 1.0;         // evolution time cap
    int check_every = 10;         // printability check cadence, in steps
    double cfl = 0.45;            // dt = cfl * h / max|v|

    void check() const {
        if (!(alpha > 0.0 && alpha < M_PI / 2.0)) throw InputError("overhang: alpha must lie in (0, pi/2)");
        if (std::abs(build.norm() - 1.0) > 1e-9) throw InputError("overhang: build direction must be a unit vector");
        if (!(v0 > 0.0)) throw InputError("overhang: v0 must be positive");
        if (c1 < 0.0 || c2 < 0.0) throw InputError("overhang: C1 and C2 must be positive (0 = default)");
        if (!(t_final >= 0.0)) throw InputError("overhang: t_f must be nonnegative");
        if (check_every < 1) throw InputError("overhang: check cadence must be at least one step");
        if (!(cfl > 0.0 && cfl <= 0.5)) throw InputError("overhang: CFL factor must lie in (0, 0.5]");
    }
};

enum class Printability { Unprintable, Modifiable, Safe };

inline const char* printability_name(Printability p) {
    switch (p) {
        case Printability::Unprintable: return "unprintable";
        case Printability::Modifiable: return "modifiable";
        case Printability::Safe: return "safe";
    }
    return "?";
}

/// theta = arccos(G . N) with G pointing down the build direction.
/// Unprintable for theta < alpha, safe once the normal no longer points down
/// (theta >= pi/2), modifiable in between.
inline Printability classify(const Vec3& n, double alpha, const Vec3& build = Vec3(0, 0, 1)) {
    if (std::abs(n.norm() - 1.0) > 1e-9) throw std::invalid_argument("classify: normal must be a unit vector");
    const double c = std::clamp(-build.dot(n), -1.0, 1.0);
    const double theta = std::acos(c);
    if (theta < alpha) return Printability::Unprintable;
    if (theta >= M_PI / 2.0) return Printability::Safe;
    return Printability::Modifiable;
}

/// v(a) = v0 / max(tan(alpha) |P a|, |h . a|) with P = I - h h^T.
inline double overhang_speed(const Vec3& a, double alpha, double v0, const Vec3& build = Vec3(0, 0, 1)) {
    const double ha = build.dot(a);
    const double horiz = (a - ha * build).norm();
    const double den = std::max(std::tan(alpha) * horiz, std::abs(ha));
    if (!(den > 0.0)) throw std::invalid_argument("overhang speed: direction must be nonzero");
    return v0 / den;
}

struct SurfaceSample {
    Vec3 p;
    Vec3 normal;  // outward
    Printability cls = Printability::Safe;
    bool on_plate = false;
};

struct PrintabilityReport {
    std::vector<SurfaceSample> samples;
    std::size_t unprintable = 0, modifiable = 0, safe = 0, plate = 0;

    /// Share of non-plate samples that are safe or modifiable.
    double fraction_printable() const {
        const std::size_t total = unprintable + modifiable + safe;
        return total == 0 ? 1.0 : static_cast<double>(modifiable + safe) / static_cast<double>(total);
    }
    bool all_printable() const { return unprintable == 0; }
};

namespace detail {

inline Vec3 field_gradient(const ScalarField3D& phi, const Index<3>& c) {
    const Grid3D& g = phi.grid;
    Vec3 gr;
    for (int k = 0; k < 3; ++k) {
        Index<3> p = c, m = c;
        p[k] = std::min(c[k] + 1, g.dims[k] - 1);
        m[k] = std::max(c[k] - 1, 0);
        gr[k] = (phi.at(p) - phi.at(m)) / (g.spacing[k] * (p[k] - m[k]));
    }
    return gr;
}

}  // namespace detail

/// Samples the zero level of phi on grid edges (linear interpolation) and
/// classifies each sample. Samples within one grid step of the build plate
/// rest on it and are reported separately.
inline PrintabilityReport zero_level_printability(const ScalarField3D& phi, const PrintConfig& cfg) {
    const Grid3D& g = phi.grid;
    PrintabilityReport rep;
    const double plate_tol = g.min_spacing();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Index<3> c = g.coords(i);
        const double a = phi.values[i];
        for (int k = 0; k < 3; ++k) {
            if (c[k] + 1 >= g.dims[k]) continue;
            Index<3> q = c;
            ++q[k];
            const double b = phi.at(q);
            if ((a < 0.0) == (b < 0.0)) continue;
            const double t = a / (a - b);
            SurfaceSample s;
            s.p = g.position(c) + t * (g.position(q) - g.position(c));
            Vec3 n = (1.0 - t) * detail::field_gradient(phi, c) + t * detail::field_gradient(phi, q);
            if (!(n.norm() > 0.0)) continue;
            s.normal = n.normalized();
            s.cls = classify(s.normal, cfg.alpha, cfg.build);
            s.on_plate = cfg.build.dot(s.p) <= cfg.z_min + plate_tol;
            if (s.on_plate)
                ++rep.plate;
            else if (s.cls == Printability::Unprintable)
                ++rep.unprintable;
            else if (s.cls == Printability::Modifiable)
                ++rep.modifiable;
            else
                ++rep.safe;
            rep.samples.push_back(s);
        }
    }
    return rep;
}

struct DetectionResult {
    ScalarField3D t1;  // vertical arrival time (x . h) / v0
    ScalarField3D t2;  // anisotropic arrival time inside the object
    std::vector<std::uint8_t> overhang;  // T2 - T1 > tau
    std::vector<std::uint8_t> domain;    // phi <= 0
    double tau = 0.0;
    std::size_t overhang_count = 0;
    PrintabilityReport report;
};

/// Detection on a signed distance field sampled on a grid (negative inside).
/// Sources are the object's nodes in the lowest grid layer at or above the
/// plate.
inline DetectionResult detect_overhangs(const ScalarField3D& sdf, const PrintConfig& cfg,
                                        const EikonalOptions& opt = {}) {
    cfg.check();
    sdf.check();
    const Grid3D& g = sdf.grid;
    const double h = g.min_spacing();
    DetectionResult out;
    out.tau = 2.0 * h / cfg.v0;
    out.domain.assign(g.size(), 0);
    double lowest = kInf;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (sdf.values[i] <= 0.0) {
            out.domain[i] = 1;
            lowest = std::min(lowest, cfg.build.dot(g.position(i)));
        }
    if (!(lowest < kInf)) throw InputError("overhang detection: the object has no interior node");
    if (lowest > cfg.z_min + h * (1.0 + 1e-9))
        throw InputError("overhang detection: the object does not touch the build plate");

    std::vector<std::uint8_t> sources(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (out.domain[i] && cfg.build.dot(g.position(i)) <= lowest + 0.5 * h) sources[i] = 1;

    out.t1 = ScalarField3D::sample(g, [&](const Vec3& x) { return cfg.build.dot(x) / cfg.v0; });
    const AnisotropicSpeed<3> speed = [&](const Vec3&, const Vec3& a) {
        return overhang_speed(a, cfg.alpha, cfg.v0, cfg.build);
    };
    auto res = solve_anisotropic_eikonal<3>(g, speed, sources, out.domain, opt);
    out.t2 = std::move(res.T);
    // Arrival times count from the first layer, like the vertical time.
    const double t0 = lowest / cfg.v0;
    out.overhang.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!out.domain[i]) continue;
        if (out.t2.values[i] < kInf) out.t2.values[i] += t0;
        if (out.t2.values[i] - out.t1.values[i] > out.tau) {
            out.overhang[i] = 1;
            ++out.overhang_count;
        }
    }
    out.report = zero_level_printability(sdf, cfg);
    return out;
}

/// v1 = max(cos(theta) - cos(alpha), 0) with cos(theta) = -n . h.
inline double overhang_v1(const Vec3& n, double alpha, const Vec3& build = Vec3(0, 0, 1)) {
    return std::max(-build.dot(n) - std::cos(alpha), 0.0);
}

/// v2 = max(-kappa, 0): only concave points move.
inline double overhang_v2(double kappa) { return std::max(-kappa, 0.0); }

struct RepairResult {
    LevelSetState<3> initial;
    LevelSetState<3> state;
    int steps = 0;
    bool printable = false;     // every non-plate zero-level sample printable
    bool reached_tf = false;
    std::vector<std::pair<double, double>> trace;  // (t, fraction printable) at checkpoints
    ScalarField3D added;        // max(phi_final, -phi_initial): negative on the added material
    double z_max = 0.0;
    PrintabilityReport report;
};

/// Per-node speed C1 (z_max - z) v1 + C2 v2 where n3 < 0 and z > z_min, else 0.
inline std::vector<double> repair_speed(const ScalarField3D& phi, const PrintConfig& cfg, double z_max, double c1,
                                        double c2) {
    const Grid3D& g = phi.grid;
    std::vector<double> v(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.position(i);
        const double z = cfg.build.dot(x);
        if (z <= cfg.z_min) continue;
        const auto nc = normal_and_curvature<3>(phi, g.coords(i));
        if (!nc.defined || !(cfg.build.dot(nc.normal) < 0.0)) continue;
        v[i] = c1 * std::max(z_max - z, 0.0) * overhang_v1(nc.normal, cfg.alpha, cfg.build) + c2 * overhang_v2(nc.curvature);
    }
    return v;
}

/// Grows the object until every zero-level sample off the plate is printable
/// or t reaches t_f. Speeds are nonnegative, so phi never increases anywhere
/// and nodes at z <= z_min are never touched.
inline RepairResult repair_overhangs(const LevelSetState<3>& start, const PrintConfig& cfg) {
    cfg.check();
    start.phi.check();
    const Grid3D& g = start.phi.grid;
    const double h = g.min_spacing();
    RepairResult out;
    out.initial = start;
    out.state = start;

    double zmax = -kInf;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (start.phi.values[i] <= 0.0) zmax = std::max(zmax, cfg.build.dot(g.position(i)));
    if (!(zmax > cfg.z_min)) throw InputError("overhang repair: the object has no node above the plate");
    out.z_max = zmax;
    const double c1 = cfg.c1 > 0.0 ? cfg.c1 : 1.0 / (zmax - cfg.z_min);
    const double c2 = cfg.c2 > 0.0 ? cfg.c2 : h;

    const double t_end = start.t + cfg.t_final;
    out.report = zero_level_printability(out.state.phi, cfg);
    out.trace.emplace_back(out.state.t, out.report.fraction_printable());
    while (!out.report.all_printable()) {
        if (out.state.t >= t_end * (1.0 - 1e-12)) {
            out.reached_tf = true;
            break;
        }
        for (int k = 0; k < cfg.check_every && out.state.t < t_end * (1.0 - 1e-12); ++k) {
            const std::vector<double> speed = repair_speed(out.state.phi, cfg, zmax, c1, c2);
            const double vmax = *std::max_element(speed.begin(), speed.end());
            if (!(vmax > 0.0)) {
                // Nothing moves any more; jump to the end of the window.
                out.state.t = t_end;
                break;
            }
            const double dt = std::min(cfg.cfl * h / vmax, t_end - out.state.t);
            const auto law = SpeedLaw<3>::normal_field([&speed](const LevelSetState<3>&, std::vector<double>& v) { v = speed; });
            out.state = evolve<3>(out.state, law, dt, 1);
            ++out.steps;
        }
        out.report = zero_level_printability(out.state.phi, cfg);
        out.trace.emplace_back(out.state.t, out.report.fraction_printable());
    }
    out.printable = out.report.all_printable();

    out.added = ScalarField3D(g, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        out.added.values[i] = std::max(out.state.phi.values[i], -start.phi.values[i]);
    return out;
}

}  // namespace shadeprint
