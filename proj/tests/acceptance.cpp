// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "shadeprint/io.hpp"
#include "shadeprint/levelset.hpp"
#include "shadeprint/pipeline.hpp"
#include "shadeprint/sdf.hpp"
#include "shadeprint/stl.hpp"

using namespace shadeprint;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// 1. Eikonal SfS on the 256^2 hemisphere.
Outcome eikonal_sfs() {
    const SfSProblem pb = fixtures::hemisphere(256);
    const auto t0 = Clock::now();
    const SfSSolution s = solve_vertical(pb);
    const double dt = seconds_since(t0);
    const Grid2D& g = pb.image.grid;
    const double h = g.min_spacing();
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 p = g.position(i);
        if (p.norm() < 1.0 - 2.0 * h) err = std::max(err, std::abs(s.u.values[i] - fixtures::hemisphere_height(p)));
    }
    return {err <= 0.02 && dt < 10.0 && s.converged, fmt("Linf %.4f (limit 0.02), %.2f s", err, dt)};
}

// 2. Semi-Lagrangian fixed-point operator properties.
Outcome fixed_point_operator_props() {
    const SfSProblem pb = fixtures::hemisphere(33);
    const SemiLagrangianOperator op(pb);
    const double mu = pb.mu;
    const double bound = op.contraction_bound() + 1e-10;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0 / mu);
    const std::size_t n = op.grid().size();
    auto random_iterate = [&] {
        std::vector<double> w(n);
        for (auto& v : w) v = U(rng);
        op.impose_boundary(w);
        return w;
    };
    double worst_ratio = 0.0;
    bool monotone = true, bounded = true;
    for (int k = 0; k < 100; ++k) {
        const auto a = random_iterate(), b = random_iterate();
        const auto ta = op.apply(a), tb = op.apply(b);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num = std::max(num, std::abs(ta[i] - tb[i]));
            den = std::max(den, std::abs(a[i] - b[i]));
            if (ta[i] < 0.0 || ta[i] > 1.0 / mu) bounded = false;
        }
        if (den > 0.0) worst_ratio = std::max(worst_ratio, num / den);

        // ordered pair: c >= a
        std::vector<double> c = a;
        for (std::size_t i = 0; i < n; ++i) c[i] = std::min(1.0 / mu, a[i] + 0.3 * U(rng));
        op.impose_boundary(c);
        const auto tc = op.apply(c);
        for (std::size_t i = 0; i < n; ++i)
            if (tc[i] < ta[i]) monotone = false;
    }

    // Flat image with g = 0: the fixed point is u = 0.
    const int m = 33;
    SfSProblem flat;
    const Grid2D g(Vec2(-1, -1), Vec2::Constant(2.0 / (m - 1)), {m, m});
    flat.image = ScalarField2D(g, 1.0);
    flat.image.mask.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto c = g.coords(i);
        flat.image.mask[i] = c[0] > 0 && c[1] > 0 && c[0] < m - 1 && c[1] < m - 1;
    }
    const SfSSolution s = solve_fixed_point(flat);
    double umax = 0.0;
    for (double v : s.u.values) umax = std::max(umax, std::abs(v));
    const bool flat_ok = s.converged && s.residual < 1e-8 && umax < 1e-8;
    return {worst_ratio <= bound && monotone && bounded && flat_ok,
            fmt("ratio %.6f <= %.6f, monotone %d, in [0,1/mu] %d, flat max|u| %.2e residual %.2e", worst_ratio, bound,
                monotone, bounded, umax, s.residual)};
}

// 3. Oren-Nayar and Phong degenerate to Lambert.
Outcome model_degeneration() {
    const SfSProblem base = fixtures::hemisphere(65);
    const SfSSolution lam = solve_fixed_point(base);
    SfSProblem on = base;
    on.params.model = ReflectanceModel::OrenNayar;
    on.params.roughness = 1e-6;
    SfSProblem ph = base;
    ph.params.model = ReflectanceModel::Phong;
    ph.params.k_specular = 0.0;
    ph.params.k_ambient = 0.0;
    ph.params.k_diffuse = 1.0;
    const SfSSolution son = solve_fixed_point(on);
    const SfSSolution sph = solve_fixed_point(ph);
    double don = 0.0, dph = 0.0;
    for (std::size_t i = 0; i < lam.u.size(); ++i) {
        don = std::max(don, std::abs(son.u.values[i] - lam.u.values[i]));
        dph = std::max(dph, std::abs(sph.u.values[i] - lam.u.values[i]));
    }
    return {don <= 1e-6 && dph <= 1e-6 && lam.converged && son.converged && sph.converged,
            fmt("Oren-Nayar %.2e, Phong %.2e (limit 1e-6)", don, dph)};
}

// 4. Photometric stereo.
Outcome photometric_stereo() {
    const int n = 129;
    double worst = 0.0, albedo_diff = 0.0;
    bool ok = true;
    const std::function<double(const Vec2&)> plane = [](const Vec2& p) { return 0.3 * p.x() - 0.2 * p.y(); };
    const std::function<Vec2(const Vec2&)> plane_grad = [](const Vec2&) { return Vec2(0.3, -0.2); };
    for (int which = 0; which < 2; ++which) {
        const auto& u = which == 0 ? plane : std::function<double(const Vec2&)>(fixtures::bump);
        const auto& du = which == 0 ? plane_grad : std::function<Vec2(const Vec2&)>(fixtures::bump_grad);
        const PSProblem pb = fixtures::ps_pair(n, u, du);
        const TransportSolution s = solve_photometric_stereo(pb);
        ok = ok && s.converged;
        for (std::size_t i = 0; i < s.u.size(); ++i)
            worst = std::max(worst, std::abs(s.u.values[i] - u(s.u.grid.position(i))));
        PSProblem twice = pb;
        for (auto& v : twice.i1.values) v *= 2.0;
        for (auto& v : twice.i2.values) v *= 2.0;
        const TransportSolution s2 = solve_photometric_stereo(twice);
        for (std::size_t i = 0; i < s.u.size(); ++i)
            albedo_diff = std::max(albedo_diff, std::abs(s.u.values[i] - s2.u.values[i]));
    }
    return {ok && worst <= 1e-2 && albedo_diff <= 1e-12,
            fmt("Linf %.2e (limit 1e-2), doubled-intensity difference %.1e", worst, albedo_diff)};
}

// 5. Signed distance to the icosphere.
Outcome sdf() {
    const TriangleMesh m = icosphere(3);
    const MeshDistance md(m);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    double err = 0.0, angle = 0.0;
    int bad_sign = 0;
    for (int k = 0; k < 1000; ++k) {
        const Vec3 p(U(rng), U(rng), U(rng));
        const double d = md.signed_distance(p);
        err = std::max(err, std::abs(d - (p.norm() - 1.0)));
        if ((d < 0.0) != (p.norm() < 1.0)) ++bad_sign;
        const double s = md.angle_sum(p);
        angle = std::max(angle, std::min(std::abs(s), std::abs(s - 4.0 * M_PI)));
    }
    return {m.size() == 1280 && err <= 0.01 && bad_sign == 0 && angle <= 1e-6,
            fmt("%zu facets, distance error %.4f, %d wrong signs, solid-angle deviation %.1e", m.size(), err, bad_sign,
                angle)};
}

// 6. Level-set engine.
Outcome level_set() {
    // point source, h = 0.01
    const double h = 0.01;
    const Grid2D g(Vec2(-1, -1), Vec2::Constant(h), {201, 201});
    std::vector<std::uint8_t> src(g.size(), 0);
    src[g.index({100, 100})] = 1;
    const auto T = solve_stationary_eikonal<2>(g, std::vector<double>(g.size(), 1.0), src).T;
    double e1 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) e1 = std::max(e1, std::abs(T.values[i] - g.position(i).norm()));

    // sphere r = 0.5 growing at unit speed to t = 0.5
    const double h3 = 0.04;
    const int n3 = 61;
    const Grid3D g3(Vec3::Constant(-1.2), Vec3::Constant(h3), {n3, n3, n3});
    LevelSetState<3> st{ScalarField3D::sample(g3, [](const Vec3& p) { return p.norm() - 0.5; }), 0.0};
    const int steps = 25;
    st = evolve<3>(st, SpeedLaw<3>::normal([](const Vec3&, double) { return 1.0; }), 0.5 / steps, steps);
    double e2 = 0.0;
    const int c = n3 / 2;
    for (int axis = 0; axis < 3; ++axis)
        for (int s : {-1, 1}) {
            Index<3> a{c, c, c};
            for (int k = 0; k < c; ++k) {
                Index<3> b = a;
                b[axis] += s;
                const double fa = st.phi.at(a), fb = st.phi.at(b);
                if (fa < 0.0 && fb >= 0.0) {
                    const double r = (k + fa / (fa - fb)) * h3;
                    e2 = std::max(e2, std::abs(r - 1.0));
                    break;
                }
                a = b;
            }
        }

    // curvature of the unit sphere at h = 0.02
    const double hc = 0.02;
    const Grid3D gc(Vec3::Constant(-1.2), Vec3::Constant(hc), {121, 121, 121});
    const ScalarField3D sphere = ScalarField3D::sample(gc, [](const Vec3& p) { return p.norm() - 1.0; });
    double kerr = 0.0;
    for (std::size_t i = 0; i < gc.size(); ++i) {
        if (std::abs(sphere.values[i]) > 0.5 * hc) continue;
        const auto nc = normal_and_curvature<3>(sphere, gc.coords(i));
        kerr = std::max(kerr, std::abs(nc.curvature - 2.0));
    }
    return {e1 <= 2.0 * h && e2 <= 2.0 * h3 && kerr <= 0.1,
            fmt("point source %.4f (<= %.2f), sphere growth %.4f (<= %.2f), curvature error %.4f (<= 0.1)", e1, 2 * h, e2,
                2 * h3, kerr)};
}

// 7. Overhang detection.
Outcome overhang_detection() {
    const Vec3 up(0, 0, 1);
    const double a = M_PI / 4.0, v0 = 1.7;
    const double s1 = overhang_speed(up, a, v0);
    const double s2 = overhang_speed(Vec3(1, 0, 0), a, v0);
    const double s3 = overhang_speed(Vec3(1, 0, 1).normalized(), a, v0);
    const bool spots = std::abs(s1 - v0) <= 1e-12 && std::abs(s2 - v0) <= 1e-12 && std::abs(s3 - std::sqrt(2.0) * v0) <= 1e-12;

    const ScalarField3D sdf = fixtures::t_bracket(0.04);
    PrintConfig cfg;
    const DetectionResult d = detect_overhangs(sdf, cfg);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < sdf.size(); ++i) {
        if (!d.domain[i]) continue;
        const bool oracle = fixtures::t_bracket_overhang(sdf.grid.position(i));
        inter += oracle && d.overhang[i];
        uni += oracle || d.overhang[i];
    }
    const double iou = uni ? double(inter) / double(uni) : 0.0;
    return {spots && iou >= 0.9, fmt("speeds %.15g %.15g %.15g (v0 = %.2f), T-bracket IoU %.3f", s1, s2, s3, v0, iou)};
}

// 8. Overhang repair.
Outcome overhang_repair() {
    const double h = 0.04;
    const ScalarField3D mush = fixtures::mushroom(h);
    PrintConfig cfg;
    cfg.t_final = 20.0;
    const RepairResult r = repair_overhangs(LevelSetState<3>{mush, 0.0}, cfg);
    bool non_increasing = true, plate = true;
    for (std::size_t i = 0; i < mush.size(); ++i) {
        if (r.state.phi.values[i] > mush.values[i]) non_increasing = false;
        if (mush.grid.position(i).z() <= cfg.z_min && r.state.phi.values[i] != mush.values[i]) plate = false;
    }
    const ScalarField3D pyr = fixtures::pyramid(h);
    const RepairResult p = repair_overhangs(LevelSetState<3>{pyr, 0.0}, cfg);
    const bool noop = p.steps == 0 && p.state.phi.values == pyr.values;
    return {r.printable && !r.reached_tf && non_increasing && plate && noop,
            fmt("mushroom printable at t = %.3f (t_f %.0f, %d steps), non-increasing %d, plate untouched %d, pyramid steps %d",
                r.state.t, cfg.t_final, r.steps, non_increasing, plate, p.steps)};
}

// 9. STL round trips and rule violations.
Outcome stl() {
    const TriangleMesh cube = fixtures::unit_cube();
    std::ostringstream bin;
    write_stl_binary(cube, bin);
    const TriangleMesh b = read_stl_binary(bin.str());
    bool bin_exact = b.size() == cube.size();
    for (std::size_t i = 0; bin_exact && i < cube.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            bin_exact &= static_cast<float>(cube.facets[i].normal[k]) == b.facets[i].normal[k];
            for (int c = 0; c < 3; ++c) bin_exact &= static_cast<float>(cube.facets[i].v[c][k]) == b.facets[i].v[c][k];
        }
    }
    // binary -> ascii -> binary must reproduce the same bytes
    std::ostringstream asc;
    write_stl_ascii(b, asc);
    std::istringstream asc_in(asc.str());
    std::ostringstream bin2;
    write_stl_binary(read_stl_ascii(asc_in), bin2);
    const bool ascii_ok = bin2.str() == bin.str();

    const auto tj = validate(fixtures::cube_with_t_junction());
    const auto flip = validate(fixtures::cube_with_flipped_normal());
    const auto origin = validate(fixtures::cube_at_origin());
    const bool rules = tj.count(MeshIssue::Kind::TJunction) > 0 && flip.count(MeshIssue::Kind::Orientation) > 0 &&
                       origin.count(MeshIssue::Kind::NonPositive) > 0 && validate(cube).ok();
    return {bin_exact && ascii_ok && rules,
            fmt("binary exact %d, ascii round trip %d, T-junction %zu, orientation %zu, non-positive %zu", bin_exact,
                ascii_ok, tj.count(MeshIssue::Kind::TJunction), flip.count(MeshIssue::Kind::Orientation),
                origin.count(MeshIssue::Kind::NonPositive))};
}

// 10. Slicer.
Outcome slicer() {
    const TriangleMesh cube = fixtures::box_mesh(Vec3(1, 1, 1), Vec3(11, 11, 11));
    const Layer mid = slice_at(cube, 6.0);
    const bool perimeter = mid.contours.size() == 1 && mid.contours[0].length() == 40.0;

    const double delta = 0.1;
    const Layer sq = fixtures::square_layer();
    const InfillResult rings = infill_eikonal(sq, delta);
    const double hg = delta / 4.0;
    const auto [gap_lo, gap_hi] = fixtures::ring_gap_range(sq, rings, delta);
    const bool spacing = rings.curves.size() == 4 && gap_lo >= delta - 2 * hg && gap_hi <= delta + 2 * hg;

    const std::vector<Layer> layers = slice(cube, 0.5);
    std::vector<std::vector<Polyline2D>> infill;
    for (const Layer& l : layers) infill.push_back(infill_eikonal(l, 2.0).curves);
    const ToolPath tp = plan_toolpath(layers, infill);
    const double flow = 0.05;
    const GCodeProgram prog = emit_gcode(tp, flow);
    const ParsedGCode back = parse_gcode(prog.text());
    bool same = back.path.moves.size() == tp.moves.size();
    for (std::size_t i = 0; same && i < tp.moves.size(); ++i)
        same = back.path.moves[i].target == tp.moves[i].target && back.path.moves[i].feed == tp.moves[i].feed &&
               back.path.moves[i].extrude == tp.moves[i].extrude;
    const PrintMetrics pm = metrics(tp);
    const double e_rel = std::abs(back.final_e - flow * pm.material_length) / (flow * pm.material_length);

    const Layer phantom = fixtures::two_branch_layer();
    const PrintMetrics me = metrics(plan_toolpath({phantom}, {infill_eikonal(phantom, 1.0).curves}));
    const PrintMetrics ms = metrics(plan_toolpath({phantom}, {infill_square(phantom, 1.0).curves}));
    const bool beats = me.travel_length < ms.travel_length && me.move_count < ms.move_count;

    return {perimeter && spacing && same && back.e_monotone && e_rel <= 1e-9 && beats,
            fmt("perimeter %.6g, ring gaps [%.4f, %.4f], round trip %d, E rel error %.1e, phantom travel %.1f vs %.1f mm, "
                "moves %zu vs %zu",
                mid.contours.empty() ? 0.0 : mid.contours[0].length(), gap_lo, gap_hi, same, e_rel, me.travel_length,
                ms.travel_length, me.move_count, ms.move_count)};
}

// 11. End-to-end pipeline through the command line tool.
Outcome end_to_end() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "shadeprint_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = SHADEPRINT_CLI;
    const auto t0 = Clock::now();
    if (std::system((cli + " synth --size 128 --out " + (dir / "hemisphere.pgm").string()).c_str()) != 0)
        return {false, "synth failed"};
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "[pipeline]\nout_dir = out\n[sfs]\nimage = hemisphere.pgm\n";
    }
    const int rc = std::system((cli + " pipeline --config " + (dir / "run.cfg").string() + " 2>/dev/null").c_str());
    const double dt = seconds_since(t0);
    if (rc != 0) return {false, fmt("pipeline exit status %d", rc)};
    const fs::path out = dir / "out";
    for (const char* f : {"height.csv", "height.pgm", "object.stl", "fixed.stl", "print.gcode", "metrics.json"})
        if (!fs::exists(out / f)) return {false, std::string("missing ") + f};
    const MeshReport rep = validate(stl_read((out / "fixed.stl").string()));
    std::ifstream g(out / "print.gcode");
    const std::string text((std::istreambuf_iterator<char>(g)), std::istreambuf_iterator<char>());
    std::size_t moves = 0;
    bool parsed = true;
    try {
        moves = parse_gcode(text).path.moves.size();
    } catch (const Error&) {
        parsed = false;
    }
    return {rep.ok() && rep.watertight() && parsed && moves > 0 && dt < 60.0,
            fmt("STL %s; G-code %zu moves; %.1f s", rep.summary().c_str(), moves, dt)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"eikonal SfS hemisphere", eikonal_sfs},
        {"fixed-point operator", fixed_point_operator_props},
        {"model degeneration", model_degeneration},
        {"photometric stereo", photometric_stereo},
        {"signed distance", sdf},
        {"level-set engine", level_set},
        {"overhang detection", overhang_detection},
        {"overhang repair", overhang_repair},
        {"STL", stl},
        {"slicer", slicer},
        {"end-to-end pipeline", end_to_end},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
