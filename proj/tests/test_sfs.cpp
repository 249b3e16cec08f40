#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace shadeprint;

namespace {

double interior_error(const SfSSolution& s, const SfSProblem& pb, double band_cells) {
    const Grid2D& g = pb.image.grid;
    const double h = g.min_spacing();
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 p = g.position(i);
        if (p.norm() < 1.0 - band_cells * h) err = std::max(err, std::abs(s.u.values[i] - fixtures::hemisphere_height(p)));
    }
    return err;
}

// Bump on [-1,1]^2 with exact Dirichlet data on the frame.
SfSProblem bump_problem(int n) {
    const Grid2D g(Vec2(-1, -1), Vec2::Constant(2.0 / (n - 1)), {n, n});
    SfSProblem pb;
    pb.image = ScalarField2D::sample(g, [](const Vec2& p) { return fixtures::bump_grad(p).norm(); });
    for (auto& v : pb.image.values) v = 1.0 / std::sqrt(1.0 + v * v);
    pb.image.mask.assign(g.size(), 1);
    pb.boundary.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto c = g.coords(i);
        if (c[0] == 0 || c[1] == 0 || c[0] == n - 1 || c[1] == n - 1) pb.image.mask[i] = 0;
        pb.boundary[i] = fixtures::bump(g.position(i));
    }
    return pb;
}

}  // namespace

TEST(Render, FlatSurfaceUnderVerticalLight) {
    const ScalarField2D u(Grid2D(Vec2::Zero(), Vec2::Constant(0.1), {8, 8}), 3.0);
    const ScalarField2D img = render(u, LightSetup(), ReflectanceParams());
    for (double v : img.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Render, HemisphereIsItsOwnImage) {
    const Grid2D g(Vec2(-1, -1), Vec2::Constant(1.0 / 200), {401, 401});
    const ScalarField2D u = ScalarField2D::sample(g, fixtures::hemisphere_height);
    const ScalarField2D img = render(u, LightSetup(), ReflectanceParams());
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 p = g.position(i);
        if (p.norm() < 0.8) err = std::max(err, std::abs(img.values[i] - fixtures::hemisphere_height(p)));
    }
    EXPECT_LT(err, 1e-4);
}

TEST(Render, TiltedPlaneUnderObliqueLight) {
    const ScalarField2D u = ScalarField2D::sample(Grid2D(Vec2::Zero(), Vec2::Constant(0.1), {6, 6}),
                                                  [](const Vec2& p) { return p.x(); });
    const ScalarField2D img = render(u, LightSetup(Vec3(0.6, 0, 0.8), Vec3(0, 0, 1)), ReflectanceParams());
    for (double v : img.values) EXPECT_NEAR(v, 0.2 / std::sqrt(2.0), 1e-12);
}

TEST(Render, PerspectiveNeedsSurfaceInFront) {
    const ScalarField2D u(Grid2D(Vec2::Zero(), Vec2::Constant(0.1), {4, 4}), 0.5);
    CameraModel cam;
    cam.projection = Projection::PerspectiveLightAtInfinity;
    EXPECT_THROW(render(u, LightSetup(), ReflectanceParams(), cam), InputError);
}

TEST(Render, PerspectiveResidualVanishesOnRenderedImage) {
    // v = ln u for a smooth u >= 1; the residual uses the same central
    // differences, so only the log/exp chain rule error remains.
    const Grid2D g(Vec2(-0.3, -0.3), Vec2::Constant(0.6 / 120), {121, 121});
    const ScalarField2D u = ScalarField2D::sample(g, [](const Vec2& p) { return 2.0 + 0.3 * std::exp(-p.squaredNorm() * 8); });
    ScalarField2D v = u;
    for (auto& x : v.values) x = std::log(x);
    for (Projection pr : {Projection::PerspectiveLightAtInfinity, Projection::PerspectiveLightAtCenter}) {
        CameraModel cam;
        cam.projection = pr;
        cam.focal = 1.5;
        const ScalarField2D img = render(u, LightSetup(), ReflectanceParams(), cam);
        const ScalarField2D r = perspective_residual(img, v, LightSetup(), cam);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto c = g.coords(i);
            if (c[0] > 0 && c[1] > 0 && c[0] < 120 && c[1] < 120) worst = std::max(worst, std::abs(r.values[i]));
        }
        EXPECT_LT(worst, 1e-3);
    }
}

TEST(Eikonal, RightHandSide) {
    EXPECT_EQ(eikonal_rhs(1.0), 0.0);
    EXPECT_NEAR(eikonal_rhs(0.5), std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(eikonal_rhs(1.0 / std::sqrt(2.0)), 1.0, 1e-15);
    bool clamped = false;
    EXPECT_NEAR(eikonal_rhs(0.0, 1e-3, &clamped), std::sqrt(1e6 - 1.0), 1e-9);
    EXPECT_TRUE(clamped);
    eikonal_rhs(0.7, 1e-3, &clamped);
    EXPECT_FALSE(clamped);
}

TEST(Eikonal, KruzkovInverse) {
    EXPECT_NEAR(kruzkov_inverse(0.5, 1.0), std::log(2.0), 1e-15);
    for (double u : {0.0, 0.1, 1.0, 7.5}) EXPECT_NEAR(kruzkov_inverse(kruzkov(u, 0.7), 0.7), u, 1e-12);
}

TEST(SolveVertical, FlatImageGivesZeroHeight) {
    SfSProblem pb = fixtures::hemisphere(33);
    for (auto& v : pb.image.values) v = 1.0;
    pb.occluding_boundary = false;
    const SfSSolution s = solve_vertical(pb);
    for (double v : s.u.values) EXPECT_EQ(v, 0.0);
}

TEST(SolveVertical, TentFromConstantSlope) {
    // |u'| = 1 on a strip with the tent as data on both long sides
    const int n = 101;
    const Grid2D g(Vec2::Zero(), Vec2(0.01, 0.01), {n, 3});
    auto tent = [](const Vec2& p) { return std::min(p.x(), 1.0 - p.x()); };
    SfSProblem pb;
    pb.image = ScalarField2D(g, 1.0 / std::sqrt(2.0));
    pb.image.mask.assign(g.size(), 0);
    pb.boundary.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto c = g.coords(i);
        pb.image.mask[i] = c[1] == 1 && c[0] > 0 && c[0] < n - 1;
        pb.boundary[i] = tent(g.position(i));
    }
    const SfSSolution s = solve_vertical(pb);
    EXPECT_NEAR(s.u.at({50, 1}), 0.5, 1e-12);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(s.u.at({i, 1}), tent(g.position(Index<2>{i, 1})), 1e-12);
}

TEST(SolveVertical, HemisphereAccuracy) {
    const SfSProblem pb = fixtures::hemisphere(129);
    const SfSSolution s = solve_vertical(pb);
    EXPECT_TRUE(s.converged);
    EXPECT_LT(interior_error(s, pb, 2.0), 0.02);
}

TEST(SolveVertical, ShiftingTheDataShiftsTheHeight) {
    SfSProblem pb = bump_problem(65);
    const SfSSolution a = solve_vertical(pb);
    for (auto& g : pb.boundary) g += 0.75;
    const SfSSolution b = solve_vertical(pb);
    for (std::size_t i = 0; i < a.u.size(); ++i) EXPECT_NEAR(b.u.values[i], a.u.values[i] + 0.75, 1e-12);
}

TEST(SolveVertical, EmptyMaskIsRejected) {
    SfSProblem pb = fixtures::hemisphere(17);
    pb.image.mask.assign(pb.image.size(), 0);
    EXPECT_THROW(solve_vertical(pb), InputError);
}

TEST(SolveVertical, RenderOfSolutionConvergesToImage) {
    auto residual = [](int n) {
        const SfSProblem pb = bump_problem(n);
        SfSSolution s = solve_vertical(pb);
        for (std::size_t i = 0; i < s.u.size(); ++i)
            if (!pb.image.in_domain(i)) s.u.values[i] = pb.boundary[i];
        s.u.mask.clear();
        const ScalarField2D img = render(s.u, LightSetup(), ReflectanceParams());
        const Grid2D& g = pb.image.grid;
        double err = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec2 p = g.position(i);
            // away from the frame and the peak, where the image has a kink
            if (p.lpNorm<Eigen::Infinity>() < 0.8 && p.norm() > 0.2) err = std::max(err, std::abs(img.values[i] - pb.image.values[i]));
        }
        return err;
    };
    const double coarse = residual(65), fine = residual(129);
    EXPECT_LT(fine, coarse / 1.5);
}

TEST(FixedPoint, OperatorKeepsTheUpperBarrier) {
    SfSProblem pb = fixtures::hemisphere(17);
    pb.occluding_boundary = false;
    pb.boundary.assign(pb.image.size(), 1e6);  // kruzkov(huge) = 1/mu
    SemiLagrangianOperator op(pb);
    std::vector<double> w(op.grid().size(), 1.0 / pb.mu);
    op.set_reference(w);
    const auto t = op.apply(w);
    for (double v : t) EXPECT_NEAR(v, 1.0 / pb.mu, 1e-12);
}

TEST(FixedPoint, ContractionMonotoneBounded) {
    const SfSProblem pb = fixtures::hemisphere(25);
    const SemiLagrangianOperator op(pb);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0 / pb.mu);
    const std::size_t n = op.grid().size();
    for (int k = 0; k < 100; ++k) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = U(rng), b[i] = std::min(1.0 / pb.mu, a[i] + 0.2 * U(rng));
        op.impose_boundary(a);
        op.impose_boundary(b);
        const auto ta = op.apply(a), tb = op.apply(b);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_LE(ta[i], tb[i]);
            EXPECT_GE(ta[i], 0.0);
            EXPECT_LE(tb[i], 1.0 / pb.mu);
            num = std::max(num, tb[i] - ta[i]);
            den = std::max(den, b[i] - a[i]);
        }
        EXPECT_LE(num, op.contraction_bound() * den + 1e-12);
    }
}

TEST(FixedPoint, FlatImageConvergesToZero) {
    SfSProblem pb = fixtures::hemisphere(21);
    for (auto& v : pb.image.values) v = 1.0;
    pb.occluding_boundary = false;
    const SfSSolution s = solve_fixed_point(pb);
    EXPECT_TRUE(s.converged);
    EXPECT_LT(s.iterations, 20);
    for (double v : s.u.values) EXPECT_LT(std::abs(v), 1e-8);
}

TEST(FixedPoint, HemisphereAccuracy) {
    const SfSProblem pb = fixtures::hemisphere(129);
    const SfSSolution s = solve_fixed_point(pb);
    EXPECT_TRUE(s.converged);
    EXPECT_LT(interior_error(s, pb, 2.0), 0.03);
    for (std::size_t i = 0; i < s.v.size(); ++i) {
        EXPECT_GE(s.v.values[i], 0.0);
        EXPECT_LT(s.v.values[i], 1.0 / pb.mu);
        EXPECT_NEAR(s.u.values[i], kruzkov_inverse(s.v.values[i], pb.mu), 1e-12);
    }
}

TEST(FixedPoint, ModelsAgreeAtTheDegenerateLimit) {
    const SfSProblem base = fixtures::hemisphere(33);
    SfSProblem on = base;
    on.params.model = ReflectanceModel::OrenNayar;
    on.params.roughness = 1e-6;
    SfSProblem ph = base;
    ph.params.model = ReflectanceModel::Phong;
    const SfSSolution a = solve_fixed_point(base), b = solve_fixed_point(on), c = solve_fixed_point(ph);
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        EXPECT_NEAR(b.u.values[i], a.u.values[i], 1e-6);
        EXPECT_NEAR(c.u.values[i], a.u.values[i], 1e-6);
    }
}

TEST(FixedPoint, IterationCapReportsNonConvergence) {
    SfSProblem pb = fixtures::hemisphere(33);
    pb.max_iterations = 2;
    const SfSSolution s = solve_fixed_point(pb);
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.iterations, 2);
}

TEST(FixedPoint, RejectsBadParameters) {
    SfSProblem pb = fixtures::hemisphere(9);
    pb.mu = 0.0;
    EXPECT_THROW(solve_fixed_point(pb), InputError);
    pb = fixtures::hemisphere(9);
    pb.image.values[40] = 1.5;
    EXPECT_THROW(solve_fixed_point(pb), InputError);
    pb = fixtures::hemisphere(9);
    pb.camera.projection = Projection::PerspectiveLightAtCenter;
    EXPECT_THROW(solve_fixed_point(pb), InputError);
}
