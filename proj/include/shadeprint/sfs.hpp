// Shape-from-Shading: image synthesis for orthographic and perspective
// cameras, perspective residuals, and two orthographic inverse solvers
// (fast-sweeping eikonal for a vertical light, semi-Lagrangian fixed point
// in the Kruzkov variable for any reflectance model).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"
#include "shadeprint/levelset.hpp"
#include "shadeprint/reflectance.hpp"

namespace shadeprint {

enum class Projection { Orthographic, PerspectiveLightAtInfinity, PerspectiveLightAtCenter };

struct CameraModel {
    Projection projection = Projection::Orthographic;
    double focal = 1.0;  // perspective only
};

struct SfSProblem {
    ScalarField2D image;  // I in [0,1]; its mask is the reconstruction domain
    LightSetup light;
    ReflectanceParams params;
    CameraModel camera;
    // Dirichlet data g on masked-out nodes. Empty means g = 0 everywhere.
    std::vector<double> boundary;
    double mu = 1.0;
    double h = 0.0;  // semi-Lagrangian step; 0 selects spacing / 2
    double tol = 1e-8;
    int max_iterations = 100000;
    double i_min = 1e-3;
    // Treat the mask boundary as an occluding contour (I -> 0 at the rim, as
    // for a sphere seen from above) and seed a thin band along it with the
    // local analytic solution. Meaningful for a vertical light only.
    bool occluding_boundary = false;
    int occluding_band = 2;  // cells
    // Optional brightness maxima pinned as Dirichlet sources: node id -> height.
    std::vector<std::pair<std::size_t, double>> pinned;

    double step() const { return h > 0.0 ? h : 0.5 * image.grid.min_spacing(); }
    double g(std::size_t i) const { return boundary.empty() ? 0.0 : boundary[i]; }

    void check() const {
        image.check();
        light.check();
        params.check();
        if (!(mu > 0.0)) throw InputError("SfS: mu must be positive");
        if (h < 0.0) throw InputError("SfS: h must be positive");
        if (!(tol > 0.0) || max_iterations < 1) throw InputError("SfS: bad tolerance or iteration cap");
        if (!boundary.empty() && boundary.size() != image.size()) throw InputError("SfS: boundary size mismatch");
        if (camera.projection != Projection::Orthographic && !(camera.focal > 0.0))
            throw InputError("SfS: focal length must be positive");
        for (std::size_t i = 0; i < image.size(); ++i) {
            if (!image.in_domain(i)) continue;
            const double v = image.values[i];
            if (!(v >= 0.0 && v <= 1.0)) throw InputError("SfS: image values must lie in [0,1]");
        }
    }
};

struct SfSSolution {
    ScalarField2D u;  // height
    ScalarField2D v;  // Kruzkov variable
    int iterations = 0;
    double residual = 0.0;  // final sup-norm update
    bool converged = false;
    std::size_t clamped_dark = 0;    // pixels raised to I_min
    std::size_t clamped_bright = 0;  // pixels brighter than a flat surface, lowered
};

inline double kruzkov(double u, double mu) { return (1.0 - std::exp(-mu * u)) / mu; }
inline double kruzkov_inverse(double v, double mu) { return -std::log1p(-mu * v) / mu; }

/// Right-hand side of the vertical-light eikonal equation, sqrt(1/I^2 - 1).
/// Intensities below `i_min` are clamped; `clamped` (if given) is set.
inline double eikonal_rhs(double intensity, double i_min = 1e-3, bool* clamped = nullptr) {
    const bool low = !(intensity >= i_min);
    if (clamped) *clamped = low;
    const double i = std::min(low ? i_min : intensity, 1.0);
    return std::sqrt(std::max(1.0 / (i * i) - 1.0, 0.0));
}

// ---------------------------------------------------------------------------
// Forward models

/// Unit normal of the orthographic graph surface for gradient p: (-p, 1)/|.|.
inline Vec3 normal_from_gradient(const Vec2& p) { return Vec3(-p.x(), -p.y(), 1.0).normalized(); }

/// Unit normal for the perspective camera with the light at infinity.
inline Vec3 normal_perspective_infinity(const Vec2& x, double u, const Vec2& grad, double f) {
    const Vec3 n(f * grad.x(), f * grad.y(), u + x.dot(grad));
    return n.normalized();
}

/// Unit normal for the perspective camera with the light at the optical centre.
inline Vec3 normal_perspective_center(const Vec2& x, double u, const Vec2& grad, double f) {
    const double q = f * u / (x.squaredNorm() + f * f);
    const Vec3 n(f * grad.x() - q * x.x(), f * grad.y() - q * x.y(), grad.dot(x) + q * f);
    return n.normalized();
}

/// Light direction at image point x for a source at the optical centre.
inline Vec3 light_from_center(const Vec2& x, double f) { return Vec3(-x.x(), -x.y(), f).normalized(); }

/// Synthesizes the image of heightfield `u` (central-difference gradients).
/// Masked-out nodes render as 0.
inline ScalarField2D render(const ScalarField2D& u, const LightSetup& light, const ReflectanceParams& params,
                            const CameraModel& camera = {}) {
    u.check();
    params.check();
    ScalarField2D img(u.grid, 0.0);
    img.mask = u.mask;
    const bool persp = camera.projection != Projection::Orthographic;
    if (persp) {
        if (!(camera.focal > 0.0)) throw InputError("render: focal length must be positive");
        for (std::size_t i = 0; i < u.size(); ++i)
            if (u.in_domain(i) && u.values[i] < 1.0)
                throw InputError("render: perspective models need u >= 1 (surface in front of the camera)");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!u.in_domain(i)) continue;
        const Index<2> c = u.grid.coords(i);
        const Vec2 grad = gradient_central(u, c);
        const Vec2 x = u.grid.position(c);
        switch (camera.projection) {
            case Projection::Orthographic:
                img.values[i] = brightness(normal_from_gradient(grad), params, light);
                break;
            case Projection::PerspectiveLightAtInfinity:
                img.values[i] =
                    brightness(normal_perspective_infinity(x, u.values[i], grad, camera.focal), params, light);
                break;
            case Projection::PerspectiveLightAtCenter: {
                const Vec3 l = light_from_center(x, camera.focal);
                img.values[i] = brightness(normal_perspective_center(x, u.values[i], grad, camera.focal), params,
                                           LightSetup(l, l));
                break;
            }
        }
    }
    return img;
}

/// Left-minus-right residual of the perspective Lambertian equations written
/// in v = ln u, evaluated with central differences on the candidate v.
inline ScalarField2D perspective_residual(const ScalarField2D& image, const ScalarField2D& v, const LightSetup& light,
                                          const CameraModel& camera) {
    image.check();
    v.check();
    if (!(image.grid == v.grid)) throw InputError("residual: image and v grids differ");
    if (camera.projection == Projection::Orthographic) throw InputError("residual: perspective camera required");
    const double f = camera.focal;
    ScalarField2D r(v.grid, 0.0);
    r.mask = image.mask;
    const Vec3& l = light.light;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!image.in_domain(i)) continue;
        const Index<2> c = v.grid.coords(i);
        const Vec2 gv = gradient_central(v, c);
        const Vec2 x = v.grid.position(c);
        const double I = image.values[i];
        if (camera.projection == Projection::PerspectiveLightAtInfinity) {
            const Vec2 w = f * Vec2(l.x(), l.y()) + l.z() * x;
            const double den = std::sqrt(f * f * gv.squaredNorm() + std::pow(1.0 + x.dot(gv), 2));
            r.values[i] = I - (w.dot(gv) + l.z()) / den;
        } else {
            const double s = (x.squaredNorm() + f * f) / (f * f);
            r.values[i] = I * std::sqrt(s * (f * f * gv.squaredNorm() + std::pow(x.dot(gv), 2)) + 1.0) - 1.0;
        }
    }
    return r;
}

namespace detail {

// In-mask estimate of |grad(I^2)| at node c.
inline double grad_i2(const ScalarField2D& img, const std::vector<double>& i2, const Index<2>& c) {
    const Grid2D& g = img.grid;
    Vec2 d = Vec2::Zero();
    for (int k = 0; k < 2; ++k) {
        Index<2> p = c, m = c;
        ++p[k];
        --m[k];
        const bool hp = g.contains(p) && img.in_domain(p);
        const bool hm = g.contains(m) && img.in_domain(m);
        const double h = g.spacing[k];
        const std::size_t id = g.index(c);
        if (hp && hm)
            d[k] = (i2[g.index(p)] - i2[g.index(m)]) / (2.0 * h);
        else if (hp)
            d[k] = (i2[g.index(p)] - i2[id]) / h;
        else if (hm)
            d[k] = (i2[id] - i2[g.index(m)]) / h;
    }
    return d.norm();
}

// Nodes in the domain within `band` cells (Euclidean) of a masked-out node.
inline std::vector<std::uint8_t> rim_band(const ScalarField2D& img, int band) {
    const Grid2D& g = img.grid;
    std::vector<std::uint8_t> out(g.size(), 0);
    if (!img.has_mask()) return out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!img.in_domain(i)) continue;
        const Index<2> c = g.coords(i);
        for (int dj = -band; dj <= band && !out[i]; ++dj)
            for (int di = -band; di <= band; ++di) {
                if (di * di + dj * dj > band * band) continue;
                const Index<2> q{c[0] + di, c[1] + dj};
                if (g.contains(q) && !img.in_domain(q)) {
                    out[i] = 1;
                    break;
                }
            }
    }
    return out;
}

// Height above the rim for a vertical light when I^2 grows linearly, with
// slope c, away from an occluding contour: u = (asin I + I sqrt(1 - I^2)) / c.
inline double occluding_profile(double i, double c) { return (std::asin(i) + i * std::sqrt(1.0 - i * i)) / c; }

struct PreparedImage {
    std::vector<double> cosine;  // normalized intensity, clamped
    std::size_t dark = 0;
    std::size_t bright = 0;
};

}  // namespace detail

/// Orthographic SfS for a vertical light and Lambertian reflectance: solves
/// |grad u| = sqrt(1/I^2 - 1) with u = g on masked-out nodes by fast sweeping.
/// The local update evaluates the right-hand side at the midpoint of the
/// upwind step (I^2 interpolated along the discrete characteristic).
inline SfSSolution solve_vertical(const SfSProblem& pb) {
    pb.check();
    const ScalarField2D& img = pb.image;
    const Grid2D& g = img.grid;
    if (std::abs(pb.light.light.x()) > 1e-12 || std::abs(pb.light.light.y()) > 1e-12)
        throw InputError("solve_vertical: light must be (0,0,1)");
    if (pb.params.model != ReflectanceModel::Lambertian) throw InputError("solve_vertical: Lambertian model only");
    if (pb.camera.projection != Projection::Orthographic) throw InputError("solve_vertical: orthographic only");
    if (!(pb.params.albedo_diffuse > 0.0)) throw InputError("solve_vertical: albedo must be positive");

    const std::size_t n = g.size();
    SfSSolution sol;
    std::vector<double> i2(n, 1.0);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!img.in_domain(i)) continue;
        ++inside;
        double c = img.values[i] / pb.params.albedo_diffuse;
        if (!(c >= pb.i_min)) c = pb.i_min, ++sol.clamped_dark;
        if (c > 1.0) c = 1.0, ++sol.clamped_bright;
        i2[i] = c * c;
    }
    if (inside == 0) throw InputError("solve_vertical: empty mask");

    ScalarField2D init(g, kInf);
    std::vector<std::uint8_t> fixed(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (!img.in_domain(i)) init.values[i] = pb.g(i), fixed[i] = 1;
    for (const auto& [id, val] : pb.pinned) {
        if (id >= n) throw InputError("solve_vertical: pinned node out of range");
        init.values[id] = val;
        fixed[id] = 1;
    }
    if (pb.occluding_boundary) {
        const auto band = detail::rim_band(img, pb.occluding_band);
        for (std::size_t i = 0; i < n; ++i) {
            if (!band[i] || fixed[i]) continue;
            const double ii = std::sqrt(i2[i]);
            if (ii > 0.5) continue;  // not an occluding rim here
            const double c = detail::grad_i2(img, i2, g.coords(i));
            if (!(c > 0.0)) continue;
            // Reference height: the lowest neighbouring boundary value.
            double base = kInf;
            const Index<2> cc = g.coords(i);
            for (int dj = -pb.occluding_band; dj <= pb.occluding_band; ++dj)
                for (int di = -pb.occluding_band; di <= pb.occluding_band; ++di) {
                    const Index<2> q{cc[0] + di, cc[1] + dj};
                    if (g.contains(q) && !img.in_domain(q)) base = std::min(base, pb.g(g.index(q)));
                }
            init.values[i] = base + detail::occluding_profile(ii, c);
            fixed[i] = 1;
        }
    }

    std::vector<double>& T = init.values;
    const std::array<double, 2> h{g.spacing[0], g.spacing[1]};
    EikonalOptions opt;
    opt.max_sweeps = 4 * 2000;
    opt.tol = 1e-13;
    const SweepStats st = fast_sweep<2>(
        g, T, fixed,
        [&](std::size_t id, const std::array<double, 2>& a, const std::array<std::size_t, 2>& nb) {
            double s = std::sqrt(std::max(1.0 / i2[id] - 1.0, 0.0));
            double t = kInf;
            for (int rep = 0; rep < 3; ++rep) {
                t = godunov_update<2>(a, h, s);
                // Barycentric weights of the upwind foot on the neighbour simplex.
                double wsum = 0.0, acc = 0.0;
                for (int k = 0; k < 2; ++k) {
                    if (!(t > a[k])) continue;
                    const double w = (t - a[k]) / (h[k] * h[k]);
                    wsum += w;
                    acc += w * (img.in_domain(nb[k]) ? i2[nb[k]] : i2[id]);
                }
                if (!(wsum > 0.0)) break;
                const double mid = 0.5 * i2[id] + 0.5 * acc / wsum;
                s = std::sqrt(std::max(1.0 / mid - 1.0, 0.0));
            }
            return t;
        },
        opt);

    sol.iterations = st.sweeps;
    sol.converged = st.converged;
    sol.u = ScalarField2D(g, 0.0);
    sol.u.mask = img.mask;
    sol.v = ScalarField2D(g, 0.0);
    sol.v.mask = img.mask;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(T[i])) throw NumericalError("solve_vertical: region unreachable from the boundary");
        sol.u.values[i] = T[i];
        sol.v.values[i] = kruzkov(T[i], pb.mu);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Semi-Lagrangian fixed point

/// The discrete operator W -> T(W) on the Kruzkov variable.
///
/// At every node the set K of gradients q whose rendered brightness
/// R(N(q)) is at least I is traced along 64 azimuths; the convex hull of the
/// traced points gives the control directions (outward edge normals n). A
/// control moves the foot a distance s = max(dx, h / sigma) against n, where
/// sigma is the support of K in direction n, and costs c = sigma_mid * s in
/// height units, sigma_mid being the support at the midpoint of the step.
///   T_i(W) = min_k  e^{-mu t_k} I[W](x_i - s_k n_k) + tau(c_k) + l_k I[R](x_i - s_k n_k)
/// with t_k = max(h, c_k) and l_k = e^{-mu c_k} - e^{-mu t_k}. R is a frozen
/// reference iterate. For fixed R every discount is at most e^{-mu h}, so the
/// operator is monotone and contracts with factor e^{-mu h}; with R = W it is
/// the exact step u(x) = u(foot) + c. Short steps (c < h) only occur in
/// near-flat pixels, where the step length is capped.
class SemiLagrangianOperator {
public:
    static constexpr int kAzimuths = 64;

    explicit SemiLagrangianOperator(const SfSProblem& pb) : pb_(pb), grid_(pb.image.grid) {
        pb.check();
        if (pb.camera.projection != Projection::Orthographic)
            throw InputError("semi-Lagrangian solver: orthographic projection only");
        const std::size_t n = grid_.size();
        h_ = pb.step();
        mu_ = pb.mu;
        dx_ = grid_.min_spacing();
        fixed_.assign(n, 0);
        fixed_value_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (!pb.image.in_domain(i)) fixed_[i] = 1, fixed_value_[i] = kruzkov(pb.g(i), mu_);
        for (const auto& [id, val] : pb.pinned) {
            if (id >= n) throw InputError("SfS: pinned node out of range");
            fixed_[id] = 1;
            fixed_value_[id] = kruzkov(val, mu_);
        }
        trace_admissible_sets();
        if (pb.occluding_boundary) pin_occluding_band();
        build_controls();
        reference_.assign(n, 0.0);
        impose_boundary(reference_);
    }

    const Grid2D& grid() const { return grid_; }
    double step() const { return h_; }
    double contraction_bound() const { return std::exp(-mu_ * h_); }
    bool is_fixed(std::size_t i) const { return fixed_[i] != 0; }
    const std::vector<double>& fixed_values() const { return fixed_value_; }
    std::size_t clamped_dark() const { return dark_; }
    std::size_t clamped_bright() const { return bright_; }

    /// Writes boundary data into W on fixed nodes.
    void impose_boundary(std::vector<double>& w) const {
        for (std::size_t i = 0; i < w.size(); ++i)
            if (fixed_[i]) w[i] = fixed_value_[i];
    }

    /// Value of the operator at node i for the iterate w and reference ref.
    double apply_at(std::size_t i, const std::vector<double>& w, const std::vector<double>& ref) const {
        if (fixed_[i]) return fixed_value_[i];
        double best = kInf;
        for (std::uint32_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            const Control& c = controls_[k];
            double val = c.discount * foot_value(c, w) + c.cost;
            if (c.lag > 0.0) val += c.lag * foot_value(c, ref);
            best = std::min(best, val);
        }
        return best;
    }

    /// One Jacobi application T(W) against the frozen reference.
    std::vector<double> apply(const std::vector<double>& w) const {
        if (w.size() != grid_.size()) throw InputError("fixed-point operator: size mismatch");
        std::vector<double> out(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = apply_at(i, w, reference_);
        return out;
    }

    /// Reference iterate used by apply(); zero (with boundary data) by default.
    const std::vector<double>& reference() const { return reference_; }
    void set_reference(std::vector<double> ref) {
        if (ref.size() != grid_.size()) throw InputError("fixed-point operator: size mismatch");
        reference_ = std::move(ref);
    }

    /// One Gauss-Seidel sweep in one of four orders with the reference taken
    /// as the live iterate; returns the largest change.
    double sweep(std::vector<double>& w, int order) const {
        const int nx = grid_.dims[0], ny = grid_.dims[1];
        double change = 0.0;
        for (int jj = 0; jj < ny; ++jj) {
            const int j = (order & 2) ? ny - 1 - jj : jj;
            for (int ii = 0; ii < nx; ++ii) {
                const int i = (order & 1) ? nx - 1 - ii : ii;
                const std::size_t id = static_cast<std::size_t>(j) * nx + i;
                if (fixed_[id]) continue;
                const double t = apply_at(id, w, w);
                change = std::max(change, std::abs(t - w[id]));
                w[id] = t;
            }
        }
        return change;
    }

private:
    // Bilinear stencil of a foot point: lower-left node plus fractions.
    struct Control {
        std::size_t base;
        double tx, ty;
        double discount;
        double cost;
        double lag;
    };

    double foot_value(const Control& c, const std::vector<double>& w) const {
        const std::size_t nx = static_cast<std::size_t>(grid_.dims[0]);
        const double* p = w.data() + c.base;
        const double lo = p[0] + c.tx * (p[1] - p[0]);
        const double hi = p[nx] + c.tx * (p[nx + 1] - p[nx]);
        return lo + c.ty * (hi - lo);
    }

    double rendered(const Vec2& q) const { return brightness(normal_from_gradient(q), pb_.params, pb_.light); }

    // Radius of K along each azimuth, per domain node.
    void trace_admissible_sets() {
        const std::size_t n = grid_.size();
        const double rho_max = 100.0;
        const double flat = rendered(Vec2::Zero());
        for (int k = 0; k < kAzimuths; ++k) {
            const double phi = 2.0 * M_PI * k / kAzimuths;
            dirs_[k] = Vec2(std::cos(phi), std::sin(phi));
        }
        rho_.assign(n * kAzimuths, 0.0);
        intensity_.assign(n, flat);
        for (std::size_t i = 0; i < n; ++i) {
            if (!pb_.image.in_domain(i)) continue;
            double I = pb_.image.values[i];
            if (!(I >= pb_.i_min)) I = pb_.i_min, ++dark_;
            if (I > flat) I = flat, ++bright_;
            intensity_[i] = I;
            // R(N(t e)) >= I holds on an interval [0, rho] (R is unimodal along the ray).
            // At the flat brightness R is stationary and rounding would accept
            // slopes up to ~1e-8, so that case asks for R > I.
            const bool at_flat = I >= flat;
            auto admissible = [&](const Vec2& q) {
                const double r = rendered(q);
                return at_flat ? r > I : r >= I;
            };
            for (int k = 0; k < kAzimuths; ++k) {
                const Vec2& e = dirs_[k];
                double lo = 0.0, hi = rho_max;
                if (admissible(hi * e)) {
                    lo = hi;
                } else {
                    for (int it = 0; it < 40; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        if (admissible(mid * e))
                            lo = mid;
                        else
                            hi = mid;
                    }
                }
                rho_[i * kAzimuths + k] = lo;
            }
        }
    }

    // Support of the traced set at an arbitrary point, from the radii
    // interpolated over in-domain nodes (falls back to node `self`).
    double support_at(const Vec2& p, std::size_t self, const Vec2& n) const {
        const auto st = interp_stencil<2>(grid_, grid_.clamp_to_box(p));
        double best = 0.0;
        for (int k = 0; k < kAzimuths; ++k) {
            double r = 0.0;
            for (int c = 0; c < 4; ++c) {
                const std::size_t id = pb_.image.in_domain(st.nodes[c]) ? st.nodes[c] : self;
                r += st.weights[c] * rho_[id * kAzimuths + k];
            }
            best = std::max(best, r * dirs_[k].dot(n));
        }
        return best;
    }

    // Outward normals of the convex hull of the traced points; the azimuth
    // directions themselves when the hull is degenerate (K shrunk to a point).
    std::vector<Vec2> hull_normals(std::size_t i) const {
        std::vector<Vec2> pts(kAzimuths);
        double rmax = 0.0;
        for (int k = 0; k < kAzimuths; ++k) {
            pts[k] = rho_[i * kAzimuths + k] * dirs_[k];
            rmax = std::max(rmax, rho_[i * kAzimuths + k]);
        }
        std::vector<Vec2> out;
        if (rmax < 1e-12) return std::vector<Vec2>(dirs_.begin(), dirs_.end());
        std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
            return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
        });
        auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
            return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
        };
        std::vector<Vec2> hull(2 * pts.size());
        std::size_t m = 0;
        const double eps = 1e-14 * rmax * rmax;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            while (m >= 2 && cross(hull[m - 2], hull[m - 1], pts[k]) <= eps) --m;
            hull[m++] = pts[k];
        }
        for (std::size_t k = pts.size() - 1, t = m + 1; k-- > 0;) {
            while (m >= t && cross(hull[m - 2], hull[m - 1], pts[k]) <= eps) --m;
            hull[m++] = pts[k];
        }
        hull.resize(m - 1);
        if (hull.size() < 3) return std::vector<Vec2>(dirs_.begin(), dirs_.end());
        for (std::size_t k = 0; k < hull.size(); ++k) {
            const Vec2 edge = hull[(k + 1) % hull.size()] - hull[k];
            const Vec2 nrm(edge.y(), -edge.x());  // counter-clockwise hull: outward normal on the right
            if (nrm.norm() > 0.0) out.push_back(nrm.normalized());
        }
        return out;
    }

    void build_controls() {
        const std::size_t n = grid_.size();
        offsets_.assign(n + 1, 0);
        controls_.clear();
        const double r_min = h_ / (8.0 * dx_);  // caps the foot distance at 8 cells
        for (std::size_t i = 0; i < n; ++i) {
            offsets_[i] = static_cast<std::uint32_t>(controls_.size());
            if (fixed_[i]) continue;
            const Vec2 x = grid_.position(i);
            for (const Vec2& nrm : hull_normals(i)) {
                // Step length so that the midpoint support times s is about h.
                double s = std::max(dx_, h_ / std::max(support_at(x, i, nrm), r_min));
                for (int rep = 0; rep < 1; ++rep)
                    s = std::max(dx_, h_ / std::max(support_at(x - 0.5 * s * nrm, i, nrm), r_min));
                const double c = support_at(x - 0.5 * s * nrm, i, nrm) * s;
                const double t = std::max(h_, c);
                Control ctl;
                const Vec2 foot = grid_.clamp_to_box(x - s * nrm);
                Index<2> base{};
                for (int k = 0; k < 2; ++k) {
                    const double q = (foot[k] - grid_.origin[k]) / grid_.spacing[k];
                    base[k] = std::clamp(static_cast<int>(std::floor(q)), 0, grid_.dims[k] - 2);
                    (k == 0 ? ctl.tx : ctl.ty) = std::clamp(q - base[k], 0.0, 1.0);
                }
                ctl.base = grid_.index(base);
                ctl.discount = std::exp(-mu_ * t);
                ctl.cost = -std::expm1(-mu_ * c) / mu_;
                ctl.lag = c < t ? std::exp(-mu_ * c) - ctl.discount : 0.0;
                controls_.push_back(ctl);
            }
        }
        offsets_[n] = static_cast<std::uint32_t>(controls_.size());
    }

    // Seeds the occluding rim band exactly as solve_vertical does and keeps
    // those nodes fixed.
    void pin_occluding_band() {
        const ScalarField2D& img = pb_.image;
        const auto band = detail::rim_band(img, pb_.occluding_band);
        std::vector<double> i2(grid_.size(), 1.0);
        const double flat = rendered(Vec2::Zero());
        for (std::size_t i = 0; i < grid_.size(); ++i)
            if (img.in_domain(i)) i2[i] = std::pow(intensity_[i] / flat, 2);
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (!band[i] || fixed_[i]) continue;
            const double ii = std::sqrt(i2[i]);
            if (ii > 0.5) continue;
            const double c = detail::grad_i2(img, i2, grid_.coords(i));
            if (!(c > 0.0)) continue;
            double base = kInf;
            const Index<2> cc = grid_.coords(i);
            for (int dj = -pb_.occluding_band; dj <= pb_.occluding_band; ++dj)
                for (int di = -pb_.occluding_band; di <= pb_.occluding_band; ++di) {
                    const Index<2> q{cc[0] + di, cc[1] + dj};
                    if (grid_.contains(q) && !img.in_domain(q)) base = std::min(base, pb_.g(grid_.index(q)));
                }
            fixed_[i] = 1;
            fixed_value_[i] = kruzkov(base + detail::occluding_profile(ii, c), mu_);
        }
    }

    const SfSProblem& pb_;
    Grid2D grid_;
    double h_ = 0.0, mu_ = 1.0, dx_ = 1.0;
    std::array<Vec2, kAzimuths> dirs_;
    std::vector<std::uint8_t> fixed_;
    std::vector<double> fixed_value_;
    std::vector<double> intensity_;
    std::vector<double> rho_;
    std::vector<std::uint32_t> offsets_;
    std::vector<Control> controls_;
    std::vector<double> reference_;
    std::size_t dark_ = 0, bright_ = 0;
};

/// One application of the fixed-point operator to W (Jacobi form).
inline std::vector<double> fixed_point_operator(const std::vector<double>& w, const SfSProblem& pb) {
    return SemiLagrangianOperator(pb).apply(w);
}

/// Iterates W^n = T(W^{n-1}) from W^0 = 0 (boundary data imposed) until the
/// sup-norm update drops below tol. Iterations run as Gauss-Seidel sweeps in
/// four alternating orders, which converge to the same fixed point faster.
inline SfSSolution solve_fixed_point(const SfSProblem& pb) {
    const SemiLagrangianOperator op(pb);
    const Grid2D& g = op.grid();
    std::vector<double> w(g.size(), 0.0);
    op.impose_boundary(w);
    SfSSolution sol;
    sol.clamped_dark = op.clamped_dark();
    sol.clamped_bright = op.clamped_bright();
    int quiet = 0;  // consecutive sweeps below tol; a full round of orders is required
    for (int it = 0; it < pb.max_iterations; ++it) {
        const double change = op.sweep(w, it % 4);
        sol.iterations = it + 1;
        sol.residual = change;
        quiet = change < pb.tol ? quiet + 1 : 0;
        if (quiet >= 4) {
            sol.converged = true;
            break;
        }
    }
    sol.v = ScalarField2D(g, 0.0);
    sol.v.values = w;
    sol.v.mask = pb.image.mask;
    sol.u = ScalarField2D(g, 0.0);
    sol.u.mask = pb.image.mask;
    for (std::size_t i = 0; i < w.size(); ++i) sol.u.values[i] = kruzkov_inverse(std::min(w[i], (1.0 - 1e-16) / pb.mu), pb.mu);
    return sol;
}

}  // namespace shadeprint
