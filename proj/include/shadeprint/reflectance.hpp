// Forward brightness models: image intensity from a unit normal, the light
// and viewer directions, and material parameters.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "shadeprint/error.hpp"
#include "shadeprint/field.hpp"

namespace shadeprint {

enum class ReflectanceModel { Lambertian, OrenNayar, Phong, BlinnPhong };

inline ReflectanceModel parse_reflectance_model(const std::string& s) {
    if (s == "lambert" || s == "lambertian") return ReflectanceModel::Lambertian;
    if (s == "oren" || s == "oren-nayar" || s == "on") return ReflectanceModel::OrenNayar;
    if (s == "phong") return ReflectanceModel::Phong;
    if (s == "blinn" || s == "blinn-phong") return ReflectanceModel::BlinnPhong;
    throw InputError("unknown reflectance model '" + s + "'");
}

/// Light direction (towards the source) and viewer direction, both unit.
struct LightSetup {
    Vec3 light{0.0, 0.0, 1.0};
    Vec3 viewer{0.0, 0.0, 1.0};

    LightSetup() = default;
    LightSetup(const Vec3& l, const Vec3& v) : light(l), viewer(v) { check(); }

    /// Normalizes both vectors; throws if the light is not above the surface.
    static LightSetup from_directions(Vec3 l, Vec3 v = Vec3(0, 0, 1)) {
        if (l.norm() == 0.0 || v.norm() == 0.0) throw InputError("light/viewer direction must be nonzero");
        return LightSetup(l.normalized(), v.normalized());
    }

    void check() const {
        if (std::abs(light.norm() - 1.0) > 1e-12 || std::abs(viewer.norm() - 1.0) > 1e-12)
            throw InputError("light and viewer directions must be unit vectors");
        if (!(light.z() > 0.0)) throw InputError("the light source must be above the surface (l3 > 0)");
    }
};

struct ReflectanceParams {
    ReflectanceModel model = ReflectanceModel::Lambertian;
    double albedo_diffuse = 1.0;   // gamma_D
    double albedo_specular = 1.0;  // gamma_S
    double roughness = 0.0;        // Oren-Nayar sigma
    double phong_exponent = 1.0;
    double blinn_exponent = 1.0;
    double k_ambient = 0.0;
    double k_diffuse = 1.0;
    double k_specular = 0.0;
    double ambient = 0.0;  // I_A

    void check() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(albedo_diffuse) || !unit(albedo_specular) || !unit(ambient))
            throw InputError("albedos and ambient intensity must lie in [0,1]");
        if (roughness < 0.0 || phong_exponent < 0.0 || blinn_exponent < 0.0)
            throw InputError("roughness and specular exponents must be nonnegative");
        if (k_ambient < 0.0 || k_diffuse < 0.0 || k_specular < 0.0)
            throw InputError("component weights must be nonnegative");
        if (k_ambient + k_diffuse + k_specular > 1.0 + 1e-12)
            throw InputError("component weights must satisfy kA + kD + kS <= 1");
    }
};

struct OrenNayarCoefficients {
    double a;
    double b;
};

inline OrenNayarCoefficients oren_nayar_coefficients(double sigma) {
    const double s2 = sigma * sigma;
    return {1.0 - 0.5 * s2 / (s2 + 0.33), 0.45 * s2 / (s2 + 0.09)};
}

namespace detail {

inline double clamp_cos(double c) { return std::clamp(c, -1.0, 1.0); }

inline double oren_nayar(const Vec3& n, const ReflectanceParams& p, const LightSetup& ls) {
    const double cos_i = clamp_cos(n.dot(ls.light));
    if (cos_i <= 0.0) return 0.0;
    const double cos_r = clamp_cos(n.dot(ls.viewer));
    const double theta_i = std::acos(cos_i);
    const double theta_r = std::acos(cos_r);
    const double alpha = std::max(theta_i, theta_r);
    const double beta = std::min(theta_i, theta_r);
    const auto [a, b] = oren_nayar_coefficients(p.roughness);

    // Azimuths of L and V projected on the image plane; a vertical L or V has
    // no azimuth and kills the term.
    double azimuthal = 0.0;
    const double lp = std::hypot(ls.light.x(), ls.light.y());
    const double vp = std::hypot(ls.viewer.x(), ls.viewer.y());
    if (lp > 1e-14 && vp > 1e-14) {
        const double phi_i = std::atan2(ls.light.y(), ls.light.x());
        const double phi_r = std::atan2(ls.viewer.y(), ls.viewer.x());
        azimuthal = std::max(0.0, std::cos(phi_r - phi_i));
    }
    double rough = 0.0;
    if (azimuthal > 0.0 && b > 0.0 && beta < 0.5 * M_PI) rough = b * std::sin(alpha) * std::tan(beta) * azimuthal;
    return p.albedo_diffuse * cos_i * (a + rough);
}

}  // namespace detail

/// Image intensity for a unit outward normal `n`. The result is clamped to [0,1].
inline double brightness(const Vec3& n, const ReflectanceParams& p, const LightSetup& ls) {
    if (std::abs(n.norm() - 1.0) > 1e-9) throw std::invalid_argument("brightness: normal must be a unit vector");
    const double cos_i = detail::clamp_cos(n.dot(ls.light));
    double value = 0.0;
    switch (p.model) {
        case ReflectanceModel::Lambertian:
            value = p.albedo_diffuse * std::max(0.0, cos_i);
            break;
        case ReflectanceModel::OrenNayar:
            value = detail::oren_nayar(n, p, ls);
            break;
        case ReflectanceModel::Phong: {
            const Vec3 r = 2.0 * n.dot(ls.light) * n - ls.light;
            const double cos_s = std::max(0.0, detail::clamp_cos(r.dot(ls.viewer)));
            value = p.k_ambient * p.ambient + p.k_diffuse * p.albedo_diffuse * std::max(0.0, cos_i) +
                    p.k_specular * p.albedo_specular * std::pow(cos_s, p.phong_exponent);
            break;
        }
        case ReflectanceModel::BlinnPhong: {
            const Vec3 hsum = ls.viewer + ls.light;
            double cos_d = 0.0;
            if (hsum.norm() > 1e-14) cos_d = std::max(0.0, detail::clamp_cos(n.dot(hsum.normalized())));
            value = p.k_ambient * p.ambient + p.k_diffuse * p.albedo_diffuse * std::max(0.0, cos_i) +
                    p.k_specular * p.albedo_specular * std::pow(cos_d, p.blinn_exponent);
            break;
        }
    }
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace shadeprint
