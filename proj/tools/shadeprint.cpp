// shadeprint command line: one subcommand per stage plus the config-driven
// pipeline. Exit codes: 0 ok, 2 bad input, 3 numerical failure.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "shadeprint/pipeline.hpp"

using namespace shadeprint;

namespace {

Vec3 parse_vec3(const std::string& s, const char* what) {
    const auto parts = Config::split(s, ',');
    if (parts.size() != 3) throw InputError(std::string(what) + ": expected x,y,z");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        try {
            v[k] = std::stod(parts[k]);
        } catch (const std::logic_error&) {
            throw InputError(std::string(what) + ": bad number '" + parts[k] + "'");
        }
    }
    return v;
}

// .pgm gets a 16-bit image scaled to the height range, anything else CSV.
void write_height_file(const ScalarField2D& u, const std::string& path, bool force_pgm = false) {
    if (force_pgm || std::filesystem::path(path).extension() == ".pgm") {
        const double hi = height_summary(u)["max_height"].get<double>();
        write_pgm(u, path, 0.0, hi > 0.0 ? hi : 1.0, true, 65535);
    } else {
        write_csv(u, path);
    }
}

void write_json(const Json& j, const std::string& path) {
    if (path.empty() || path == "-")
        std::cout << j.dump(2) << "\n";
    else
        write_text(path, j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shadeprint: images to printable G-code"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(0, 1);
    std::string top_config;
    app.add_option("--config", top_config, "run the pipeline described by this config file");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic hemisphere image");
    int synth_size = 128;
    double synth_radius = 0.9;
    std::string synth_light = "0,0,1", synth_out;
    synth->add_option("--size", synth_size, "pixels per side")->capture_default_str();
    synth->add_option("--radius", synth_radius, "radius as a fraction of the half width")->capture_default_str();
    synth->add_option("--light", synth_light, "light direction x,y,z")->capture_default_str();
    synth->add_option("--out", synth_out, "output PGM")->required();

    // sfs solve
    auto* sfs = app.add_subcommand("sfs", "shape from shading");
    sfs->require_subcommand(1);
    auto* sfs_solve = sfs->add_subcommand("solve", "reconstruct a height map from one image");
    sfs_solve->set_help_flag("--help", "print this help; -h is taken by the step option");
    SfsSettings sfs_s;
    std::string sfs_model = "lambertian", sfs_light = "0,0,1", sfs_out = "height.csv", sfs_pgm;
    sfs_solve->add_option("--image", sfs_s.image, "input PGM")->required();
    sfs_solve->add_option("--mask", sfs_s.mask, "domain mask PGM (default: pixels brighter than 0)");
    sfs_solve->add_option("--pixel-size", sfs_s.pixel_size, "mm per pixel")->capture_default_str();
    sfs_solve->add_option("--solver", sfs_s.solver, "eikonal | semi-lagrangian")->capture_default_str();
    sfs_solve->add_option("--model", sfs_model, "lambert | oren | phong | blinn")->capture_default_str();
    sfs_solve->add_option("--light", sfs_light, "light direction x,y,z")->capture_default_str();
    sfs_solve->add_option("--mu", sfs_s.mu, "Kruzkov parameter")->capture_default_str();
    sfs_solve->add_option("--h", sfs_s.h, "semi-Lagrangian step, mm (0: half the pixel size)")->capture_default_str();
    sfs_solve->add_option("--tol", sfs_s.tol, "stopping tolerance")->capture_default_str();
    sfs_solve->add_option("--roughness", sfs_s.params.roughness, "Oren-Nayar sigma");
    sfs_solve->add_option("--k-specular", sfs_s.params.k_specular, "specular weight");
    sfs_solve->add_option("--shininess", sfs_s.params.phong_exponent, "specular exponent");
    sfs_solve->add_option("--occluding", sfs_s.occluding, "mask rim is an occluding contour")->capture_default_str();
    sfs_solve->add_option("--out", sfs_out, "height map, .csv or .pgm")->capture_default_str();
    sfs_solve->add_option("--pgm", sfs_pgm, "also write the height as a 16-bit PGM");

    // ps solve
    auto* ps = app.add_subcommand("ps", "photometric stereo");
    ps->require_subcommand(1);
    auto* ps_solve = ps->add_subcommand("solve", "height map from two images under different lights");
    std::string ps_i1, ps_i2, ps_l1 = "0,0,1", ps_l2 = "0.6,0,0.8", ps_mask, ps_g, ps_out = "height.csv";
    double ps_pixel = 0.5;
    ps_solve->add_option("--i1,--image1", ps_i1, "first PGM")->required();
    ps_solve->add_option("--i2,--image2", ps_i2, "second PGM")->required();
    ps_solve->add_option("--l1,--light1", ps_l1, "light of the first image")->capture_default_str();
    ps_solve->add_option("--l2,--light2", ps_l2, "light of the second image")->capture_default_str();
    ps_solve->add_option("--g,--boundary", ps_g, "height CSV with the Dirichlet data (default 0)");
    ps_solve->add_option("--mask", ps_mask);
    ps_solve->add_option("--pixel-size", ps_pixel)->capture_default_str();
    ps_solve->add_option("--out", ps_out, "height map, .csv or .pgm")->capture_default_str();

    // mesh
    auto* mesh = app.add_subcommand("mesh", "height map to STL, validation, conversion");
    mesh->require_subcommand(1);
    std::string mesh_height, mesh_stl, mesh_out, mesh_format = "binary";
    double mesh_pixel = 0.5, mesh_base = 2.0;
    auto* from_height = mesh->add_subcommand("from-height", "closed solid under a height map");
    from_height->add_option("--height", mesh_height, "height CSV")->required();
    from_height->add_option("--pixel-size", mesh_pixel)->capture_default_str();
    from_height->add_option("--base", mesh_base, "plate thickness, mm")->capture_default_str();
    from_height->add_option("--out", mesh_out)->required();
    from_height->add_option("--format", mesh_format, "binary | ascii")->capture_default_str();
    auto* validate_cmd = mesh->add_subcommand("validate", "check the STL rules; exit 2 on any defect");
    validate_cmd->add_option("--stl", mesh_stl)->required();
    auto* convert = mesh->add_subcommand("convert", "rewrite an STL in the other flavour");
    convert->add_option("--stl", mesh_stl)->required();
    convert->add_option("--out", mesh_out)->required();
    convert->add_option("--format", mesh_format, "binary | ascii")->capture_default_str();

    // sdf
    auto* sdf = app.add_subcommand("sdf", "signed distance fields");
    sdf->require_subcommand(1);
    std::string sdf_stl, sdf_out;
    double sdf_spacing = 1.0;
    auto* sample = sdf->add_subcommand("sample", "sample the signed distance of a mesh on a grid");
    sample->add_option("--stl", sdf_stl)->required();
    sample->add_option("--spacing", sdf_spacing)->capture_default_str();
    sample->add_option("--out", sdf_out, "raw float32 grid (a .hdr file is written next to it)")->required();

    // overhang
    auto* overhang = app.add_subcommand("overhang", "overhang detection and repair");
    overhang->require_subcommand(1);
    std::string oh_stl, oh_out, oh_diff, oh_mask, oh_report, oh_format = "binary";
    OverhangSettings oh_s;
    auto add_common = [&](CLI::App* c) {
        c->add_option("--stl", oh_stl)->required();
        c->add_option("--spacing", oh_s.spacing, "grid spacing, mm")->capture_default_str();
        c->add_option("--alpha", oh_s.alpha_deg, "limit angle, degrees")->capture_default_str();
        c->add_option("--report", oh_report, "JSON report (default stdout)");
    };
    auto* detect = overhang->add_subcommand("detect", "report unprintable regions");
    add_common(detect);
    detect->add_option("--out", oh_mask, "overhang mask as a raw float32 grid (1 = overhang)");
    auto* fix = overhang->add_subcommand("fix", "grow the object until it prints without supports");
    add_common(fix);
    fix->add_option("--tf,--t-final", oh_s.t_final, "evolution time cap")->capture_default_str();
    fix->add_option("--c1", oh_s.c1, "angle term weight (0: 1 / object height)")->capture_default_str();
    fix->add_option("--c2", oh_s.c2, "curvature term weight (0: grid spacing)")->capture_default_str();
    fix->add_option("--out", oh_out)->required();
    fix->add_option("--diff", oh_diff, "STL of the added material");
    fix->add_option("--format", oh_format, "binary | ascii")->capture_default_str();

    // slice
    auto* slice_cmd = app.add_subcommand("slice", "slice an STL into G-code");
    std::string sl_stl, sl_out, sl_report;
    SliceSettings sl_s;
    slice_cmd->add_option("--stl", sl_stl)->required();
    slice_cmd->add_option("--layer-height", sl_s.layer_height)->capture_default_str();
    slice_cmd->add_option("--infill", sl_s.infill, "eikonal | square")->capture_default_str();
    slice_cmd->add_option("--spacing", sl_s.spacing, "infill spacing, mm")->capture_default_str();
    slice_cmd->add_option("--flow", sl_s.flow)->capture_default_str();
    slice_cmd->add_option("--out", sl_out)->required();
    slice_cmd->add_option("--report", sl_report, "metrics JSON");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run the stages listed in a config file");
    std::string pl_config, pl_out_dir;
    pipeline->add_option("--config", pl_config)->required();
    pipeline->add_option("--out-dir", pl_out_dir, "override [pipeline] out_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            write_pgm(hemisphere_image(synth_size, synth_radius, parse_vec3(synth_light, "--light")), synth_out, 0.0, 1.0,
                      true, 65535);
        } else if (*sfs_solve) {
            sfs_s.params.model = parse_reflectance_model(sfs_model);
            sfs_s.params.blinn_exponent = sfs_s.params.phong_exponent;
            if (sfs_s.params.k_specular > 0.0) sfs_s.params.k_diffuse = 1.0 - sfs_s.params.k_specular;
            sfs_s.light = parse_vec3(sfs_light, "--light");
            const SfSSolution sol = run_sfs(sfs_s);
            write_height_file(sol.u, sfs_out);
            if (!sfs_pgm.empty()) write_height_file(sol.u, sfs_pgm, true);
            std::cerr << "sfs: " << sol.iterations << " sweeps, " << sol.clamped_dark << " dark and "
                      << sol.clamped_bright << " bright pixels clamped\n";
        } else if (*ps_solve) {
            Json j;
            const ScalarField2D u = run_ps(ps_i1, ps_i2, parse_vec3(ps_l1, "--l1"), parse_vec3(ps_l2, "--l2"), ps_mask,
                                           ps_pixel, &j, ps_g);
            write_height_file(u, ps_out);
            std::cerr << "ps: " << j.dump() << "\n";
        } else if (*from_height) {
            const TriangleMesh m = height_to_mesh(read_csv(mesh_height, mesh_pixel), mesh_base);
            stl_write(m, mesh_out, parse_stl_format(mesh_format));
            std::cerr << "mesh: " << validate(m).summary() << "\n";
        } else if (*validate_cmd) {
            const MeshReport rep = validate(stl_read(mesh_stl));
            std::cout << rep.summary() << "\n";
            for (const auto& i : rep.issues) std::cout << "  " << issue_name(i.kind) << ": " << i.message << "\n";
            return rep.ok() ? 0 : 2;
        } else if (*convert) {
            stl_write(stl_read(mesh_stl), mesh_out, parse_stl_format(mesh_format));
        } else if (*sample) {
            const TriangleMesh m = stl_read(sdf_stl);
            write_raw_field(sample_sdf(m, padded_grid(m, sdf_spacing)), sdf_out);
        } else if (*detect) {
            ScalarField3D mask;
            write_json(run_detect(stl_read(oh_stl), oh_s, &mask), oh_report);
            if (!oh_mask.empty()) write_raw_field(mask, oh_mask);
        } else if (*fix) {
            const OverhangOutcome o = run_overhang(stl_read(oh_stl), oh_s);
            stl_write(o.fixed, oh_out, parse_stl_format(oh_format));
            if (!oh_diff.empty()) {
                if (o.added.facets.empty()) {
                    std::cerr << "overhang: nothing was added, " << oh_diff << " not written\n";
                } else {
                    stl_write(o.added, oh_diff, parse_stl_format(oh_format), false);
                }
            }
            write_json(o.summary, oh_report);
        } else if (*slice_cmd) {
            const SliceOutcome s = run_slice(stl_read(sl_stl), sl_s);
            write_text(sl_out, s.program.text());
            if (!sl_report.empty()) write_json(metrics_json(s), sl_report);
        } else if (*pipeline || !top_config.empty()) {
            Config c = Config::load(*pipeline ? pl_config : top_config);
            if (!pl_out_dir.empty()) c.set("pipeline", "out_dir", pl_out_dir);
            run_pipeline(c, &std::cerr);
        } else {
            std::cout << app.help();
        }
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
