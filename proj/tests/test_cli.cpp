#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "shadeprint/io.hpp"
#include "shadeprint/pipeline.hpp"
#include "shadeprint/sfs.hpp"
#include "shadeprint/stl.hpp"

using namespace shadeprint;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test.
class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("shadeprint_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    std::string at(const std::string& name) const { return (dir / name).string(); }

    // Runs the binary from the scratch dir; stdout and stderr go to out.txt.
    int run(const std::string& args) const {
        const std::string cmd = "cd '" + dir.string() + "' && '" SHADEPRINT_CLI "' " + args + " > out.txt 2>&1";
        const int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    }

    std::string output() const { return slurp(at("out.txt")); }

    static std::string slurp(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(at(name)) << text;
    }

    // Mushroom scaled to millimetres and lifted onto positive coordinates.
    void write_mushroom(const std::string& name) const {
        TriangleMesh m = isosurface(fixtures::mushroom(0.08));
        for (Facet& f : m.facets)
            for (Vec3& v : f.v) v *= 10.0;
        prepare_for_export(m, 1.0);
        stl_write(m, at(name), StlFormat::Binary);
    }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, VersionAndHelp) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_NE(output().find(kVersion), std::string::npos);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(output().find("overhang"), std::string::npos);
}

TEST_F(Cli, BadInputExitsWithTwo) {
    EXPECT_EQ(run("sfs solve --image missing.pgm"), 2);
    EXPECT_EQ(run("slice --stl missing.stl --out a.gcode"), 2);
    EXPECT_EQ(run("--no-such-flag"), 2);
    write("bad.cfg", "[pipeline]\nstages = sfs\n[sfs]\nimage = x.pgm\nbogus_key = 1\n");
    EXPECT_EQ(run("pipeline --config bad.cfg"), 2);
    EXPECT_EQ(run("synth --size 32 --out x.pgm"), 0);
    EXPECT_EQ(run("sfs solve --image x.pgm --light 0,0,-1"), 2);
}

TEST_F(Cli, UnfinishedRepairExitsWithThree) {
    write_mushroom("mush.stl");
    EXPECT_EQ(run("overhang fix --stl mush.stl --spacing 0.8 --tf 0.05 --out fixed.stl"), 3);
    EXPECT_NE(output().find("t_f"), std::string::npos);
}

TEST_F(Cli, StagesRunOneByOne) {
    ASSERT_EQ(run("synth --size 64 --out img.pgm"), 0);
    ASSERT_EQ(run("sfs solve --image img.pgm --pixel-size 0.5 --out h.csv --pgm h.pgm"), 0) << output();
    EXPECT_TRUE(fs::exists(at("h.pgm")));
    ASSERT_EQ(run("mesh from-height --height h.csv --pixel-size 0.5 --out obj.stl"), 0) << output();
    EXPECT_EQ(run("mesh validate --stl obj.stl"), 0) << output();
    ASSERT_EQ(run("mesh convert --stl obj.stl --out obj_ascii.stl --format ascii"), 0);
    EXPECT_EQ(slurp(at("obj_ascii.stl")).rfind("solid", 0), 0u);
    EXPECT_EQ(stl_read(at("obj_ascii.stl")).size(), stl_read(at("obj.stl")).size());
    ASSERT_EQ(run("sdf sample --stl obj.stl --spacing 2 --out obj.raw"), 0) << output();
    EXPECT_TRUE(fs::exists(at("obj.raw")));
    ASSERT_EQ(run("overhang detect --stl obj.stl --spacing 1.5 --report det.json --out mask.raw"), 0) << output();
    const Json det = Json::parse(slurp(at("det.json")));
    EXPECT_TRUE(det.contains("overhang_nodes"));
    EXPECT_TRUE(fs::exists(at("mask.raw")));
    ASSERT_EQ(run("overhang fix --stl obj.stl --spacing 1.5 --out fixed.stl"), 0) << output();
    EXPECT_EQ(run("mesh validate --stl fixed.stl"), 0);
    ASSERT_EQ(run("slice --stl fixed.stl --layer-height 0.5 --spacing 2 --out print.gcode --report m.json"), 0)
        << output();
    const std::string g = slurp(at("print.gcode"));
    EXPECT_NE(g.find("G28"), std::string::npos);
    EXPECT_NE(g.find("M84"), std::string::npos);
    EXPECT_GT(Json::parse(slurp(at("m.json")))["layers"].get<int>(), 0);
}

TEST_F(Cli, ReconstructionRendersBackToTheImage) {
    const int n = 96;
    ASSERT_EQ(run("synth --size " + std::to_string(n) + " --out img.pgm"), 0);
    ASSERT_EQ(run("sfs solve --image img.pgm --pixel-size 1 --out h.csv"), 0) << output();
    const ScalarField2D img = read_pgm(at("img.pgm"));
    const ScalarField2D u = read_csv(at("h.csv"));
    ASSERT_EQ(u.grid.dims, img.grid.dims);
    const ScalarField2D back = render(u, LightSetup(), ReflectanceParams());
    const double c = 0.5 * (n - 1), r = 0.9 * c;
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        // central differences need both neighbours inside the disc
        if ((img.grid.position(i) - Vec2(c, c)).norm() > 0.8 * r) continue;
        sum += std::abs(back.values[i] - img.values[i]);
        ++count;
    }
    ASSERT_GT(count, 1000);
    EXPECT_LT(sum / count, 0.02);
}

TEST_F(Cli, PhotometricStereoAliases) {
    ASSERT_EQ(run("synth --size 48 --light 0.3,0,1 --out a.pgm"), 0);
    ASSERT_EQ(run("synth --size 48 --light 0,0.3,1 --out b.pgm"), 0);
    ASSERT_EQ(run("ps solve --i1 a.pgm --i2 b.pgm --l1 0.3,0,1 --l2 0,0.3,1 --out ps.csv"), 0) << output();
    ASSERT_EQ(run("ps solve --image1 a.pgm --image2 b.pgm --light1 0.3,0,1 --light2 0,0.3,1 --out ps2.csv"), 0);
    EXPECT_EQ(slurp(at("ps.csv")), slurp(at("ps2.csv")));
    // same lights in both images carry no information
    EXPECT_EQ(run("ps solve --i1 a.pgm --i2 a.pgm --l1 0.3,0,1 --l2 0.3,0,1 --out ps3.csv"), 2);
}

TEST_F(Cli, SliceOnlyConfigWritesOnlyGcode) {
    stl_write(fixtures::box_mesh(Vec3(1, 1, 1), Vec3(11, 11, 4)), at("box.stl"), StlFormat::Binary);
    write("slice.cfg", "[pipeline]\nstages = slice\nout_dir = out\n[slice]\nstl = box.stl\n");
    ASSERT_EQ(run("pipeline --config slice.cfg"), 0) << output();
    std::set<std::string> files;
    for (const auto& e : fs::directory_iterator(dir / "out")) files.insert(e.path().filename().string());
    EXPECT_EQ(files, (std::set<std::string>{"metrics.json", "print.gcode"}));
}

TEST_F(Cli, FailingStageKeepsEarlierArtifacts) {
    ASSERT_EQ(run("synth --size 48 --out img.pgm"), 0);
    write("run.cfg", "[pipeline]\nstages = sfs, mesh, slice\nout_dir = out\n[sfs]\nimage = img.pgm\n"
                     "[slice]\nlayer_height = -1\n");
    EXPECT_EQ(run("pipeline --config run.cfg"), 2);
    EXPECT_TRUE(fs::exists(dir / "out" / "height.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "object.stl"));
    EXPECT_FALSE(fs::exists(dir / "out" / "print.gcode"));
}

TEST_F(Cli, PipelineRerunIsBitIdentical) {
    ASSERT_EQ(run("synth --size 48 --out img.pgm"), 0);
    write("run.cfg", "[pipeline]\nout_dir = a\npixel_size = 0.5\n[sfs]\nimage = img.pgm\n[overhang]\nspacing = 1\n"
                     "[slice]\nlayer_height = 0.5\n");
    ASSERT_EQ(run("pipeline --config run.cfg"), 0) << output();
    ASSERT_EQ(run("pipeline --config run.cfg --out-dir b"), 0) << output();
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        const fs::path other = dir / "b" / e.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        const std::string x = slurp(e.path().string()), y = slurp(other.string());
        if (e.path().filename() == "metrics.json") {
            // the settings block records out_dir, everything else must match
            Json jx = Json::parse(x), jy = Json::parse(y);
            jx["settings"]["pipeline"].erase("out_dir");
            jy["settings"]["pipeline"].erase("out_dir");
            EXPECT_EQ(jx, jy);
        } else {
            EXPECT_EQ(x, y) << e.path();
        }
        ++compared;
    }
    EXPECT_GE(compared, 6u);
}
