#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "debris/config.hpp"
#include "debris/png_io.hpp"
#include "debris/scene_io.hpp"
#include "fixtures.hpp"

using namespace debris;
using testutil::tmp_dir;

namespace {

const char* kIdentityCam =
    "cam0 64 48 100 100 32 24 1 0 0 0 1 0 0 0 1 0 0 0 cam0.pgm\n";

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string ascii_ply_one_point() {
  return "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\n0.5 -1.25 2 \n";
}

}  // namespace

TEST_CASE("format_double emits shortest round-trip text") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.05) == "0.05");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("cameras.txt: write then parse round-trips every field") {
  std::string dir = tmp_dir("cams_rt");
  std::vector<CameraPose> cams;
  for (int i = 0; i < 3; ++i) {
    CameraPose cam = testutil::look_at_camera({2.0 + i, -3.0, 4.0}, {0, 0, 0},
                                              500.0, 640, 480,
                                              "cam" + std::to_string(i));
    cams.push_back(cam);
  }
  std::string path = dir + "/cameras.txt";
  write_cameras(cams, path);
  auto parsed = parse_cameras(path);
  REQUIRE(parsed.size() == cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    CHECK(parsed[i].camera_id == cams[i].camera_id);
    CHECK(parsed[i].width == cams[i].width);
    CHECK(parsed[i].fx == cams[i].fx);
    CHECK(parsed[i].cx == cams[i].cx);
    CHECK((parsed[i].R - cams[i].R).cwiseAbs().maxCoeff() == 0.0);
    CHECK((parsed[i].T - cams[i].T).cwiseAbs().maxCoeff() == 0.0);
    CHECK(parsed[i].mask_path == cams[i].mask_path);
  }
}

TEST_CASE("cameras.txt: comments and blank lines are ignored") {
  std::istringstream in(std::string("# a comment\n\n") + kIdentityCam +
                        "  # trailing comment line\n");
  auto cams = parse_cameras(in, "test");
  REQUIRE(cams.size() == 1);
  CHECK(cams[0].camera_id == "cam0");
}

TEST_CASE("cameras.txt: a reflection is rejected as NonOrthonormalRotation") {
  std::istringstream in("cam0 64 48 100 100 32 24 1 0 0 0 1 0 0 0 -1 0 0 0 m.png\n");
  try {
    parse_cameras(in, "test");
    FAIL("expected NonOrthonormalRotation");
  } catch (const DebrisError& e) {
    CHECK(e.kind() == ErrorKind::NonOrthonormalRotation);
    CHECK(e.exit_code() == 5);
    CHECK(std::string(e.what()).find("test:1") != std::string::npos);
  }
}

TEST_CASE("cameras.txt parse errors carry file and line") {
  std::istringstream wrong_count(std::string(kIdentityCam) + "cam1 64 48\n");
  CHECK_THROWS_WITH_AS(parse_cameras(wrong_count, "cams"),
                       doctest::Contains("cams:2"), DebrisError);
  std::istringstream bad_num(
      "cam0 64 48 1e+xyz 100 32 24 1 0 0 0 1 0 0 0 1 0 0 0 m.png\n");
  CHECK_THROWS_AS(parse_cameras(bad_num, "cams"), DebrisError);
  std::istringstream dup(std::string(kIdentityCam) + kIdentityCam);
  CHECK_THROWS_WITH_AS(parse_cameras(dup, "cams"),
                       doctest::Contains("duplicate"), DebrisError);
}

TEST_CASE("parse_scene accepts the smallest well-formed input") {
  std::string dir = tmp_dir("scene_min");
  write_text_file(dir + "/cameras.txt",
                  "c0 1 1 1 1 0 0 1 0 0 0 1 0 0 0 1 0 0 0 c0.pgm\n");
  write_text_file(dir + "/cloud.ply", ascii_ply_one_point());
  write_text_file(dir + "/c0.pgm", "P2\n1 1\n255\n0\n");
  LoadedScene ls = parse_scene(dir + "/cameras.txt", dir + "/cloud.ply", dir,
                               PipelineConfig::defaults().class_table);
  CHECK(ls.scene.cameras.size() == 1);
  CHECK(ls.scene.cloud.size() == 1);
  CHECK(ls.scene.cloud[0].x == 0.5f);
  REQUIRE(ls.masks.size() == 1);
  CHECK(ls.masks[0].width == 1);
}

TEST_CASE("parse_scene rejects a mask that mismatches its camera") {
  std::string dir = tmp_dir("scene_dim");
  write_text_file(dir + "/cameras.txt",
                  "c0 640 480 100 100 320 240 1 0 0 0 1 0 0 0 1 0 0 0 c0.png\n");
  write_text_file(dir + "/cloud.ply", ascii_ply_one_point());
  write_png_gray8(Image<std::uint8_t>(64, 48, 0), dir + "/c0.png");
  try {
    parse_scene(dir + "/cameras.txt", dir + "/cloud.ply", dir,
                PipelineConfig::defaults().class_table);
    FAIL("expected DimensionMismatch");
  } catch (const DebrisError& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("parse_scene rejects mask values outside the class table") {
  std::string dir = tmp_dir("scene_cls");
  write_text_file(dir + "/cameras.txt",
                  "c0 2 2 1 1 0 0 1 0 0 0 1 0 0 0 1 0 0 0 c0.pgm\n");
  write_text_file(dir + "/cloud.ply", ascii_ply_one_point());
  write_text_file(dir + "/c0.pgm", "P2\n2 2\n255\n0 0\n0 9\n");
  try {
    parse_scene(dir + "/cameras.txt", dir + "/cloud.ply", dir,
                PipelineConfig::defaults().class_table);
    FAIL("expected UnknownClassIndex");
  } catch (const DebrisError& e) {
    CHECK(e.kind() == ErrorKind::UnknownClassIndex);
    CHECK(e.exit_code() == 4);
    CHECK(std::string(e.what()).find("9") != std::string::npos);
  }
}

TEST_CASE("PLY: ascii vertices with color parse correctly") {
  std::istringstream in(
      "ply\nformat ascii 1.0\ncomment synthetic\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "end_header\n1 2 3 255 0 10\n-1 -2 -3 0 128 64\n");
  PlyCloud cloud = read_ply(in, "test.ply");
  REQUIRE(cloud.points.size() == 2);
  CHECK(cloud.has_color);
  CHECK(cloud.points[0].x == 1.0f);
  CHECK(cloud.points[1].z == -3.0f);
  CHECK(cloud.points[0].r == 255);
  CHECK(cloud.points[1].g == 128);
}

TEST_CASE("PLY: binary write/read round-trips bit-exactly") {
  std::string dir = tmp_dir("ply_rt");
  std::mt19937 gen(3);
  std::uniform_real_distribution<float> coord(-100.0f, 100.0f);
  std::vector<CloudPoint> points(1000);
  for (auto& p : points) {
    p.x = coord(gen);
    p.y = coord(gen);
    p.z = coord(gen);
    p.r = static_cast<std::uint8_t>(gen());
    p.g = static_cast<std::uint8_t>(gen());
    p.b = static_cast<std::uint8_t>(gen());
  }
  write_ply(points, true, dir + "/c.ply");
  PlyCloud back = read_ply(dir + "/c.ply");
  REQUIRE(back.points.size() == points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(back.points[i].x == points[i].x);
    CHECK(back.points[i].y == points[i].y);
    CHECK(back.points[i].z == points[i].z);
    CHECK(back.points[i].r == points[i].r);
  }
}

TEST_CASE("PLY parse errors are structured") {
  std::istringstream list_prop(
      "ply\nformat ascii 1.0\nelement vertex 1\n"
      "property list uchar int vertex_indices\nend_header\n");
  CHECK_THROWS_AS(read_ply(list_prop, "t"), DebrisError);
  std::istringstream no_xyz(
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
      "property float y\nend_header\n1 2\n");
  CHECK_THROWS_WITH_AS(read_ply(no_xyz, "t"), doctest::Contains("x, y, z"),
                       DebrisError);
  std::istringstream truncated(
      "ply\nformat binary_little_endian 1.0\nelement vertex 10\n"
      "property float x\nproperty float y\nproperty float z\nend_header\nabc");
  CHECK_THROWS_WITH_AS(read_ply(truncated, "t"), doctest::Contains("truncated"),
                       DebrisError);
  std::istringstream huge(
      "ply\nformat ascii 1.0\nelement vertex 999999999999\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n");
  CHECK_THROWS_WITH_AS(read_ply(huge, "t"), doctest::Contains("vertex count"),
                       DebrisError);
}

TEST_CASE("labeled cloud: empty cloud writes a valid vertex-0 PLY") {
  std::string dir = tmp_dir("lab_empty");
  SemanticCloud cloud;
  write_labeled_cloud(cloud, dir + "/f.ply");
  std::string text = testutil::read_text(dir + "/f.ply");
  CHECK(text.find("element vertex 0") != std::string::npos);
  SemanticCloud back = read_labeled_cloud(dir + "/f.ply");
  CHECK(back.points.empty());
}

TEST_CASE("labeled cloud: single point carries its class and palette color") {
  std::string dir = tmp_dir("lab_one");
  SemanticCloud cloud;
  cloud.points.push_back({1.5f, -2.5f, 3.0f});
  cloud.fused_class = {2};
  write_labeled_cloud(cloud, dir + "/f.ply");
  PlyCloud raw = read_ply(dir + "/f.ply");
  REQUIRE(raw.points.size() == 1);
  CHECK(raw.has_class);
  CHECK(raw.classes[0] == 2);
  Rgba expected = class_color(2);
  CHECK(raw.points[0].r == expected.r);
  CHECK(raw.points[0].g == expected.g);
  CHECK(raw.points[0].b == expected.b);
}

TEST_CASE("labeled cloud: 10k random points round-trip exactly") {
  std::string dir = tmp_dir("lab_rt");
  std::mt19937 gen(17);
  std::uniform_real_distribution<float> coord(-500.0f, 500.0f);
  SemanticCloud cloud;
  for (int i = 0; i < 10000; ++i) {
    cloud.points.push_back({coord(gen), coord(gen), coord(gen)});
    cloud.fused_class.push_back(static_cast<std::uint8_t>(gen() % 6));
  }
  write_labeled_cloud(cloud, dir + "/f.ply");
  SemanticCloud back = read_labeled_cloud(dir + "/f.ply");
  REQUIRE(back.size() == cloud.size());
  CHECK(back.fused_class == cloud.fused_class);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.points[i].x == cloud.points[i].x);
    CHECK(back.points[i].y == cloud.points[i].y);
    CHECK(back.points[i].z == cloud.points[i].z);
  }
}

TEST_CASE("labeled cloud write requires fused classes") {
  SemanticCloud cloud;
  cloud.points.resize(2);
  CHECK_THROWS_AS(write_labeled_cloud(cloud, "unused.ply"), DebrisError);
}

TEST_CASE("depth map: round trip preserves empty-patch sentinels") {
  std::string dir = tmp_dir("dmap_rt");
  DepthMap dmap;
  dmap.grid_w = 3;
  dmap.grid_h = 2;
  dmap.downsample = 4;
  dmap.values = {1.0f, DepthMap::kEmpty, 2.5f, 0.25f, DepthMap::kEmpty, 9.0f};
  write_depth_map(dmap, dir + "/d.dmap");
  DepthMap back = read_depth_map(dir + "/d.dmap");
  CHECK(back.grid_w == 3);
  CHECK(back.grid_h == 2);
  CHECK(back.downsample == 4);
  REQUIRE(back.values.size() == dmap.values.size());
  for (std::size_t i = 0; i < dmap.values.size(); ++i) {
    if (std::isinf(dmap.values[i]))
      CHECK(std::isinf(back.values[i]));
    else
      CHECK(back.values[i] == dmap.values[i]);
  }
}

TEST_CASE("depth map reader rejects malformed headers") {
  std::string dir = tmp_dir("dmap_bad");
  write_text_file(dir + "/bad.dmap", "JUNKxxxxxxxxxxxxxxxx");
  CHECK_THROWS_WITH_AS(read_depth_map(dir + "/bad.dmap"),
                       doctest::Contains("magic"), DebrisError);
  DepthMap dmap;
  dmap.grid_w = 2;
  dmap.grid_h = 2;
  dmap.downsample = 4;
  dmap.values.assign(4, 1.0f);
  write_depth_map(dmap, dir + "/ok.dmap");
  auto bytes = testutil::read_bytes(dir + "/ok.dmap");
  bytes.resize(bytes.size() - 4);  // drop one float
  std::ofstream f(dir + "/trunc.dmap", std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  f.close();
  CHECK_THROWS_WITH_AS(read_depth_map(dir + "/trunc.dmap"),
                       doctest::Contains("truncated"), DebrisError);
}

TEST_CASE("depth debug PNG maps depths onto 16-bit gray") {
  std::string dir = tmp_dir("dmap_png");
  DepthMap dmap;
  dmap.grid_w = 2;
  dmap.grid_h = 1;
  dmap.downsample = 4;
  dmap.values = {2.0f, DepthMap::kEmpty};
  write_depth_png(dmap, dir + "/d.png");
  Image<std::uint8_t> img = read_png_gray8(dir + "/d.png");
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.at(0, 0) == 255);  // max depth -> full scale (high byte)
  CHECK(img.at(1, 0) == 0);    // empty patch -> 0
}

TEST_CASE("height grid ASC export round-trips values north to south") {
  std::string dir = tmp_dir("asc_rt");
  HeightGrid grid;
  grid.gs = 0.5;
  grid.x0 = -1.25;
  grid.y0 = 3.5;
  grid.cols = 3;
  grid.rows = 2;
  grid.z = {0.0f, 1.5f, 2.0f, 0.25f, 0.0f, 4.0f};
  grid.cell_class = {0, 1, 2, 3, 0, 5};
  grid.point_count = {0, 1, 1, 1, 0, 1};
  write_height_grid(grid, dir + "/h.asc", dir + "/c.asc");
  AscRaster z = read_asc(dir + "/h.asc");
  CHECK(z.cols == 3);
  CHECK(z.rows == 2);
  CHECK(z.x0 == -1.25);
  CHECK(z.y0 == 3.5);
  CHECK(z.cellsize == 0.5);
  // stored row 0 is the northernmost grid row (cy = rows-1)
  CHECK(z.values[0] == 0.25);
  CHECK(z.values[5] == 2.0);
  AscRaster cls = read_asc(dir + "/c.asc");
  CHECK(cls.values[3] == 0.0);
  CHECK(cls.values[5] == 2.0);
}

TEST_CASE("instances CSV lists id, class name and measurements") {
  std::string dir = tmp_dir("inst_csv");
  DebrisInstance inst;
  inst.id = 1;
  inst.class_index = 4;
  inst.volume = 1.25;
  inst.centroid_x = 0.5;
  inst.centroid_y = -0.75;
  inst.area = 2.0;
  std::vector<DebrisInstance> instances{inst};
  write_instances_csv(instances, PipelineConfig::defaults().class_table,
                      dir + "/i.csv");
  CHECK(testutil::read_text(dir + "/i.csv") ==
        "id,class,volume_m3,centroid_x,centroid_y,area_m2\n"
        "1,plywood,1.25,0.5,-0.75,2\n");
}

TEST_CASE("PGM: P5 write/read and P2 read agree") {
  std::string dir = tmp_dir("pgm_rt");
  Image<std::uint8_t> img(3, 2);
  img.pixels = {0, 1, 2, 3, 4, 5};
  write_pgm(img, dir + "/m.pgm");
  Image<std::uint8_t> back = read_pgm(dir + "/m.pgm");
  CHECK(back.pixels == img.pixels);
  write_text_file(dir + "/m2.pgm", "P2\n# comment\n3 2\n255\n0 1 2\n3 4 5\n");
  Image<std::uint8_t> ascii = read_pgm(dir + "/m2.pgm");
  CHECK(ascii.pixels == img.pixels);
}

TEST_CASE("PGM parse errors are structured") {
  std::string dir = tmp_dir("pgm_bad");
  write_text_file(dir + "/a.pgm", "P5\n-3 2\n255\n");
  CHECK_THROWS_AS(read_pgm(dir + "/a.pgm"), DebrisError);
  write_text_file(dir + "/b.pgm", "P2\n2 2\n255\n1 2 3\n");
  CHECK_THROWS_WITH_AS(read_pgm(dir + "/b.pgm"), doctest::Contains("end of"),
                       DebrisError);
  write_text_file(dir + "/c.pgm", "P7\n2 2\n255\n1 2 3 4\n");
  CHECK_THROWS_AS(read_pgm(dir + "/c.pgm"), DebrisError);
}

TEST_CASE("PNG: gray8 write/read round-trips and read_mask dispatches") {
  std::string dir = tmp_dir("png_rt");
  Image<std::uint8_t> img(5, 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(i * 13);
  write_png_gray8(img, dir + "/m.png");
  CHECK(read_png_gray8(dir + "/m.png").pixels == img.pixels);
  CHECK(read_mask(dir + "/m.png").pixels == img.pixels);
  write_pgm(img, dir + "/m.pgm");
  CHECK(read_mask(dir + "/m.pgm").pixels == img.pixels);
  write_text_file(dir + "/m.bin", "\x7f""ELFnot-an-image");
  CHECK_THROWS_AS(read_mask(dir + "/m.bin"), DebrisError);
}

TEST_CASE("PNG reader rejects corrupted files") {
  std::string dir = tmp_dir("png_bad");
  Image<std::uint8_t> img(8, 8, 7);
  write_png_gray8(img, dir + "/ok.png");
  auto bytes = testutil::read_bytes(dir + "/ok.png");
  auto corrupt = bytes;
  corrupt[20] ^= 0xff;  // flip a bit inside IHDR; CRC must catch it
  CHECK_THROWS_AS(read_png_gray8(corrupt, "t"), DebrisError);
  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(read_png_gray8(truncated, "t"), DebrisError);
  CHECK_THROWS_AS(read_png_gray8(std::vector<std::uint8_t>{1, 2, 3}, "t"),
                  DebrisError);
}

TEST_CASE("missing input files map to MalformedFile") {
  for (auto fn : {+[] { parse_cameras("no_such_file.txt"); },
                  +[] { (void)read_ply("no_such_file.ply"); },
                  +[] { (void)read_mask("no_such_file.png"); },
                  +[] { (void)read_depth_map("no_such_file.dmap"); }}) {
    try {
      fn();
      FAIL("expected MalformedFile");
    } catch (const DebrisError& e) {
      CHECK(e.kind() == ErrorKind::MalformedFile);
      CHECK(e.exit_code() == 2);
    }
  }
}

TEST_CASE("parser fuzz smoke: mutated inputs fail cleanly") {
  std::string dir = tmp_dir("fuzz_smoke");
  std::string cam_seed(kIdentityCam);
  std::vector<CloudPoint> pts(5);
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = {static_cast<float>(i), 1.0f, 2.0f};
  write_ply(pts, false, dir + "/seed.ply");
  std::string ply_seed = testutil::read_text(dir + "/seed.ply");
  write_png_gray8(Image<std::uint8_t>(6, 5, 1), dir + "/seed.png");
  std::string png_seed = testutil::read_text(dir + "/seed.png");

  std::mt19937 gen(1234);
  auto mutate = [&](std::string s) {
    int edits = 1 + int(gen() % 6);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      switch (gen() % 4) {
        case 0: s[gen() % s.size()] = static_cast<char>(gen()); break;
        case 1: s.insert(s.begin() + gen() % s.size(), static_cast<char>(gen())); break;
        case 2: s.erase(s.begin() + gen() % s.size()); break;
        default: s.resize(gen() % (s.size() + 1)); break;
      }
    }
    return s;
  };

  for (int i = 0; i < 300; ++i) {
    std::istringstream cams(mutate(cam_seed));
    try {
      parse_cameras(cams, "fuzz");
    } catch (const DebrisError&) {
    }
    std::istringstream ply(mutate(ply_seed));
    try {
      read_ply(ply, "fuzz");
    } catch (const DebrisError&) {
    }
    std::string png = mutate(png_seed);
    try {
      read_png_gray8(std::vector<std::uint8_t>(png.begin(), png.end()), "fuzz");
    } catch (const DebrisError&) {
    }
  }
}
