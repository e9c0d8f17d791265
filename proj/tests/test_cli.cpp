#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "debris/scene_io.hpp"
#include "debris/synth.hpp"
#include "fixtures.hpp"

#ifdef DEBRIS_TWIN_BIN

using namespace debris;
namespace fs = std::filesystem;

namespace {

/// Small end-to-end fixture: floor plus a unit box, four low-res cameras.
std::string make_fixture(const std::string& name) {
  SceneSpec spec = testutil::unit_box_spec(4, 11);
  spec.density = 600.0;
  spec.ring.count = 4;
  spec.ring.image_width = 160;
  spec.ring.image_height = 120;
  spec.ring.focal = 130.0;
  std::string dir = testutil::tmp_dir(name);
  write_fixture(generate(spec), spec, dir);
  return dir;
}

std::string config_of(const std::string& fixture_dir) {
  return fixture_dir + "/config.toml";
}

nlohmann::json timings_of(const std::string& stdout_text) {
  std::istringstream in(stdout_text);
  std::string first;
  std::getline(in, first);
  return nlohmann::json::parse(first);
}

}  // namespace

TEST_CASE("cli: 'all' runs end to end and writes every artifact") {
  std::string dir = make_fixture("cli_all");
  std::string out = dir + "/out_all";
  auto r = testutil::run_cli("--config " + config_of(dir) + " --out " + out +
                                 " all",
                             dir + "/scratch");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  auto timings = timings_of(r.out);
  REQUIRE(timings.size() == 3);
  CHECK(timings[0]["stage"] == "depth");
  CHECK(timings[1]["stage"] == "fuse");
  CHECK(timings[2]["stage"] == "risk");
  for (const auto& t : timings) CHECK(t["seconds"].get<double>() >= 0.0);
  CHECK(r.out.find(out) != std::string::npos);

  for (int i = 0; i < 4; ++i) {
    CHECK(fs::exists(out + "/depth/cam" + std::to_string(i) + ".dmap"));
    CHECK(fs::exists(out + "/depth/cam" + std::to_string(i) + ".png"));
  }
  for (auto name : {"fused.ply", "class_counts.csv", "height.asc",
                    "height_class.asc", "instances.csv", "summary.json"})
    CHECK(fs::exists(fs::path(out) / name));
  for (int cat = 1; cat <= 5; ++cat) {
    CHECK(fs::exists(out + "/risk_cat" + std::to_string(cat) + ".png"));
    CHECK(fs::exists(out + "/flagged_cat" + std::to_string(cat) + ".csv"));
  }

  // sanity on the fused result: the box dominates the instance list
  std::string summary = testutil::read_text(out + "/summary.json");
  auto j = nlohmann::json::parse(summary);
  CHECK(j["units"] == "m");
  CHECK(!j.contains("units_warning"));
  CHECK(j["site_volume_m3"].get<double>() > 0.5);
  REQUIRE(!j["instances"].empty());
  CHECK(j["instances"][0]["class"] == "plywood");
}

TEST_CASE("cli: depth + fuse + risk compose to exactly the 'all' output") {
  std::string dir = make_fixture("cli_stages");
  std::string out_a = dir + "/out_a";
  std::string out_b = dir + "/out_b";
  std::string base = "--config " + config_of(dir);
  REQUIRE(testutil::run_cli(base + " --out " + out_a + " all", dir + "/s1")
              .exit_code == 0);
  for (const char* stage : {"depth", "fuse", "risk"})
    REQUIRE(testutil::run_cli(base + " --out " + out_b + " " + stage,
                              dir + "/s2")
                .exit_code == 0);
  CHECK(testutil::dir_snapshot(out_a) == testutil::dir_snapshot(out_b));
}

TEST_CASE("cli: reruns and thread counts are byte-identical") {
  std::string dir = make_fixture("cli_det");
  std::string base = "--config " + config_of(dir);
  auto run = [&](const std::string& out, int threads) {
    REQUIRE(testutil::run_cli(base + " --out " + out + " --threads " +
                                  std::to_string(threads) + " all",
                              dir + "/scratch")
                .exit_code == 0);
    return testutil::dir_snapshot(out);
  };
  auto t1_first = run(dir + "/o_t1a", 1);
  auto t1_second = run(dir + "/o_t1b", 1);
  auto t8 = run(dir + "/o_t8", 8);
  CHECK(t1_first == t1_second);
  CHECK(t1_first == t8);
}

TEST_CASE("cli: missing inputs produce structured errors and exit codes") {
  std::string dir = testutil::tmp_dir("cli_missing");
  {
    std::ofstream f(dir + "/config.toml");
    f << "cameras = \"nope.txt\"\ncloud = \"nope.ply\"\nmasks = \"masks\"\n";
  }
  auto r = testutil::run_cli("--config " + dir + "/config.toml all",
                             dir + "/scratch");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error [MalformedFile]") != std::string::npos);
}

TEST_CASE("cli: an invalid config key exits with the config error code") {
  std::string dir = testutil::tmp_dir("cli_badcfg");
  {
    std::ofstream f(dir + "/config.toml");
    f << "definitely_not_a_key = 1\n";
  }
  auto r = testutil::run_cli("--config " + dir + "/config.toml all",
                             dir + "/scratch");
  CHECK(r.exit_code == 10);
  CHECK(r.err.find("error [InvalidConfig]") != std::string::npos);
  CHECK(r.err.find("definitely_not_a_key") != std::string::npos);
}

TEST_CASE("cli: risk before fuse reports the missing fused cloud") {
  std::string dir = make_fixture("cli_order");
  auto r = testutil::run_cli("--config " + config_of(dir) + " --out " + dir +
                                 "/fresh risk",
                             dir + "/scratch");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("MalformedFile") != std::string::npos);
}

TEST_CASE("cli: usage errors come from the argument parser, not a crash") {
  std::string dir = testutil::tmp_dir("cli_usage");
  CHECK(testutil::run_cli("", dir + "/s1").exit_code != 0);
  CHECK(testutil::run_cli("all", dir + "/s2").exit_code != 0);  // no --config
  CHECK(testutil::run_cli("--config x.toml frobnicate", dir + "/s3").exit_code !=
        0);
}

TEST_CASE("cli: all-background masks fuse to an unlabeled cloud") {
  SceneSpec spec;
  spec.seed = 9;
  spec.ground_half_extent = 2.0;
  spec.density = 400.0;
  spec.ring.count = 3;
  spec.ring.image_width = 160;
  spec.ring.image_height = 120;
  spec.ring.focal = 130.0;
  std::string dir = testutil::tmp_dir("cli_bg");
  write_fixture(generate(spec), spec, dir);
  std::string out = dir + "/out";
  std::string base = "--config " + config_of(dir) + " --out " + out;
  REQUIRE(testutil::run_cli(base + " depth", dir + "/s").exit_code == 0);
  REQUIRE(testutil::run_cli(base + " fuse", dir + "/s").exit_code == 0);
  std::string counts = testutil::read_text(out + "/class_counts.csv");
  std::istringstream in(counts);
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,points");
  std::getline(in, line);
  CHECK(line.rfind("background,", 0) == 0);
  CHECK(line != "background,0");
  while (std::getline(in, line))
    if (!line.empty()) CHECK(line.substr(line.find(',') + 1) == "0");
}

TEST_CASE("cli: risk_threshold populates flagged CSVs, non-meter units warn") {
  std::string dir = make_fixture("cli_flagged");
  // rewrite the config with a tiny threshold and odd units
  {
    std::ofstream f(dir + "/config.toml");
    f << "cameras = \"cameras.txt\"\ncloud = \"cloud.ply\"\nmasks = \"masks\"\n"
      << "outdir = \"out\"\nrisk_threshold = 1\nunits = \"survey_ft\"\n";
  }
  auto r = testutil::run_cli("--config " + config_of(dir) + " all",
                             dir + "/scratch");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  std::string flagged = testutil::read_text(dir + "/out/flagged_cat5.csv");
  CHECK(flagged.find("col,row,class,ke_joules\n") == 0);
  CHECK(std::count(flagged.begin(), flagged.end(), '\n') > 1);
  auto j = nlohmann::json::parse(testutil::read_text(dir + "/out/summary.json"));
  CHECK(j["units"] == "survey_ft");
  CHECK(j.contains("units_warning"));
}

#endif  // DEBRIS_TWIN_BIN
