#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kExe = MVSKIT_PATH;
const std::string kConfigs = MVS_CONFIG_DIR;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + kExe + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("plane scene end to end reaches 90% under 2 mm after refinement") {
  const auto dir = testutil::scratch_dir("cli_plane");
  const auto log = dir / "log.txt";
  const std::string common = " --config \"" + kConfigs + "/plane.cfg\" --out \"" + dir.string() + "\"";
  REQUIRE(run("gen-scene" + common, log) == 0);
  CHECK(fs::exists(dir / "cameras.txt"));
  CHECK(fs::exists(dir / "image_000.ppm"));
  CHECK(fs::exists(dir / "depth_gt_001.pfm"));
  CHECK(slurp(dir / "effective.cfg").find("# substituted") != std::string::npos);

  REQUIRE(run("depth" + common, log) == 0);
  CHECK(fs::exists(dir / "prob_000.pfm"));
  REQUIRE(run("refine-gd" + common, log) == 0);
  const auto trace = load_json(dir / "refine_gd_000.json").at("trace");
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].get<double>() <= trace[i - 1].get<double>());

  REQUIRE(run("eval" + common + " --depth \"" + (dir / "depth_gd_000.pfm").string() + "\"", log) == 0);
  const auto eval = load_json(dir / "eval.json");
  CHECK(eval.at("depth").at("percentages").at(0).get<double>() >= 90.0);
}

TEST_CASE("loss report at ground truth is near zero") {
  const auto dir = testutil::scratch_dir("cli_loss");
  const auto log = dir / "log.txt";
  const std::string common = " --config \"" + kConfigs + "/plane.cfg\" --out \"" + dir.string() + "\"";
  REQUIRE(run("gen-scene" + common, log) == 0);
  REQUIRE(run("loss-report" + common + " --depth \"" + (dir / "depth_gt_000.pfm").string() + "\"", log) == 0);
  const auto j = load_json(dir / "loss_000.json");
  CHECK(j.at("total").get<double>() < 1e-3);
  CHECK(j.at("valid_pixels").get<long>() > 0);
}

TEST_CASE("fuse and cloud evaluation") {
  const auto dir = testutil::scratch_dir("cli_fuse");
  const auto log = dir / "log.txt";
  const std::string common = " --config \"" + kConfigs + "/plane.cfg\" --out \"" + dir.string() + "\"";
  REQUIRE(run("gen-scene" + common, log) == 0);
  REQUIRE(run("fuse --prefix depth_gt" + common, log) == 0);
  CHECK(slurp(log).find("skipping the photometric filter") != std::string::npos);
  const auto fusion = load_json(dir / "fusion.json");
  CHECK(fusion.at("points").get<long>() > 0);
  REQUIRE(run("eval" + common + " --cloud \"" + (dir / "fused.ply").string() + "\"", log) == 0);
  const auto eval = load_json(dir / "eval.json");
  // Group means sit between lattice samples, so allow one pixel footprint.
  CHECK(eval.at("cloud").at("accuracy_mm").get<double>() < 600.0 / 80);
}

TEST_CASE("gradcheck passes") {
  const auto dir = testutil::scratch_dir("cli_gradcheck");
  CHECK(run("gradcheck --seed 3 --out \"" + dir.string() + "\"", dir / "log.txt") == 0);
  CHECK(load_json(dir / "gradcheck.json").at("pass").get<bool>());
}

TEST_CASE("errors exit nonzero with a message naming the field") {
  const auto dir = testutil::scratch_dir("cli_errors");
  const auto log = dir / "log.txt";
  std::ofstream(dir / "bad.cfg") << "[loss]\nlambda9 = 1\n";
  CHECK(run("gen-scene --config \"" + (dir / "bad.cfg").string() + "\" --out \"" + dir.string() + "\"", log) != 0);
  CHECK(slurp(log).find("lambda9: unknown key") != std::string::npos);

  CHECK(run("depth --out \"" + dir.string() + "\"", log) != 0);
  CHECK(slurp(log).find("cameras.txt") != std::string::npos);

  CHECK(run("gen-scene --config /nonexistent.cfg", log) != 0);
  CHECK(run("frobnicate", log) != 0);
  CHECK(run("gradcheck --threads 0", log) != 0);
}

TEST_CASE("unlisted views are rejected") {
  const auto dir = testutil::scratch_dir("cli_views");
  const auto log = dir / "log.txt";
  const std::string common = " --config \"" + kConfigs + "/plane.cfg\" --out \"" + dir.string() + "\"";
  REQUIRE(run("gen-scene" + common, log) == 0);
  CHECK(run("depth --views 0,7" + common, log) != 0);
  CHECK(slurp(log).find("--views") != std::string::npos);
}
