#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "affdim/experiments.hpp"
#include "doctest.h"

using namespace affdim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the system temp dir.
fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("affdim-test-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("format_number is shortest round trip") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-5) == "1e-05");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("series csv layout") {
  const Series s{"t", {"a", "b"}, {{1.0, 0.25}, {2.0, 1.0 / 3.0}}};
  const std::string text = series_csv(s);
  CHECK(text.rfind("a,b\n1,0.25\n2,", 0) == 0);
  CHECK(text.back() == '\n');
  CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("cloud csv round trip") {
  PointCloud c;
  c.n = 2;
  const double a[2] = {0.1, -0.25};
  const double b[2] = {1.0 / 3.0, 2.0};
  c.push(a);
  c.push(b);
  c.gen_scale = 0.5;
  const PointCloud back = parse_cloud_csv(cloud_csv(c), 0.5);
  CHECK(back.n == 2);
  CHECK(back.coords == c.coords);
  CHECK(cloud_csv(c).rfind("x0,x1\n", 0) == 0);

  CHECK_THROWS_AS(parse_cloud_csv("x0,x1\n1,2\n3\n", 0.1), std::invalid_argument);
  CHECK_THROWS_AS(parse_cloud_csv("x0\n", 0.1), std::invalid_argument);
  CHECK_THROWS_AS(parse_cloud_csv("1,2\nfoo,3\n", 0.1), std::invalid_argument);
  // Without gen_scale the median spacing is used.
  CHECK(parse_cloud_csv("0\n0.25\n0.5\n", 0.0).gen_scale == doctest::Approx(0.25));
}

TEST_CASE("unknown experiments and bad configs are rejected") {
  CHECK_THROWS_AS(run_experiment("nope", RunConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(experiment_violations("nope", RunConfig{}), std::invalid_argument);
  RunConfig c;
  c.s = 2.0;
  CHECK_THROWS_AS(run_experiment("sharpness", c), std::invalid_argument);
  RunConfig l2;
  l2.delta_level_min = 3;  // 2^-3 > delta0
  CHECK_FALSE(experiment_violations("l2-suite", l2).empty());
  CHECK(experiment_violations("sharpness", l2).empty());
}

TEST_CASE("write_new_file refuses to overwrite") {
  const fs::path dir = scratch("newfile");
  write_new_file(dir / "a.txt", "one");
  CHECK(slurp(dir / "a.txt") == "one");
  CHECK_THROWS(write_new_file(dir / "a.txt", "two"));
  CHECK(slurp(dir / "a.txt") == "one");
  fs::remove_all(dir);
}

TEST_CASE("runs are append only with a manifest") {
  const fs::path root = scratch("runs");
  RunConfig c;
  c.n = 2;
  c.k = 1;
  c.s = 0.5;
  c.depth = 5;
  c.output_root = root.string();
  const ExperimentResult r = run_experiment("sharpness", c);

  const fs::path first = write_run(r, c);
  const fs::path second = write_run(r, c);
  CHECK(first.filename() == "run-0001");
  CHECK(second.filename() == "run-0002");
  CHECK(first.parent_path() == root / "sharpness");
  CHECK(slurp(first / "report.json") == slurp(second / "report.json"));
  CHECK(slurp(first / "report.json") == report_text(r, c));
  CHECK(parse_config_text(slurp(first / "config.txt")).depth == 5);

  const Json manifest = Json::parse(slurp(first / "manifest.json"));
  CHECK(manifest["experiment"] == "sharpness");
  CHECK(manifest["config_hash"] == config_hash(c));
  REQUIRE(manifest["files"].size() >= 2);
  for (const auto& f : manifest["files"]) {
    const std::string bytes = slurp(first / f["file"].get<std::string>());
    CHECK(f["bytes"].get<std::size_t>() == bytes.size());
  }
  fs::remove_all(root);
}

TEST_CASE("report layout is stable and omits the output root") {
  RunConfig c;
  c.s = 0.5;
  c.depth = 5;
  const ExperimentResult r = run_experiment("sharpness", c);
  const Json j = report_json(r, c);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  REQUIRE(keys.size() >= 5);
  CHECK(keys.front() == "experiment");
  CHECK(keys.back() == "passed");
  CHECK_FALSE(j["config"].contains("output_root"));
  RunConfig moved = c;
  moved.output_root = "/elsewhere";
  CHECK(report_text(r, moved) == report_text(r, c));
}
