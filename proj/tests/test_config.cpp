#include <cmath>
#include <stdexcept>
#include <string>

#include "affdim/config.hpp"
#include "doctest.h"

using namespace affdim;

namespace {

bool names_key(const std::vector<ConfigViolation>& v, const std::string& key) {
  for (const auto& x : v) {
    if (x.key == key) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config text round trips every key") {
  RunConfig c;
  c.n = 3;
  c.k = 2;
  c.alpha = 0.1 + 0.2;  // not exactly representable as a short decimal
  c.s = std::log(2.0) / std::log(3.0);
  c.seed = 18446744073709551615ULL;
  c.grid_res = 1.0 / 3.0;
  c.output_root = "/tmp/somewhere";
  const RunConfig back = parse_config_text(config_to_text(c));
  for (const auto& key : config_keys()) CHECK_MESSAGE(config_value(back, key) == config_value(c, key), key);
  CHECK(back.alpha == c.alpha);
  CHECK(back.s == c.s);
  CHECK(back.seed == c.seed);
  CHECK(config_to_text(back) == config_to_text(c));
}

TEST_CASE("config parsing skips comments and reports line numbers") {
  const RunConfig c = parse_config_text("# comment\n\n  n = 3 \nk=2\r\n", RunConfig{});
  CHECK(c.n == 3);
  CHECK(c.k == 2);
  CHECK(c.s == 1.0);

  auto message = [](const char* text) {
    try {
      parse_config_text(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("n = 2\nbogus = 1\n").find("line 2") != std::string::npos);
  CHECK(message("n = 2\nbogus = 1\n").find("bogus") != std::string::npos);
  CHECK(message("n = two\n").find("line 1") != std::string::npos);
  CHECK(message("no equals sign\n").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_config_text("samples = -4\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("alpha = 1.5x\n"), std::invalid_argument);
}

TEST_CASE("config parsing starts from the given base") {
  RunConfig base;
  base.depth = 11;
  const RunConfig c = parse_config_text("n = 3\n", base);
  CHECK(c.depth == 11);
  CHECK(c.n == 3);
}

TEST_CASE("config hash ignores output_root only") {
  RunConfig a;
  RunConfig b;
  b.output_root = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  RunConfig c;
  c.delta0 = std::nextafter(c.delta0, 1.0);
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("validate_config names the offending key") {
  CHECK(validate_config(RunConfig{}).empty());

  RunConfig c;
  c.s = 1.5;
  CHECK(names_key(validate_config(c), "s"));

  c = RunConfig{};
  c.k = 2;  // k must be below n
  CHECK(names_key(validate_config(c), "k"));

  c = RunConfig{};
  c.alpha = 2.0;  // above k
  CHECK(names_key(validate_config(c), "alpha"));

  c = RunConfig{};
  c.delta_level_min = 8;
  c.delta_level_max = 6;
  CHECK_FALSE(validate_config(c).empty());

  c = RunConfig{};
  c.grid_res = 0.01;  // coarser than delta_min / 4 = 2^-9
  CHECK(names_key(validate_config(c), "grid_res"));

  c = RunConfig{};
  c.samples = 0;
  CHECK(names_key(validate_config(c), "samples"));

  c = RunConfig{};
  c.epsilon = 0.0;
  CHECK(names_key(validate_config(c), "epsilon"));
}

TEST_CASE("config deltas and grid") {
  RunConfig c;
  const auto d = config_deltas(c);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == 0.03125);
  CHECK(d[2] == 0.0078125);
  CHECK(grid_for(c, 0.25) == 0.0625);
  c.grid_res = 0.001;
  CHECK(grid_for(c, 0.25) == 0.001);
}
