#include <stdexcept>

#include "doctest.h"
#include "vbmi/config.hpp"

using vbmi::Config;

TEST_SUITE("config") {

TEST_CASE("parses keys, quotes, comments, and blank lines") {
  const auto cfg = Config::parse_string(
      "# session defaults\n"
      "\n"
      "name = \"subject 01\"   # trailing comment\n"
      "snr_db = -8.5\n"
      "reps=3\n"
      "  use_cache = true\n"
      "weights = 1.0, 0.25, 0.5\n");
  CHECK(cfg.get_string("name") == "subject 01");
  CHECK(cfg.get_double("snr_db", 0.0) == doctest::Approx(-8.5));
  CHECK(cfg.get_int("reps", 0) == 3);
  CHECK(cfg.get_bool("use_cache", false));
  const auto w = cfg.get_doubles("weights");
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(0.25));
  CHECK(w[2] == doctest::Approx(0.5));
}

TEST_CASE("missing keys fall back or throw") {
  const auto cfg = Config::parse_string("a = 1\n");
  CHECK(cfg.get_double("missing", 7.5) == doctest::Approx(7.5));
  CHECK(cfg.get_string("missing", "dflt") == "dflt");
  CHECK_THROWS_AS((void)cfg.get_string("missing"), std::out_of_range);
  CHECK_FALSE(cfg.has("missing"));
  CHECK(cfg.has("a"));
}

TEST_CASE("malformed numerics are rejected") {
  const auto cfg = Config::parse_string("x = abc\n");
  CHECK_THROWS_AS((void)cfg.get_double("x", 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)cfg.get_int("x", 0), std::invalid_argument);
}

TEST_CASE("later assignments win") {
  const auto cfg = Config::parse_string("k = 1\nk = 2\n");
  CHECK(cfg.get_int("k", 0) == 2);
}

TEST_CASE("set overrides parsed values") {
  auto cfg = Config::parse_string("k = 1\n");
  cfg.set("k", "5");
  CHECK(cfg.get_int("k", 0) == 5);
}

TEST_CASE("missing file errors out") {
  CHECK_THROWS_AS((void)Config::parse_file("/nonexistent/path.conf"), std::runtime_error);
}

}  // TEST_SUITE
