#include <algorithm>

#include "calibra/config.hpp"
#include "calibra/errors.hpp"
#include "doctest.h"

using namespace calibra;
using json = nlohmann::json;

namespace {

bool has_error(const std::vector<std::string>& errors, const std::string& text) {
  return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e == text; });
}

}  // namespace

TEST_CASE("every preset validates and round-trips") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const RunConfig c = preset_config(name);
    const json doc = c.to_json();
    CHECK(validate_config(doc).empty());
    const RunConfig back = parse_config(doc);
    CHECK(back.to_json() == doc);
    CHECK_NOTHROW(c.offline.validate());
    CHECK_NOTHROW(make_solver(c).validate());
  }
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("unknown keys are named by their full path") {
  json doc = preset_config("dmr").to_json();
  doc["calibration"]["detfloor"] = 1e-3;
  doc["extra"] = 1;
  const auto errors = validate_config(doc);
  CHECK(has_error(errors, "calibration.detfloor: unknown key"));
  CHECK(has_error(errors, "extra: unknown key"));
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("range and type errors") {
  json doc = preset_config("sod").to_json();
  doc["calibration"]["delta"] = -1.0;
  CHECK(has_error(validate_config(doc), "calibration.delta: must be >= 0"));
  doc["fom"]["cells"] = "many";
  CHECK(has_error(validate_config(doc), "fom.cells: wrong type"));

  json comps = preset_config("sod").to_json();
  comps["reduction"]["components"] = json::array({"rho", "mx"});
  CHECK_FALSE(validate_config(comps).empty());
}

TEST_CASE("partial documents layer over a preset") {
  const json doc{{"preset", "sod"}, {"seed", 9}, {"calibration", {{"delta", 0.5}}}};
  const RunConfig c = parse_config(doc);
  CHECK(c.offline.calibration.delta == 0.5);
  CHECK(c.seed == 9u);
  CHECK(c.offline.calibration.seed == 9u);
  CHECK(c.offline.calibration_net.seed == 9u);
  CHECK(c.fom.cells == preset_config("sod").fom.cells);
}

TEST_CASE("grid overrides") {
  RunConfig c = preset_config("dmr");
  apply_grid(c, "80x20");
  CHECK(make_problem(c, {}).grid.cells(0) == 80);
  CHECK(make_problem(c, {}).grid.cells(1) == 20);
  CHECK_THROWS_AS(apply_grid(c, "80"), ConfigError);
  RunConfig s = preset_config("sod");
  apply_grid(s, "300");
  CHECK(make_problem(s, {}).grid.cells(0) == 300);
}

TEST_CASE("parameter sampling is seeded") {
  RunConfig c = preset_config("sod-param");
  const auto a = sample_parameters(c), b = sample_parameters(c);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() == static_cast<std::size_t>(c.parameters.train));
  for (const auto& mu : a.train)
    for (std::size_t k = 0; k < mu.size(); ++k) {
      CHECK(mu[k] >= c.parameters.ranges[k].lo);
      CHECK(mu[k] <= c.parameters.ranges[k].hi);
    }
  c.seed = 1;
  CHECK(sample_parameters(c).train != a.train);
  const auto single = sample_parameters(preset_config("sod"));
  CHECK(single.train.size() == 1u);
  CHECK(single.train.front().empty());
}

TEST_CASE("window times") {
  const auto t = window_times({0.01, 0.16, 25});
  REQUIRE(t.size() == 25u);
  CHECK(t.front() == 0.01);
  CHECK(t.back() == 0.16);
  CHECK(t[12] == doctest::Approx(0.085));
  CHECK(window_times({0.0, 0.2, 1}) == std::vector<double>{0.2});
}
