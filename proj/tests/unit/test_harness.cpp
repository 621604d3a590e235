#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "graspdp/harness.hpp"
#include "graspdp/model_io.hpp"

using namespace graspdp;

namespace {

RunRecord record(std::string suite, std::string trajectory, std::string condition, double ret, double seconds) {
  RunRecord r;
  r.suite = std::move(suite);
  r.trajectory = std::move(trajectory);
  r.condition = std::move(condition);
  r.ret = ret;
  r.hold_cost = -ret / 10.0;
  r.terminated = ret <= -1000.0;
  r.grasps = {0, 5, 5, 288};
  r.seconds = seconds;
  r.repeats = 3;
  return r;
}

}  // namespace

TEST_CASE("standard suites") {
  ExperimentConfig cfg;
  cfg.conditions = standard_conditions();
  const TrajectorySuites s = make_trajectory_suite(cfg, default_tool());
  REQUIRE(s.training.size() == 9);
  REQUIRE(s.eval_height.size() == 7);
  REQUIRE(s.eval_mass_com.size() == 20);
  CHECK(s.training[0].episode->name == "nominal_tq+");
  CHECK(s.training[1].episode->name == "nominal_tq-");
  CHECK(&s.by_name(kHeightSuite) == &s.eval_height);
  CHECK_THROWS_AS(s.by_name("nope"), std::invalid_argument);

  std::set<std::string> names;
  for (const auto* suite : {&s.training, &s.eval_height, &s.eval_mass_com}) {
    for (const TrajectoryCase& c : *suite) CHECK(names.insert(c.episode->name).second);
  }
  // Training torque follows the height sign; evaluation uses the opposite sign.
  for (std::size_t i = 2; i < s.training.size(); ++i) {
    const double h = cfg.training_heights_mm[i - 2];
    CHECK(std::signbit(s.training[i].episode->external_wrench[5]) == std::signbit(h));
  }
  for (std::size_t i = 0; i < s.eval_height.size(); ++i) {
    const double h = cfg.eval_heights_mm[i];
    CHECK(std::signbit(s.eval_height[i].episode->external_wrench[5]) != std::signbit(h));
    const double z0 = s.eval_height[i].episode->waypoints.front().tool.position.z();
    CHECK(z0 == doctest::Approx(0.014 + h / 1000.0));
  }
  for (const TrajectoryCase& c : s.eval_mass_com) {
    CHECK(c.episode->external_wrench[5] == 1.0);
    CHECK(c.suite == kMassComSuite);
  }
}

TEST_CASE("confidence half-width") {
  CHECK_FALSE(ci_half_width({}).has_value());
  CHECK_FALSE(ci_half_width({3.0}).has_value());
  CHECK(*ci_half_width({0.0, 2.0}) == doctest::Approx(1.96));
  CHECK(*ci_half_width({4.0, 4.0, 4.0}) == 0.0);
  // Sample standard deviation of {1, 2, 3, 4} is sqrt(5/3).
  CHECK(*ci_half_width({1, 2, 3, 4}) == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("config parsing and validation") {
  const ExperimentConfig defaults = ExperimentConfig::from_json("{}");
  CHECK(defaults.seed == 7);
  CHECK(defaults.conditions.size() == 5);
  CHECK(defaults.suites.size() == 2);

  const ExperimentConfig full = load_experiment_config(std::filesystem::path(GRASPDP_SOURCE_DIR) / "data/experiment.json");
  CHECK(full.conditions.size() == 5);
  CHECK(full.conditions[4].kind == ConditionKind::Lookahead);
  CHECK(full.conditions[4].depth == 2);
  CHECK(full.training.skip_doomed);
  CHECK(full.output_dir.is_absolute() == std::filesystem::path(GRASPDP_SOURCE_DIR).is_absolute());

  const ExperimentConfig round = ExperimentConfig::from_json(full.to_json());
  CHECK(round.to_json() == full.to_json());

  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"sede\": 3}"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"env\": {\"rmin\": 1}}"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"seed\": \"seven\"}"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"suites\": [\"eval-weather\"]}"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"variations\": {\"eval_heights_mm\": [0, 2]}}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"conditions\": [{\"name\": \"x\", \"kind\": \"oracle\"}]}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("[1, 2"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{\"hand\": 3}"), std::invalid_argument);
  CHECK(ExperimentConfig::from_json("{\"tool\": \"t.json\"}", "/cfg").tool_path == std::filesystem::path("/cfg/t.json"));

  ExperimentConfig cfg;
  cfg.conditions = standard_conditions();
  CHECK_NOTHROW(cfg.validate());
  cfg.conditions.push_back(cfg.conditions[0]);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.conditions = standard_conditions();
  cfg.repeats = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.repeats = 1;
  cfg.mass_scales = {1.0, -1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("results CSV round-trip") {
  std::vector<RunRecord> in{record("eval-height", "h-2mm_tq+", "L1", -1.25, 0.5),
                            record("eval-height", "h-2mm_tq+", "base-policy", -1000.0625, 0.01),
                            record("eval-mass-com", "m1_com+0cm", "L1", -3.0 / 7.0, 0.25)};
  const auto out = parse_results_csv(results_csv(in), timing_csv(in));
  REQUIRE(out.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out[i].suite == in[i].suite);
    CHECK(out[i].trajectory == in[i].trajectory);
    CHECK(out[i].condition == in[i].condition);
    CHECK(out[i].ret == in[i].ret);
    CHECK(out[i].hold_cost == in[i].hold_cost);
    CHECK(out[i].terminated == in[i].terminated);
    CHECK(out[i].grasps == in[i].grasps);
    CHECK(out[i].seconds == in[i].seconds);
  }
  CHECK_THROWS_AS(parse_results_csv("not,a,results,file\n"), std::invalid_argument);
}

TEST_CASE("plot data summaries and warnings") {
  std::vector<RunRecord> rs;
  for (int i = 0; i < 4; ++i) {
    const std::string tr = "t" + std::to_string(i);
    rs.push_back(record("eval-height", tr, "dp-optimal", -1.0, 2.0));
    rs.push_back(record("eval-height", tr, "L1", -1.0 - i, 0.5));
    if (i < 2) rs.push_back(record("eval-mass-com", tr, "dp-optimal", -2.0, 1.0));
  }
  const PlotData p = emit_plot_data(rs);
  for (const char* f : {"summary.csv", "fig_return_eval-height.csv", "fig_return_gap_eval-height.csv",
                        "fig_hold_eval-height.csv", "fig_timing.csv"}) {
    CHECK(p.files.count(f) == 1);
  }
  REQUIRE(p.warnings.size() == 1);
  CHECK(p.warnings[0] == "condition L1 has no rows in suite eval-mass-com");
  CHECK(p.files.at("summary.csv").find("eval-height,L1,4,-2.5,") != std::string::npos);
  // L1 trails dp-optimal by 0, 1, 2, 3 on the four trajectories.
  CHECK(p.files.at("fig_return_gap_eval-height.csv").find("L1,-1.5,") != std::string::npos);
}

TEST_CASE("training metrics CSV") {
  std::vector<EpochMetrics> h{{1, 0.5, 0.25, 0.1, std::nullopt, std::nullopt}, {2, 0.4, 0.5, 0.05, 0.75, 0.2}};
  const std::string csv = training_metrics_csv(h);
  CHECK(csv.find("epoch") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 3);
}
