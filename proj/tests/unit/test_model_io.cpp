#include <doctest.h>

#include <filesystem>

#include "graspdp/model_io.hpp"
#include "graspdp/trajectory.hpp"

using namespace graspdp;

TEST_CASE("hand JSON round-trip") {
  const HandModel hand = default_hand();
  const std::string text = hand_to_json(hand);
  const HandModel back = hand_from_json(text);
  CHECK(hand_to_json(back) == text);
  CHECK(back.catalog_sizes() == hand.catalog_sizes());
  CHECK(back.joint_count() == hand.joint_count());
  const Eigen::VectorXd q = back.mid_range();
  const auto a = forward_kinematics(hand, Pose{}, q), b = forward_kinematics(back, Pose{}, q);
  for (std::size_t i = 0; i < hand.link_count(); ++i) {
    CHECK((a.point(i, Vec3(0.01, 0, 0)) - b.point(i, Vec3(0.01, 0, 0))).norm() == 0.0);
  }
}

TEST_CASE("tool and episode JSON round-trip") {
  const ToolModel tool = default_tool();
  const std::string t = tool_to_json(tool);
  CHECK(tool_to_json(tool_from_json(t)) == t);
  CHECK(tool_from_json(t).mass == tool.mass);

  const EpisodeInput e = make_episode(TrajectoryParams{}, tool, "nominal");
  const std::string j = episode_to_json(e);
  const EpisodeInput back = episode_from_json(j);
  CHECK(episode_to_json(back) == j);
  CHECK(back.horizon == e.horizon);
  CHECK(back.waypoints.back().tool.position == e.waypoints.back().tool.position);
}

TEST_CASE("malformed model documents are rejected") {
  CHECK_THROWS_AS(hand_from_json("{"), std::invalid_argument);
  CHECK_THROWS_AS(hand_from_json("{\"fingers\": 3}"), std::invalid_argument);
  CHECK_THROWS_AS(tool_from_json("{\"mass\": -1}"), std::invalid_argument);
  CHECK_THROWS_AS(episode_from_json("[]"), std::invalid_argument);
}

TEST_CASE("text file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "graspdp_io_test";
  std::filesystem::remove_all(dir);
  write_text_file(dir / "nested" / "a.txt", "hello\n");
  CHECK(read_text_file(dir / "nested" / "a.txt") == "hello\n");
  CHECK_THROWS(read_text_file(dir / "missing.txt"));
  std::filesystem::remove_all(dir);
}
