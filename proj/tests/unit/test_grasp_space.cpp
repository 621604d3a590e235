#include <doctest.h>

#include <set>

#include "graspdp/grasp_space.hpp"
#include "graspdp/model_io.hpp"

using namespace graspdp;

TEST_CASE("all-assigned counts for catalogs (3,3,2,4,2,2)") {
  const std::vector<std::size_t> sizes{3, 3, 2, 4, 2, 2};
  const GraspSpace space(sizes, GraspMode::AllAssigned);
  CHECK(space.size() == 288);
  const Grasp g = space.at(0);
  CHECK(enumerate_actions(g, sizes, ActionMode::SetOnly).size() == 16);
  const auto planner = planner_actions(g, sizes, ActionMode::SetOnly);
  REQUIRE(planner.size() == 17);
  CHECK(planner[0] == GraspAction::noop());
  // Slot-major order of Set actions.
  CHECK(planner[1] == GraspAction::set(0, 0));
  CHECK(planner[4] == GraspAction::set(1, 0));
  CHECK(planner[16] == GraspAction::set(5, 1));
}

TEST_CASE("the default hand enumerates 288 grasps and 16 actions") {
  const HandModel hand = default_hand();
  CHECK(hand.catalog_sizes() == std::vector<std::size_t>{3, 2, 3, 2, 4, 2});
  const auto grasps = enumerate_grasps(hand, GraspMode::AllAssigned);
  CHECK(grasps.size() == 288);
  CHECK(enumerate_actions(grasps.front(), hand, ActionMode::SetOnly).size() == 16);
}

TEST_CASE("small enumerations") {
  CHECK(GraspSpace({1}, GraspMode::AllAssigned).size() == 1);
  CHECK(GraspSpace({2, 2}, GraspMode::WithNull).size() == 9);

  const std::vector<std::size_t> one{2};
  Grasp assigned{{1}, {}};
  CHECK(enumerate_actions(assigned, one, ActionMode::WithRemoval).size() == 3);
  Grasp empty{{kNullContact}, {}};
  CHECK(enumerate_actions(empty, one, ActionMode::WithRemoval).size() == 2);
  CHECK_THROWS_AS(GraspSpace(std::vector<std::size_t>{}, GraspMode::AllAssigned), std::invalid_argument);
  CHECK_THROWS_AS(GraspSpace({2, 0}, GraspMode::AllAssigned), std::invalid_argument);
}

TEST_CASE("enumeration is lexicographic and round-trips through index_of") {
  for (GraspMode mode : {GraspMode::AllAssigned, GraspMode::WithNull}) {
    const GraspSpace space({3, 2, 4}, mode);
    std::set<std::vector<int>> seen;
    std::vector<int> previous;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const Grasp g = space.at(i);
      CHECK(space.index_of(g) == i);
      if (i > 0) CHECK(previous < g.pairing);
      previous = g.pairing;
      seen.insert(g.pairing);
    }
    CHECK(seen.size() == space.size());
    CHECK_THROWS_AS(space.at(space.size()), std::out_of_range);
  }
  const GraspSpace null_space({2, 2}, GraspMode::WithNull);
  CHECK(null_space.at(0).pairing == std::vector<int>{kNullContact, kNullContact});
  CHECK(null_space.at(1).pairing == std::vector<int>{kNullContact, 0});
}

TEST_CASE("index_of rejects grasps outside the enumeration") {
  const GraspSpace assigned({3, 2}, GraspMode::AllAssigned);
  CHECK_FALSE(assigned.index_of(Grasp{{kNullContact, 0}, {}}).has_value());
  CHECK_FALSE(assigned.index_of(Grasp{{0, 2}, {}}).has_value());
  CHECK_FALSE(assigned.index_of(Grasp{{0}, {}}).has_value());
  CHECK_FALSE(assigned.index_of(Grasp{{0, 0}, {true, false}}).has_value());
  CHECK(assigned.index_of(Grasp{{0, 0}, {false, false}}) == std::optional<std::size_t>(0));
}

TEST_CASE("applying actions") {
  const std::vector<std::size_t> sizes{3, 2};
  const Grasp g{{1, 0}, {}};
  CHECK(apply_action(g, GraspAction::noop(), sizes) == g);
  const Grasp moved = apply_action(g, GraspAction::set(1, 1), sizes);
  CHECK(moved.pairing == std::vector<int>{1, 1});
  CHECK(apply_action(g, GraspAction::remove(0), sizes).pairing == std::vector<int>{kNullContact, 0});
  CHECK_THROWS_AS(apply_action(g, GraspAction::set(0, 3), sizes), std::invalid_argument);
  CHECK_THROWS_AS(apply_action(g, GraspAction::set(2, 0), sizes), std::invalid_argument);
  CHECK_THROWS_AS(apply_action(g, GraspAction::remove(5), sizes), std::invalid_argument);
  CHECK_THROWS_AS(apply_action(Grasp{{0}, {}}, GraspAction::noop(), sizes), std::invalid_argument);
}

TEST_CASE("every action moves at most one link") {
  const std::vector<std::size_t> sizes{3, 2, 4};
  const GraspSpace space(sizes, GraspMode::WithNull);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const Grasp g = space.at(i);
    for (const GraspAction& a : planner_actions(g, sizes, ActionMode::WithRemoval)) {
      const Grasp n = apply_action(g, a, sizes);
      int changed = 0;
      for (std::size_t k = 0; k < sizes.size(); ++k) changed += n.pairing[k] != g.pairing[k];
      CHECK(changed <= 1);
    }
  }
}
