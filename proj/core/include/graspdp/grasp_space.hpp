#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graspdp/hand.hpp"

namespace graspdp {

/// Pairing value meaning "this link is off the tool".
inline constexpr int kNullContact = -1;

/// Per contactable link (in HandModel::contactable_links() order): the
/// index of its contact pairing, or kNullContact.
struct Grasp {
  std::vector<int> pairing;
  std::vector<bool> sliding;  // empty, or one flag per contactable link

  bool operator==(const Grasp& other) const = default;
  bool any_sliding() const;
  std::size_t assigned_count() const;
  std::string to_string() const;
};

struct GraspAction {
  enum class Kind : std::uint8_t { NoOp, Set, Remove };
  Kind kind = Kind::NoOp;
  std::size_t slot = 0;  // contactable-link slot
  int contact = 0;       // pairing index for Set

  static GraspAction noop() { return {}; }
  static GraspAction set(std::size_t slot, int contact) { return {Kind::Set, slot, contact}; }
  static GraspAction remove(std::size_t slot) { return {Kind::Remove, slot, 0}; }

  bool operator==(const GraspAction& other) const = default;
  std::string to_string() const;
};

enum class GraspMode { AllAssigned, WithNull };
enum class ActionMode { SetOnly, WithRemoval };

/// Mixed-radix enumeration of grasps. In all-assigned mode every link holds one of
/// its catalog pairings; in with-null mode digit 0 is Null and digit d > 0
/// is pairing d - 1. The first contactable link is the most significant
/// digit, so indices follow lexicographic order.
class GraspSpace {
 public:
  GraspSpace() = default;
  GraspSpace(std::vector<std::size_t> catalog_sizes, GraspMode mode);
  GraspSpace(const HandModel& hand, GraspMode mode) : GraspSpace(hand.catalog_sizes(), mode) {}

  std::size_t size() const { return count_; }
  std::size_t slots() const { return catalog_.size(); }
  const std::vector<std::size_t>& catalog_sizes() const { return catalog_; }
  GraspMode mode() const { return mode_; }

  Grasp at(std::size_t index) const;
  /// Index of a grasp, or nullopt when it is not part of this enumeration
  /// (Null links in all-assigned mode, sliding flags, wrong slot count).
  std::optional<std::size_t> index_of(const Grasp& grasp) const;
  bool valid(const Grasp& grasp) const;

 private:
  std::vector<std::size_t> catalog_;
  std::vector<std::size_t> radix_;
  std::size_t count_ = 0;
  GraspMode mode_ = GraspMode::AllAssigned;
};

std::vector<Grasp> enumerate_grasps(const HandModel& hand, GraspMode mode);

/// Set-only mode: one Set action per (link, pairing), in slot-major order.
/// With-removal mode appends one Remove per currently assigned link. NoOp
/// is not included.
std::vector<GraspAction> enumerate_actions(const Grasp& grasp, const HandModel& hand, ActionMode mode);
std::vector<GraspAction> enumerate_actions(const Grasp& grasp, const std::vector<std::size_t>& catalog_sizes,
                                           ActionMode mode);

/// Action list offered to planners: NoOp at index 0 followed by
/// enumerate_actions.
std::vector<GraspAction> planner_actions(const Grasp& grasp, const std::vector<std::size_t>& catalog_sizes,
                                         ActionMode mode);

/// Applies an action; throws std::invalid_argument on malformed actions.
Grasp apply_action(const Grasp& grasp, const GraspAction& action, const std::vector<std::size_t>& catalog_sizes);

}  // namespace graspdp
