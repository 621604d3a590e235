#include "graspdp/grasp_space.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace graspdp {

bool Grasp::any_sliding() const { return std::find(sliding.begin(), sliding.end(), true) != sliding.end(); }

std::size_t Grasp::assigned_count() const {
  return static_cast<std::size_t>(std::count_if(pairing.begin(), pairing.end(), [](int p) { return p != kNullContact; }));
}

std::string Grasp::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < pairing.size(); ++i) {
    if (i > 0) os << '.';
    if (pairing[i] == kNullContact) {
      os << 'x';
    } else {
      os << pairing[i];
    }
    if (i < sliding.size() && sliding[i]) os << 's';
  }
  return os.str();
}

std::string GraspAction::to_string() const {
  switch (kind) {
    case Kind::NoOp:
      return "noop";
    case Kind::Set:
      return "set(" + std::to_string(slot) + "," + std::to_string(contact) + ")";
    case Kind::Remove:
      return "remove(" + std::to_string(slot) + ")";
  }
  return "?";
}

GraspSpace::GraspSpace(std::vector<std::size_t> catalog_sizes, GraspMode mode)
    : catalog_(std::move(catalog_sizes)), mode_(mode) {
  if (catalog_.empty()) throw std::invalid_argument("grasp space needs at least one contactable link");
  count_ = 1;
  for (std::size_t c : catalog_) {
    if (c == 0) throw std::invalid_argument("contactable link with empty catalog");
    const std::size_t r = mode_ == GraspMode::WithNull ? c + 1 : c;
    radix_.push_back(r);
    count_ *= r;
  }
}

Grasp GraspSpace::at(std::size_t index) const {
  if (index >= count_) throw std::out_of_range("grasp index out of range");
  Grasp g;
  g.pairing.resize(catalog_.size());
  for (std::size_t k = catalog_.size(); k-- > 0;) {
    const std::size_t digit = index % radix_[k];
    index /= radix_[k];
    if (mode_ == GraspMode::WithNull) {
      g.pairing[k] = digit == 0 ? kNullContact : static_cast<int>(digit) - 1;
    } else {
      g.pairing[k] = static_cast<int>(digit);
    }
  }
  return g;
}

std::optional<std::size_t> GraspSpace::index_of(const Grasp& grasp) const {
  if (grasp.pairing.size() != catalog_.size() || grasp.any_sliding()) return std::nullopt;
  std::size_t index = 0;
  for (std::size_t k = 0; k < catalog_.size(); ++k) {
    const int p = grasp.pairing[k];
    std::size_t digit = 0;
    if (p == kNullContact) {
      if (mode_ != GraspMode::WithNull) return std::nullopt;
      digit = 0;
    } else {
      if (p < 0 || static_cast<std::size_t>(p) >= catalog_[k]) return std::nullopt;
      digit = mode_ == GraspMode::WithNull ? static_cast<std::size_t>(p) + 1 : static_cast<std::size_t>(p);
    }
    index = index * radix_[k] + digit;
  }
  return index;
}

bool GraspSpace::valid(const Grasp& grasp) const {
  if (grasp.pairing.size() != catalog_.size()) return false;
  if (!grasp.sliding.empty() && grasp.sliding.size() != catalog_.size()) return false;
  for (std::size_t k = 0; k < catalog_.size(); ++k) {
    const int p = grasp.pairing[k];
    if (p != kNullContact && (p < 0 || static_cast<std::size_t>(p) >= catalog_[k])) return false;
  }
  return true;
}

std::vector<Grasp> enumerate_grasps(const HandModel& hand, GraspMode mode) {
  const GraspSpace space(hand, mode);
  std::vector<Grasp> out;
  out.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) out.push_back(space.at(i));
  return out;
}

std::vector<GraspAction> enumerate_actions(const Grasp& grasp, const std::vector<std::size_t>& catalog_sizes,
                                           ActionMode mode) {
  std::vector<GraspAction> out;
  for (std::size_t k = 0; k < catalog_sizes.size(); ++k) {
    for (std::size_t c = 0; c < catalog_sizes[k]; ++c) out.push_back(GraspAction::set(k, static_cast<int>(c)));
  }
  if (mode == ActionMode::WithRemoval) {
    for (std::size_t k = 0; k < grasp.pairing.size(); ++k) {
      if (grasp.pairing[k] != kNullContact) out.push_back(GraspAction::remove(k));
    }
  }
  return out;
}

std::vector<GraspAction> enumerate_actions(const Grasp& grasp, const HandModel& hand, ActionMode mode) {
  return enumerate_actions(grasp, hand.catalog_sizes(), mode);
}

std::vector<GraspAction> planner_actions(const Grasp& grasp, const std::vector<std::size_t>& catalog_sizes,
                                         ActionMode mode) {
  std::vector<GraspAction> out{GraspAction::noop()};
  auto rest = enumerate_actions(grasp, catalog_sizes, mode);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

Grasp apply_action(const Grasp& grasp, const GraspAction& action, const std::vector<std::size_t>& catalog_sizes) {
  if (grasp.pairing.size() != catalog_sizes.size()) throw std::invalid_argument("grasp does not match hand catalog");
  Grasp next = grasp;
  switch (action.kind) {
    case GraspAction::Kind::NoOp:
      break;
    case GraspAction::Kind::Set:
      if (action.slot >= catalog_sizes.size() || action.contact < 0 ||
          static_cast<std::size_t>(action.contact) >= catalog_sizes[action.slot]) {
        throw std::invalid_argument("malformed action " + action.to_string());
      }
      next.pairing[action.slot] = action.contact;
      break;
    case GraspAction::Kind::Remove:
      if (action.slot >= catalog_sizes.size()) throw std::invalid_argument("malformed action " + action.to_string());
      next.pairing[action.slot] = kNullContact;
      if (!next.sliding.empty()) next.sliding[action.slot] = false;
      break;
  }
  return next;
}

}  // namespace graspdp
