#include "graspdp/model_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace graspdp {

using nlohmann::json;

HandModel default_hand() {
  const Quat hang = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()));
  const Quat hang_opposed = Quat(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ())) * hang;
  // Link frames: +x runs along the link, -z faces the palm side of the finger.
  const auto link = [](std::string name, double length, double radius, double lower, double upper,
                       std::vector<ContactPairing> contacts) {
    Link l;
    l.name = std::move(name);
    l.length = length;
    l.radius = radius;
    l.joint = {Vec3::UnitY(), lower, upper};
    l.contacts = std::move(contacts);
    return l;
  };
  constexpr double kMedial = 0.06, kDistal = 0.04, kThumb = 0.04, rM = 0.007, rD = 0.006;
  constexpr double kRoot = -0.066;  // knuckle line below the hand frame
  const Vec3 medial_near(0.75 * kMedial, 0.0, -rM);
  const Vec3 medial_far(0.95 * kMedial, 0.0, -rM);
  const Vec3 pad(0.8 * kDistal, 0.0, -rD);
  const Vec3 under(0.5 * kDistal, 0.0, -rD);
  const Vec3 tip(kDistal + rD, 0.0, 0.0);

  std::vector<Finger> fingers;
  fingers.push_back({"thumb", Pose::from(Vec3(-0.035, 0.0, kRoot), hang_opposed),
                     {link("thumb_proximal", kThumb, rM, -0.5, 1.2, {}),
                      link("thumb_distal", kDistal, rD, -0.3, 1.9, {{pad, 0}, {pad, 1}, {tip, 2}})}});
  fingers.push_back({"index", Pose::from(Vec3(0.03, -0.045, kRoot), hang),
                     {link("index_medial", kMedial, rM, -0.5, 1.2, {{medial_near, 5}, {medial_far, 5}}),
                      link("index_distal", kDistal, rD, -0.3, 1.9, {{pad, 3}, {pad, 4}, {under, 6}})}});
  fingers.push_back({"middle", Pose::from(Vec3(0.03, 0.0, kRoot), hang),
                     {link("middle_medial", kMedial, rM, -0.5, 1.2, {{medial_near, 9}, {medial_far, 9}}),
                      link("middle_distal", kDistal, rD, -0.3, 1.9, {{pad, 7}, {pad, 8}, {tip, 10}, {under, 11}})}});
  fingers.push_back({"ring", Pose::from(Vec3(0.03, 0.045, kRoot), hang),
                     {link("ring_medial", kMedial, rM, -0.5, 1.2, {}),
                      link("ring_distal", kDistal, rD, -0.3, 1.9, {{pad, 12}, {pad, 13}})}});
  return HandModel(std::move(fingers));
}

ToolModel default_tool() {
  ToolModel t;
  t.name = "wrench";
  t.mass = 0.35;
  t.half_extents = Vec3(0.0125, 0.07, 0.006);
  const Vec3 d = 2.0 * t.half_extents;
  t.inertia = Mat3::Zero();
  t.inertia.diagonal() << t.mass / 12.0 * (d.y() * d.y() + d.z() * d.z()), t.mass / 12.0 * (d.x() * d.x() + d.z() * d.z()),
      t.mass / 12.0 * (d.x() * d.x() + d.y() * d.y());
  t.friction = 0.6;
  const double hx = t.half_extents.x(), hz = t.half_extents.z();
  const Vec3 from_minus_x(1, 0, 0), from_plus_x(-1, 0, 0), from_top(0, 0, -1), from_below(0, 0, 1);
  t.contact_points = {
      {{-hx, 0.0, 0.003}, from_minus_x},     // 0  thumb side, high
      {{-hx, 0.0, -0.003}, from_minus_x},    // 1  thumb side, low
      {{-0.006, 0.0, hz}, from_top},         // 2  top, thumb half
      {{hx, -0.045, 0.003}, from_plus_x},    // 3  index side, high
      {{hx, -0.045, -0.003}, from_plus_x},   // 4  index side, low
      {{hx, -0.045, 0.0}, from_plus_x},      // 5  index side, middle
      {{0.004, -0.045, -hz}, from_below},    // 6  underside, index
      {{hx, 0.0, 0.003}, from_plus_x},       // 7  middle side, high
      {{hx, 0.0, -0.003}, from_plus_x},      // 8  middle side, low
      {{hx, 0.0, 0.0}, from_plus_x},         // 9  middle side, middle
      {{0.006, 0.0, hz}, from_top},          // 10 top, finger half
      {{0.004, 0.0, -hz}, from_below},       // 11 underside, middle
      {{hx, 0.045, 0.003}, from_plus_x},     // 12 ring side, high
      {{hx, 0.045, -0.003}, from_plus_x},    // 13 ring side, low
  };
  return t;
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where + ": missing field '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + ": expected a number");
  return j.get<double>();
}

double number(const json& j, const char* key, const std::string& where) {
  return number(field(j, key, where), where + "." + key);
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) fail(where + ": expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = number(j[static_cast<std::size_t>(i)], where);
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_or(const json& j, const char* key, const std::string& where) {
  return j.contains(key) ? vec<N>(j.at(key), where + "." + key) : Eigen::Matrix<double, N, 1>::Zero();
}

template <typename Derived>
json to_array(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json pose_json(const Pose& p) {
  const Quat& q = p.orientation;
  return {{"position", to_array(p.position)}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose parse_pose(const json& j, const std::string& where) {
  Pose p;
  p.position = vec<3>(field(j, "position", where), where + ".position");
  if (j.contains("orientation")) {
    const Eigen::Vector4d q = vec<4>(j.at("orientation"), where + ".orientation");
    if (std::abs(q.norm() - 1.0) > 1e-6) fail(where + ".orientation: quaternion [w,x,y,z] must be unit length");
    p.orientation = Quat(q[0], q[1], q[2], q[3]).normalized();
  }
  return p;
}

json parse_text(const std::string& text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(what + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) fail(what + ": expected a JSON object");
  return j;
}

// Type mismatches deep inside a document surface as json::type_error.
template <class F>
auto rethrow_json(const std::string& what, F&& parse) {
  try {
    return parse();
  } catch (const json::exception& e) {
    fail(what + ": " + e.what());
  }
}

json tool_json(const ToolModel& t) {
  json points = json::array();
  for (const auto& c : t.contact_points) points.push_back({{"position", to_array(c.position)}, {"normal", to_array(c.normal)}});
  json inertia = json::array();
  for (int r = 0; r < 3; ++r) inertia.push_back(to_array(t.inertia.row(r).transpose()));
  return {{"name", t.name},         {"mass", t.mass},
          {"inertia", inertia},     {"com_offset", to_array(t.com_offset)},
          {"friction", t.friction}, {"half_extents", to_array(t.half_extents)},
          {"contact_points", points}};
}

ToolModel parse_tool(const json& j, const std::string& where) {
  ToolModel t;
  t.name = j.value("name", std::string("tool"));
  t.mass = number(j, "mass", where);
  const json& inertia = field(j, "inertia", where);
  if (!inertia.is_array() || inertia.size() != 3) fail(where + ".inertia: expected a 3x3 array");
  for (int r = 0; r < 3; ++r) t.inertia.row(r) = vec<3>(inertia[static_cast<std::size_t>(r)], where + ".inertia").transpose();
  t.com_offset = vec_or<3>(j, "com_offset", where);
  t.friction = number(j, "friction", where);
  t.half_extents = vec<3>(field(j, "half_extents", where), where + ".half_extents");
  const json& points = field(j, "contact_points", where);
  if (!points.is_array()) fail(where + ".contact_points: expected an array");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string w = where + ".contact_points[" + std::to_string(i) + "]";
    ToolContactPoint c;
    c.position = vec<3>(field(points[i], "position", w), w + ".position");
    c.normal = vec<3>(field(points[i], "normal", w), w + ".normal");
    if (!(c.normal.norm() > 0.0)) fail(w + ".normal: must be non-zero");
    c.normal.normalize();
    t.contact_points.push_back(c);
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    fail(where + ": " + e.what());
  }
  return t;
}

json obstacle_json(const Obstacle& o) {
  if (const auto* p = std::get_if<Plane>(&o)) {
    return {{"type", "plane"}, {"normal", to_array(p->normal)}, {"offset", p->offset}};
  }
  const auto& s = std::get<SphereObstacle>(o);
  return {{"type", "sphere"}, {"center", to_array(s.center)}, {"radius", s.radius}};
}

Obstacle parse_obstacle(const json& j, const std::string& where) {
  const std::string type = j.value("type", std::string());
  if (type == "plane") {
    Plane p;
    p.normal = vec<3>(field(j, "normal", where), where + ".normal");
    if (!(p.normal.norm() > 0.0)) fail(where + ".normal: must be non-zero");
    p.normal.normalize();
    p.offset = number(j, "offset", where);
    return p;
  }
  if (type == "sphere") {
    SphereObstacle s;
    s.center = vec<3>(field(j, "center", where), where + ".center");
    s.radius = number(j, "radius", where);
    if (!(s.radius > 0.0)) fail(where + ".radius: must be positive");
    return s;
  }
  fail(where + ".type: expected 'plane' or 'sphere'");
}

}  // namespace

std::string hand_to_json(const HandModel& hand) {
  json fingers = json::array();
  for (const Finger& f : hand.fingers()) {
    json links = json::array();
    for (const Link& l : f.links) {
      json contacts = json::array();
      for (const auto& c : l.contacts) contacts.push_back({{"link_point", to_array(c.link_point)}, {"tool_point", c.tool_point}});
      links.push_back({{"name", l.name},
                       {"length", l.length},
                       {"primitive", l.primitive == PrimitiveKind::Capsule ? "capsule" : "sphere"},
                       {"radius", l.radius},
                       {"joint", {{"axis", to_array(l.joint.axis)}, {"lower", l.joint.lower}, {"upper", l.joint.upper}}},
                       {"contacts", contacts}});
    }
    fingers.push_back({{"name", f.name}, {"base", pose_json(f.base)}, {"links", links}});
  }
  return json{{"fingers", fingers}}.dump(2);
}

namespace {

HandModel parse_hand_document(const std::string& text) {
  const json j = parse_text(text, "hand");
  const json& fingers = field(j, "fingers", "hand");
  if (!fingers.is_array()) fail("hand.fingers: expected an array");
  std::vector<Finger> out;
  for (std::size_t f = 0; f < fingers.size(); ++f) {
    const std::string wf = "hand.fingers[" + std::to_string(f) + "]";
    Finger finger;
    finger.name = fingers[f].value("name", "finger" + std::to_string(f));
    finger.base = parse_pose(field(fingers[f], "base", wf), wf + ".base");
    const json& links = field(fingers[f], "links", wf);
    if (!links.is_array()) fail(wf + ".links: expected an array");
    for (std::size_t k = 0; k < links.size(); ++k) {
      const std::string wl = wf + ".links[" + std::to_string(k) + "]";
      const json& lj = links[k];
      Link l;
      l.name = lj.value("name", finger.name + "_" + std::to_string(k));
      l.length = number(lj, "length", wl);
      const std::string prim = lj.value("primitive", std::string("capsule"));
      if (prim == "capsule") {
        l.primitive = PrimitiveKind::Capsule;
      } else if (prim == "sphere") {
        l.primitive = PrimitiveKind::Sphere;
      } else {
        fail(wl + ".primitive: expected 'capsule' or 'sphere'");
      }
      l.radius = number(lj, "radius", wl);
      const json& joint = field(lj, "joint", wl);
      l.joint.axis = vec<3>(field(joint, "axis", wl + ".joint"), wl + ".joint.axis");
      if (!(l.joint.axis.norm() > 0.0)) fail(wl + ".joint.axis: must be non-zero");
      l.joint.axis.normalize();
      l.joint.lower = number(joint, "lower", wl + ".joint");
      l.joint.upper = number(joint, "upper", wl + ".joint");
      if (lj.contains("contacts")) {
        const json& contacts = lj.at("contacts");
        if (!contacts.is_array()) fail(wl + ".contacts: expected an array");
        for (std::size_t c = 0; c < contacts.size(); ++c) {
          const std::string wc = wl + ".contacts[" + std::to_string(c) + "]";
          const json& tp = field(contacts[c], "tool_point", wc);
          if (!tp.is_number_integer() || tp.get<long long>() < 0) fail(wc + ".tool_point: expected a non-negative integer");
          l.contacts.push_back({vec<3>(field(contacts[c], "link_point", wc), wc + ".link_point"), tp.get<std::size_t>()});
        }
      }
      finger.links.push_back(std::move(l));
    }
    out.push_back(std::move(finger));
  }
  try {
    return HandModel(std::move(out));
  } catch (const std::invalid_argument& e) {
    fail(std::string("hand: ") + e.what());
  }
}

}  // namespace

std::string tool_to_json(const ToolModel& tool) { return tool_json(tool).dump(2); }

ToolModel tool_from_json(const std::string& text) {
  return rethrow_json("tool", [&] { return parse_tool(parse_text(text, "tool"), "tool"); });
}

std::string episode_to_json(const EpisodeInput& e) {
  json waypoints = json::array();
  for (const Waypoint& w : e.waypoints) {
    json wj = pose_json(w.tool);
    wj["velocity"] = to_array(w.velocity);
    wj["acceleration"] = to_array(w.acceleration);
    wj["angular_velocity"] = to_array(w.angular_velocity);
    wj["angular_acceleration"] = to_array(w.angular_acceleration);
    wj["hand_base"] = pose_json(w.hand_base);
    waypoints.push_back(std::move(wj));
  }
  json obstacles = json::array();
  for (const Obstacle& o : e.obstacles) obstacles.push_back(obstacle_json(o));
  json j{{"name", e.name},
         {"horizon", e.horizon},
         {"tool", tool_json(e.tool)},
         {"external_wrench", to_array(e.external_wrench)},
         {"hold_duration", e.hold_duration},
         {"obstacles", obstacles},
         {"waypoints", waypoints}};
  if (e.initial_grasp) j["initial_grasp"] = e.initial_grasp->pairing;
  return j.dump(2);
}

namespace {

EpisodeInput parse_episode_document(const std::string& text) {
  const json j = parse_text(text, "episode");
  EpisodeInput e;
  e.name = j.value("name", std::string("episode"));
  e.tool = parse_tool(field(j, "tool", "episode"), "episode.tool");
  const json& waypoints = field(j, "waypoints", "episode");
  if (!waypoints.is_array() || waypoints.empty()) fail("episode.waypoints: expected a non-empty array");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const std::string w = "episode.waypoints[" + std::to_string(i) + "]";
    const json& wj = waypoints[i];
    Waypoint wp;
    wp.tool = parse_pose(wj, w);
    wp.velocity = vec_or<3>(wj, "velocity", w);
    wp.acceleration = vec_or<3>(wj, "acceleration", w);
    wp.angular_velocity = vec_or<3>(wj, "angular_velocity", w);
    wp.angular_acceleration = vec_or<3>(wj, "angular_acceleration", w);
    wp.hand_base = parse_pose(field(wj, "hand_base", w), w + ".hand_base");
    e.waypoints.push_back(wp);
  }
  e.horizon = j.contains("horizon") ? static_cast<int>(number(j.at("horizon"), "episode.horizon"))
                                    : static_cast<int>(e.waypoints.size());
  e.external_wrench = vec_or<6>(j, "external_wrench", "episode");
  e.hold_duration = number_or(j, "hold_duration", 2.0, "episode");
  if (j.contains("obstacles")) {
    const json& obstacles = j.at("obstacles");
    if (!obstacles.is_array()) fail("episode.obstacles: expected an array");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      e.obstacles.push_back(parse_obstacle(obstacles[i], "episode.obstacles[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("initial_grasp")) {
    const json& g = j.at("initial_grasp");
    if (!g.is_array()) fail("episode.initial_grasp: expected an array of pairing indices (-1 for Null)");
    Grasp grasp;
    for (const json& p : g) {
      if (!p.is_number_integer()) fail("episode.initial_grasp: expected integers");
      grasp.pairing.push_back(p.get<int>());
    }
    e.initial_grasp = grasp;
  }
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    fail(std::string("episode: ") + ex.what());
  }
  return e;
}

}  // namespace

HandModel hand_from_json(const std::string& text) {
  return rethrow_json("hand", [&] { return parse_hand_document(text); });
}

EpisodeInput episode_from_json(const std::string& text) {
  return rethrow_json("episode", [&] { return parse_episode_document(text); });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

HandModel load_hand(const std::filesystem::path& path) { return hand_from_json(read_text_file(path)); }
ToolModel load_tool(const std::filesystem::path& path) { return tool_from_json(read_text_file(path)); }
EpisodeInput load_episode(const std::filesystem::path& path) { return episode_from_json(read_text_file(path)); }

}  // namespace graspdp
