#include "graspdp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "graspdp/model_io.hpp"

namespace graspdp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("experiment config: " + msg); }

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      fail("unknown key " + where + "." + item.key());
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key + " has the wrong type");
  }
}

std::string kind_name(ConditionKind k) {
  switch (k) {
    case ConditionKind::DpBaseline: return "dp-baseline";
    case ConditionKind::DpOptimal: return "dp-optimal";
    case ConditionKind::BasePolicy: return "base-policy";
    case ConditionKind::Greedy: return "greedy";
    case ConditionKind::Lookahead: return "lookahead";
  }
  return "?";
}

ConditionKind kind_from(const std::string& s, const std::string& where) {
  if (s == "dp-baseline") return ConditionKind::DpBaseline;
  if (s == "dp-optimal") return ConditionKind::DpOptimal;
  if (s == "base-policy") return ConditionKind::BasePolicy;
  if (s == "greedy") return ConditionKind::Greedy;
  if (s == "lookahead") return ConditionKind::Lookahead;
  fail(where + ": unknown condition kind '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string mm_label(double mm) {
  std::ostringstream os;
  os << (mm > 0 ? "+" : "") << mm << "mm";
  return os.str();
}

}  // namespace

std::vector<ConditionSpec> standard_conditions() {
  return {{"dp-baseline", ConditionKind::DpBaseline, 1, std::nullopt, false},
          {"dp-optimal", ConditionKind::DpOptimal, 1, std::nullopt, false},
          {"base-policy", ConditionKind::BasePolicy, 1, std::nullopt, false},
          {"L1", ConditionKind::Lookahead, 1, std::nullopt, false},
          {"L2", ConditionKind::Lookahead, 2, std::nullopt, false}};
}

void ExperimentConfig::validate() const {
  if (conditions.empty()) fail("at least one condition is required");
  if (suites.empty()) fail("at least one suite is required");
  std::set<std::string> names;
  for (const ConditionSpec& c : conditions) {
    if (c.name.empty() || c.name.find_first_of(",\n\"") != std::string::npos) fail("bad condition name '" + c.name + "'");
    if (!names.insert(c.name).second) fail("duplicate condition name '" + c.name + "'");
    if (c.kind == ConditionKind::Lookahead && c.depth < 1) fail("condition " + c.name + ": depth must be >= 1");
    if (c.rollout_steps && *c.rollout_steps < 0) fail("condition " + c.name + ": rollout must be >= 0");
  }
  const auto check_grid = [](const std::vector<double>& v, const char* what, bool nonzero) {
    std::set<double> seen;
    for (double x : v) {
      if (!std::isfinite(x)) fail(std::string(what) + " contains a non-finite value");
      if (nonzero && x == 0.0) fail(std::string(what) + " may not contain 0: the torque sign follows the height sign");
      if (!seen.insert(x).second) fail(std::string(what) + " contains duplicates");
    }
  };
  check_grid(training_heights_mm, "training_heights_mm", true);
  check_grid(eval_heights_mm, "eval_heights_mm", true);
  check_grid(mass_scales, "mass_scales", false);
  check_grid(com_offsets_cm, "com_offsets_cm", false);
  for (double m : mass_scales) {
    if (!(m > 0.0)) fail("mass_scales must be positive");
  }
  for (const std::string& s : suites) {
    if (s == kHeightSuite) {
      if (eval_heights_mm.empty()) fail("eval-height suite requested with no eval heights");
    } else if (s == kMassComSuite) {
      if (mass_scales.empty() || com_offsets_cm.empty()) fail("eval-mass-com suite requested with an empty grid");
    } else if (s != kTrainingSuite) {
      fail("unknown suite '" + s + "'");
    }
  }
  if (nominal.torque_z == 0.0) fail("nominal torque must be nonzero");
  if (repeats < 1) fail("repeats must be >= 1");
  if (training.epochs < 0 || training.batch_size == 0 || !(training.learning_rate > 0.0)) {
    fail("invalid base_policy training settings");
  }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("parse error: ") + e.what());
  }
  only_keys(j, {"hand", "tool", "trajectory", "variations", "suites", "conditions", "env", "hold", "base_policy", "seed",
                "output_dir", "workers", "repeats"},
            "config");
  ExperimentConfig c;
  for (auto [key, target] : {std::pair{"hand", &c.hand_path}, {"tool", &c.tool_path}}) {
    if (!j.contains(key) || j[key].is_null()) continue;
    std::string path;
    read(j, key, path, "config");
    *target = resolve(path, base_dir);
  }

  if (j.contains("trajectory")) {
    const json& t = j["trajectory"];
    only_keys(t, {"start_height", "end_height", "waypoints", "duration", "palm_height", "hand_follow", "torque_z",
                  "hold_duration", "floor"},
              "trajectory");
    read(t, "start_height", c.nominal.start_height, "trajectory");
    read(t, "end_height", c.nominal.end_height, "trajectory");
    read(t, "waypoints", c.nominal.waypoints, "trajectory");
    read(t, "duration", c.nominal.duration, "trajectory");
    read(t, "palm_height", c.nominal.palm_height, "trajectory");
    read(t, "hand_follow", c.nominal.hand_follow, "trajectory");
    read(t, "torque_z", c.nominal.torque_z, "trajectory");
    read(t, "hold_duration", c.nominal.hold_duration, "trajectory");
    read(t, "floor", c.nominal.floor, "trajectory");
  }
  if (j.contains("variations")) {
    const json& v = j["variations"];
    only_keys(v, {"training_heights_mm", "eval_heights_mm", "mass_scales", "com_offsets_cm"}, "variations");
    read(v, "training_heights_mm", c.training_heights_mm, "variations");
    read(v, "eval_heights_mm", c.eval_heights_mm, "variations");
    read(v, "mass_scales", c.mass_scales, "variations");
    read(v, "com_offsets_cm", c.com_offsets_cm, "variations");
  }
  read(j, "suites", c.suites, "config");

  if (j.contains("conditions")) {
    const json& cs = j["conditions"];
    if (!cs.is_array()) fail("conditions must be an array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string where = "conditions[" + std::to_string(i) + "]";
      only_keys(cs[i], {"name", "kind", "depth", "rollout", "value_estimate"}, where);
      ConditionSpec spec;
      std::string kind;
      read(cs[i], "kind", kind, where);
      spec.kind = kind_from(kind, where);
      spec.name = kind;
      read(cs[i], "name", spec.name, where);
      read(cs[i], "depth", spec.depth, where);
      read(cs[i], "value_estimate", spec.value_estimate, where);
      if (cs[i].contains("rollout")) {
        const json& r = cs[i]["rollout"];
        if (r.is_string() && r.get<std::string>() == "to-end") {
          spec.rollout_steps.reset();
        } else if (r.is_number_integer()) {
          spec.rollout_steps = r.get<int>();
        } else {
          fail(where + ".rollout must be \"to-end\" or an integer");
        }
      }
      c.conditions.push_back(spec);
    }
  } else {
    c.conditions = standard_conditions();
  }

  if (j.contains("env")) {
    const json& e = j["env"];
    only_keys(e, {"r_min", "redundant_penalty", "falling_threshold", "contact_tolerance", "weights", "wrench",
                  "grasp_mode", "action_mode"},
              "env");
    read(e, "r_min", c.env.r_min, "env");
    read(e, "redundant_penalty", c.env.redundant_penalty, "env");
    read(e, "falling_threshold", c.env.falling_threshold, "env");
    read(e, "contact_tolerance", c.env.contact_tolerance, "env");
    if (e.contains("weights")) {
      const json& w = e["weights"];
      only_keys(w, {"wrench_motion", "ik", "wrench_gravity", "wrench_external"}, "env.weights");
      read(w, "wrench_motion", c.env.weights.wrench_motion, "env.weights");
      read(w, "ik", c.env.weights.ik, "env.weights");
      read(w, "wrench_gravity", c.env.weights.wrench_gravity, "env.weights");
      read(w, "wrench_external", c.env.weights.wrench_external, "env.weights");
    }
    if (e.contains("wrench")) {
      const json& w = e["wrench"];
      only_keys(w, {"regularization", "cone_edges", "force_weight", "torque_weight"}, "env.wrench");
      read(w, "regularization", c.env.wrench.regularization, "env.wrench");
      read(w, "cone_edges", c.env.wrench.cone_edges, "env.wrench");
      read(w, "force_weight", c.env.wrench.weights.force, "env.wrench");
      read(w, "torque_weight", c.env.wrench.weights.torque, "env.wrench");
    }
    std::string gm = "all-assigned", am = "set-only";
    read(e, "grasp_mode", gm, "env");
    read(e, "action_mode", am, "env");
    if (gm == "all-assigned") c.env.grasp_mode = GraspMode::AllAssigned;
    else if (gm == "with-null") c.env.grasp_mode = GraspMode::WithNull;
    else fail("env.grasp_mode must be all-assigned or with-null");
    if (am == "set-only") c.env.action_mode = ActionMode::SetOnly;
    else if (am == "with-removal") c.env.action_mode = ActionMode::WithRemoval;
    else fail("env.action_mode must be set-only or with-removal");
  }
  if (j.contains("hold")) {
    only_keys(j["hold"], {"dt", "regularization"}, "hold");
    read(j["hold"], "dt", c.hold.dt, "hold");
    read(j["hold"], "regularization", c.hold.regularization, "hold");
  }
  if (j.contains("base_policy")) {
    const json& b = j["base_policy"];
    only_keys(b, {"features", "epochs", "batch_size", "learning_rate", "value_weight", "l2", "skip_doomed",
                  "validation_trajectories", "weights"},
              "base_policy");
    std::string features = to_string(c.features);
    read(b, "features", features, "base_policy");
    try {
      c.features = feature_kind_from_string(features);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    read(b, "epochs", c.training.epochs, "base_policy");
    read(b, "batch_size", c.training.batch_size, "base_policy");
    read(b, "learning_rate", c.training.learning_rate, "base_policy");
    read(b, "value_weight", c.training.value_weight, "base_policy");
    read(b, "l2", c.training.l2, "base_policy");
    read(b, "skip_doomed", c.training.skip_doomed, "base_policy");
    read(b, "validation_trajectories", c.training.validation_trajectories, "base_policy");
    if (b.contains("weights") && !b["weights"].is_null()) {
      std::string path;
      read(b, "weights", path, "base_policy");
      c.policy_path = resolve(path, base_dir);
    }
  }
  read(j, "seed", c.seed, "config");
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = resolve(out, base_dir);
  read(j, "workers", c.workers, "config");
  read(j, "repeats", c.repeats, "config");
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["hand"] = hand_path ? json(hand_path->string()) : json(nullptr);
  j["tool"] = tool_path ? json(tool_path->string()) : json(nullptr);
  j["trajectory"] = {{"start_height", nominal.start_height}, {"end_height", nominal.end_height},
                     {"waypoints", nominal.waypoints},       {"duration", nominal.duration},
                     {"palm_height", nominal.palm_height},   {"hand_follow", nominal.hand_follow},
                     {"torque_z", nominal.torque_z},         {"hold_duration", nominal.hold_duration},
                     {"floor", nominal.floor}};
  j["variations"] = {{"training_heights_mm", training_heights_mm},
                     {"eval_heights_mm", eval_heights_mm},
                     {"mass_scales", mass_scales},
                     {"com_offsets_cm", com_offsets_cm}};
  j["suites"] = suites;
  json cs = json::array();
  for (const ConditionSpec& c : conditions) {
    json o = {{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.kind == ConditionKind::Lookahead) {
      o["depth"] = c.depth;
      o["rollout"] = c.rollout_steps ? json(*c.rollout_steps) : json("to-end");
      o["value_estimate"] = c.value_estimate;
    }
    cs.push_back(o);
  }
  j["conditions"] = cs;
  j["env"] = {{"r_min", env.r_min},
              {"redundant_penalty", env.redundant_penalty},
              {"falling_threshold", env.falling_threshold},
              {"contact_tolerance", env.contact_tolerance},
              {"weights",
               {{"wrench_motion", env.weights.wrench_motion},
                {"ik", env.weights.ik},
                {"wrench_gravity", env.weights.wrench_gravity},
                {"wrench_external", env.weights.wrench_external}}},
              {"wrench",
               {{"regularization", env.wrench.regularization},
                {"cone_edges", env.wrench.cone_edges},
                {"force_weight", env.wrench.weights.force},
                {"torque_weight", env.wrench.weights.torque}}},
              {"grasp_mode", env.grasp_mode == GraspMode::AllAssigned ? "all-assigned" : "with-null"},
              {"action_mode", env.action_mode == ActionMode::SetOnly ? "set-only" : "with-removal"}};
  j["hold"] = {{"dt", hold.dt}, {"regularization", hold.regularization}};
  j["base_policy"] = {{"features", to_string(features)},
                      {"epochs", training.epochs},
                      {"batch_size", training.batch_size},
                      {"learning_rate", training.learning_rate},
                      {"value_weight", training.value_weight},
                      {"l2", training.l2},
                      {"skip_doomed", training.skip_doomed},
                      {"validation_trajectories", training.validation_trajectories},
                      {"weights", policy_path ? json(policy_path->string()) : json(nullptr)}};
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["workers"] = workers;
  j["repeats"] = repeats;
  return j.dump(2);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return ExperimentConfig::from_json(read_text_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------

const std::vector<TrajectoryCase>& TrajectorySuites::by_name(const std::string& suite) const {
  if (suite == kTrainingSuite) return training;
  if (suite == kHeightSuite) return eval_height;
  if (suite == kMassComSuite) return eval_mass_com;
  throw std::invalid_argument("unknown suite '" + suite + "'");
}

TrajectorySuites make_trajectory_suite(const ExperimentConfig& config, const ToolModel& tool) {
  config.validate();
  const double torque = std::abs(config.nominal.torque_z);
  const auto make = [&](const char* suite, TrajectoryParams p, std::string name) {
    return TrajectoryCase{suite, std::make_shared<const EpisodeInput>(make_episode(p, tool, std::move(name)))};
  };
  TrajectorySuites s;
  {
    TrajectoryParams p = config.nominal;
    p.torque_z = torque;
    s.training.push_back(make(kTrainingSuite, p, "nominal_tq+"));
    p.torque_z = -torque;
    s.training.push_back(make(kTrainingSuite, p, "nominal_tq-"));
  }
  for (double mm : config.training_heights_mm) {
    TrajectoryParams p = config.nominal;
    p.height_offset = mm * 1e-3;
    p.torque_z = mm > 0 ? torque : -torque;
    s.training.push_back(make(kTrainingSuite, p, "h" + mm_label(mm) + (mm > 0 ? "_tq+" : "_tq-")));
  }
  for (double mm : config.eval_heights_mm) {
    TrajectoryParams p = config.nominal;
    p.height_offset = mm * 1e-3;
    p.torque_z = mm > 0 ? -torque : torque;
    s.eval_height.push_back(make(kHeightSuite, p, "h" + mm_label(mm) + (mm > 0 ? "_tq-" : "_tq+")));
  }
  for (double m : config.mass_scales) {
    for (double cm : config.com_offsets_cm) {
      TrajectoryParams p = config.nominal;
      p.torque_z = torque;
      p.mass_scale = m;
      p.com_offset_y = cm * 1e-2;
      std::ostringstream name;
      name << "m" << m << "_com" << (cm > 0 ? "+" : "") << cm << "cm";
      s.eval_mass_com.push_back(make(kMassComSuite, p, name.str()));
    }
  }
  return s;
}

std::shared_ptr<const HandModel> load_experiment_hand(const ExperimentConfig& config) {
  return std::make_shared<const HandModel>(config.hand_path ? load_hand(*config.hand_path) : default_hand());
}

ToolModel load_experiment_tool(const ExperimentConfig& config) {
  return config.tool_path ? load_tool(*config.tool_path) : default_tool();
}

// ---------------------------------------------------------------------------

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<SolvedTrajectory> solve_training_suite(const std::shared_ptr<const HandModel>& hand,
                                                   const TrajectorySuites& suites, const ExperimentConfig& config) {
  std::vector<SolvedTrajectory> out;
  for (const TrajectoryCase& c : suites.training) {
    auto mdp = std::make_shared<const DiscreteGraspMdp>(std::make_shared<const GraspEnv>(hand, c.episode, config.env));
    DpSolution sol = solve_dp(*mdp, config.workers);
    out.push_back({std::move(mdp), std::move(sol)});
  }
  return out;
}

OfflineArtifacts prepare_offline(const std::shared_ptr<const HandModel>& hand, const TrajectorySuites& suites,
                                 const ExperimentConfig& config, const LogFn& log) {
  const auto start = std::chrono::steady_clock::now();
  const auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  OfflineArtifacts off;
  if (suites.training.empty()) throw std::invalid_argument("training suite is empty");

  std::vector<SolvedTrajectory> solved;
  if (config.policy_path) {
    say("solving DP on the nominal trajectory");
    auto mdp = std::make_shared<const DiscreteGraspMdp>(
        std::make_shared<const GraspEnv>(hand, suites.training.front().episode, config.env));
    solved.push_back({mdp, solve_dp(*mdp, config.workers)});
  } else {
    say("solving DP on " + std::to_string(suites.training.size()) + " training trajectories");
    solved = solve_training_suite(hand, suites, config);
  }
  off.baseline = std::make_shared<const TabularPolicy>(solved.front().solution);

  if (config.policy_path) {
    say("loading base policy " + config.policy_path->string());
    auto policy = std::make_shared<ApproxPolicy>(load_policy(*config.policy_path));
    policy->encoder().check(*solved.front().mdp);
    off.base = policy;
  } else {
    const BcDataset ds = generate_bc_dataset(solved, config.features, config.seed);
    off.dataset_rows = ds.rows.size();
    TrainConfig tc = config.training;
    tc.seed = config.seed;
    say("training base policy on " + std::to_string(ds.rows.size()) + " rows");
    TrainResult tr = train_bc(ds, tc, config.env.r_min);
    off.training_history = std::move(tr.history);
    off.base = std::make_shared<const ApproxPolicy>(std::move(tr.policy));
  }
  off.seconds = seconds_since(start);
  return off;
}

RunRecord run_condition(const ConditionSpec& condition, const std::shared_ptr<const HandModel>& hand,
                        const TrajectoryCase& trajectory, const ExperimentConfig& config,
                        const OfflineArtifacts& offline) {
  using State = DiscreteGraspMdp::State;
  RunRecord rec;
  rec.suite = trajectory.suite;
  rec.trajectory = trajectory.episode->name;
  rec.condition = condition.name;
  rec.repeats = config.repeats;

  std::vector<double> times;
  std::shared_ptr<const DiscreteGraspMdp> kept;
  EpisodeTrace<State> trace;
  for (int r = 0; r < config.repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    auto mdp = std::make_shared<const DiscreteGraspMdp>(
        std::make_shared<const GraspEnv>(hand, trajectory.episode, config.env));
    const State s0 = mdp->initial_state();
    EpisodeTrace<State> tr;
    switch (condition.kind) {
      case ConditionKind::DpBaseline:
        tr = evaluate_policy(*mdp, bind(*offline.baseline, *mdp), s0);
        break;
      case ConditionKind::DpOptimal: {
        const DpSolution sol = solve_dp(*mdp, config.workers);
        tr = evaluate_policy(*mdp, [&](State s, int t) { return static_cast<std::size_t>(sol.policy.at(s, t)); }, s0);
        break;
      }
      case ConditionKind::BasePolicy:
        tr = evaluate_policy(*mdp, bind(*offline.base, *mdp), s0);
        break;
      case ConditionKind::Greedy: {
        const GreedyPolicy greedy;
        tr = evaluate_policy(*mdp, bind(greedy, *mdp), s0);
        break;
      }
      case ConditionKind::Lookahead: {
        LookaheadConfig<State> lc;
        lc.depth = condition.depth;
        lc.rollout = condition.rollout_steps ? RolloutDepth::steps(*condition.rollout_steps) : RolloutDepth::to_end();
        if (condition.value_estimate) lc.terminal_value = bind_value(*offline.base, *mdp);
        lc.workers = config.workers;
        const auto base = bind(*offline.base, *mdp);
        tr = evaluate_policy(*mdp, [&](State s, int t) { return lookahead_action(*mdp, base, s, t, lc); }, s0);
        break;
      }
    }
    times.push_back(seconds_since(start));
    if (r == 0) {
      trace = std::move(tr);
      kept = mdp;
    }
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  rec.seconds = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);

  rec.ret = trace.total;
  for (const auto& step : trace.steps) rec.grasps.push_back(step.state);
  rec.grasps.push_back(trace.final_state);
  rec.terminated = trace.final_state == kept->dropped();

  const GraspEnv& env = kept->env();
  EnvState final_state;
  if (rec.terminated) {
    final_state = env.initial_state();
    final_state.terminated = true;
  } else {
    final_state = env.state_for(env.space().at(trace.final_state), env.horizon() - 1);
  }
  rec.hold_cost = evaluate_hold(env, final_state, trajectory.episode->external_wrench,
                                trajectory.episode->hold_duration, config.hold);
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const LogFn& log) {
  config.validate();
  const auto hand = load_experiment_hand(config);
  const ToolModel tool = load_experiment_tool(config);
  const TrajectorySuites suites = make_trajectory_suite(config, tool);
  ExperimentResult result;
  result.offline = prepare_offline(hand, suites, config, log);
  // Pairs run one after another so that wall times are not shared between
  // them; the DP sweep and lookahead branches use config.workers threads.
  for (const std::string& suite : config.suites) {
    for (const TrajectoryCase& tc : suites.by_name(suite)) {
      for (const ConditionSpec& cond : config.conditions) {
        RunRecord rec;
        try {
          rec = run_condition(cond, hand, tc, config, result.offline);
        } catch (const std::exception& e) {
          rec.suite = tc.suite;
          rec.trajectory = tc.episode->name;
          rec.condition = cond.name;
          rec.ret = config.env.r_min;
          rec.hold_cost = std::numbers::pi * tc.episode->hold_duration;
          rec.terminated = true;
          rec.repeats = config.repeats;
          if (log) log("condition " + cond.name + " failed on " + tc.episode->name + ": " + e.what());
        }
        if (log) {
          log(suite + " " + rec.trajectory + " " + rec.condition + " return=" + num(rec.ret) +
              " hold=" + num(rec.hold_cost) + " seconds=" + num(rec.seconds));
        }
        result.records.push_back(std::move(rec));
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::optional<double> ci_half_width(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

namespace {

std::string join_states(const std::vector<std::uint32_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("bad number in " + what + ": '" + s + "'");
  return v;
}

// Non-comment lines after the header row, split on commas.
std::vector<std::vector<std::string>> csv_rows(const std::string& text, const std::string& header,
                                               const std::string& what) {
  std::istringstream is(text);
  std::string line;
  bool saw_header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != header) throw std::invalid_argument(what + ": unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    rows.push_back(split(line, ','));
  }
  if (!saw_header) throw std::invalid_argument(what + ": missing header");
  return rows;
}

constexpr const char* kResultsHeader = "suite,trajectory,condition,return,hold_cost,terminated,grasp_sequence";
constexpr const char* kTimingHeader = "suite,trajectory,condition,seconds,repeats";

}  // namespace

std::string results_csv(const std::vector<RunRecord>& records) {
  std::string out = "# graspdp results v1\n";
  out += kResultsHeader;
  out += '\n';
  for (const RunRecord& r : records) {
    out += r.suite + ',' + r.trajectory + ',' + r.condition + ',' + num(r.ret) + ',' + num(r.hold_cost) + ',' +
           (r.terminated ? "1" : "0") + ',' + join_states(r.grasps) + '\n';
  }
  return out;
}

std::string timing_csv(const std::vector<RunRecord>& records) {
  std::string out = "# graspdp timing v1\n";
  out += kTimingHeader;
  out += '\n';
  for (const RunRecord& r : records) {
    out += r.suite + ',' + r.trajectory + ',' + r.condition + ',' + num(r.seconds) + ',' + std::to_string(r.repeats) + '\n';
  }
  return out;
}

std::vector<RunRecord> parse_results_csv(const std::string& results, const std::string& timing) {
  std::vector<RunRecord> records;
  for (const auto& f : csv_rows(results, kResultsHeader, "results.csv")) {
    if (f.size() != 7) throw std::invalid_argument("results.csv: expected 7 fields per row");
    RunRecord r;
    r.suite = f[0];
    r.trajectory = f[1];
    r.condition = f[2];
    r.ret = parse_double(f[3], "results.csv return");
    r.hold_cost = parse_double(f[4], "results.csv hold_cost");
    r.terminated = f[5] == "1";
    if (!f[6].empty()) {
      for (const std::string& s : split(f[6], ' ')) r.grasps.push_back(static_cast<std::uint32_t>(std::stoul(s)));
    }
    records.push_back(std::move(r));
  }
  if (!timing.empty()) {
    for (const auto& f : csv_rows(timing, kTimingHeader, "timing.csv")) {
      if (f.size() != 5) throw std::invalid_argument("timing.csv: expected 5 fields per row");
      bool matched = false;
      for (RunRecord& r : records) {
        if (r.suite == f[0] && r.trajectory == f[1] && r.condition == f[2]) {
          r.seconds = parse_double(f[3], "timing.csv seconds");
          r.repeats = std::stoi(f[4]);
          matched = true;
          break;
        }
      }
      if (!matched) throw std::invalid_argument("timing.csv row without a results.csv row: " + f[1] + "/" + f[2]);
    }
  }
  return records;
}

PlotData emit_plot_data(const std::vector<RunRecord>& records) {
  PlotData out;
  std::vector<std::string> suites, conditions;
  const auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const RunRecord& r : records) {
    remember(suites, r.suite);
    remember(conditions, r.condition);
  }

  const auto stats_row = [](const std::string& label, const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const auto ci = ci_half_width(v);
    return label + ',' + num(mean) + ',' + (ci ? num(mean - *ci) : "") + ',' + (ci ? num(mean + *ci) : "") + '\n';
  };
  const auto collect = [&](const std::string& suite, const std::string& cond, auto field) {
    std::vector<double> v;
    for (const RunRecord& r : records) {
      if ((suite.empty() || r.suite == suite) && r.condition == cond) v.push_back(field(r));
    }
    return v;
  };
  const std::string fig_header = "# graspdp figure v1\ncondition,mean,ci_low,ci_high\n";

  std::string summary =
      "# graspdp summary v1\n"
      "suite,condition,n,mean_return,return_ci_half_width,mean_hold_cost,hold_ci_half_width,mean_seconds,"
      "seconds_ci_half_width,terminated\n";
  for (const std::string& suite : suites) {
    std::string fig_return = fig_header, fig_hold = fig_header, fig_gap = fig_header;
    bool has_gap = false;
    for (const std::string& cond : conditions) {
      const auto ret = collect(suite, cond, [](const RunRecord& r) { return r.ret; });
      if (ret.empty()) {
        out.warnings.push_back("condition " + cond + " has no rows in suite " + suite);
        continue;
      }
      const auto hold = collect(suite, cond, [](const RunRecord& r) { return r.hold_cost; });
      const auto secs = collect(suite, cond, [](const RunRecord& r) { return r.seconds; });
      std::size_t terminated = 0;
      for (const RunRecord& r : records) terminated += r.suite == suite && r.condition == cond && r.terminated;
      const auto mean = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        return m / static_cast<double>(v.size());
      };
      const auto ci = [](const std::vector<double>& v) {
        const auto h = ci_half_width(v);
        return h ? num(*h) : std::string();
      };
      summary += suite + ',' + cond + ',' + std::to_string(ret.size()) + ',' + num(mean(ret)) + ',' + ci(ret) + ',' +
                 num(mean(hold)) + ',' + ci(hold) + ',' + num(mean(secs)) + ',' + ci(secs) + ',' +
                 std::to_string(terminated) + '\n';
      fig_return += stats_row(cond, ret);
      fig_hold += stats_row(cond, hold);

      std::vector<double> gap;
      for (const RunRecord& r : records) {
        if (r.suite != suite || r.condition != cond) continue;
        for (const RunRecord& o : records) {
          if (o.suite == suite && o.trajectory == r.trajectory && o.condition == "dp-optimal") {
            gap.push_back(r.ret - o.ret);
            break;
          }
        }
      }
      if (!gap.empty()) {
        fig_gap += stats_row(cond, gap);
        has_gap = true;
      }
    }
    out.files["fig_return_" + suite + ".csv"] = fig_return;
    out.files["fig_hold_" + suite + ".csv"] = fig_hold;
    if (has_gap) out.files["fig_return_gap_" + suite + ".csv"] = fig_gap;
  }
  out.files["summary.csv"] = summary;

  std::string fig_timing = fig_header;
  for (const std::string& cond : conditions) {
    std::vector<double> secs;
    for (const RunRecord& r : records) {
      if (r.condition == cond && r.suite != kTrainingSuite) secs.push_back(r.seconds);
    }
    if (!secs.empty()) fig_timing += stats_row(cond, secs);
  }
  out.files["fig_timing.csv"] = fig_timing;
  return out;
}

std::string training_metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string m = "# graspdp training v1\nepoch,train_loss,train_accuracy,train_value_mse,validation_accuracy,"
                  "validation_value_mse\n";
  for (const EpochMetrics& e : history) {
    m += std::to_string(e.epoch) + ',' + num(e.train_loss) + ',' + num(e.train_accuracy) + ',' +
         num(e.train_value_mse) + ',' + (e.validation_accuracy ? num(*e.validation_accuracy) : "") + ',' +
         (e.validation_value_mse ? num(*e.validation_value_mse) : "") + '\n';
  }
  return m;
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  write_text_file(dir / "results.csv", results_csv(result.records));
  write_text_file(dir / "timing.csv", timing_csv(result.records));
  const PlotData plots = emit_plot_data(result.records);
  for (const auto& [name, text] : plots.files) write_text_file(dir / name, text);
  if (!result.offline.training_history.empty()) {
    write_text_file(dir / "training_metrics.csv", training_metrics_csv(result.offline.training_history));
  }
  if (const auto* approx = dynamic_cast<const ApproxPolicy*>(result.offline.base.get())) {
    write_text_file(dir / "policy.json", approx->to_json());
  }
}

}  // namespace graspdp
