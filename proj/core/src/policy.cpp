#include "graspdp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "graspdp/model_io.hpp"

namespace graspdp {

using nlohmann::json;

GraspAction Policy::act(const DiscreteGraspMdp& mdp, const EnvState& state) const {
  const State s = mdp.state_of(state);
  return mdp.actions(s)[act(mdp, s, state.t)];
}

BasePolicy<Policy::State> bind(const Policy& policy, const DiscreteGraspMdp& mdp) {
  return [&policy, &mdp](const Policy::State& s, int t) { return policy.act(mdp, s, t); };
}

ValueEstimator<Policy::State> bind_value(const Policy& policy, const DiscreteGraspMdp& mdp) {
  return [&policy, &mdp](const Policy::State& s, int t) { return policy.value(mdp, s, t).value_or(0.0); };
}

// ---------------------------------------------------------------------------

TabularPolicy::TabularPolicy(DpSolution solution) : solution_(std::move(solution)) {
  if (solution_.values.num_states() != solution_.policy.num_states() ||
      solution_.values.horizon() != solution_.policy.horizon()) {
    throw std::invalid_argument("value and policy tables disagree in shape");
  }
}

void TabularPolicy::check(const DiscreteGraspMdp& mdp, int t) const {
  if (mdp.num_states() != solution_.policy.num_states() || mdp.horizon() != solution_.policy.horizon()) {
    throw std::invalid_argument("DP tables were solved on a different discretization");
  }
  if (t < 0 || t >= mdp.horizon()) throw std::out_of_range("time outside the table");
}

std::size_t TabularPolicy::act(const DiscreteGraspMdp& mdp, State s, int t) const {
  check(mdp, t);
  const std::size_t a = solution_.policy.at(s, t);
  if (a >= mdp.num_actions(s, t)) throw std::logic_error("stored action is not offered in this state");
  return a;
}

std::optional<double> TabularPolicy::value(const DiscreteGraspMdp& mdp, State s, int t) const {
  check(mdp, t);
  return solution_.values.at(s, t);
}

TabularPolicy tabular_from_dp(DpSolution solution) { return TabularPolicy(std::move(solution)); }

std::size_t GreedyPolicy::act(const DiscreteGraspMdp& mdp, State s, int t) const {
  const std::size_t n = mdp.num_actions(s, t);
  std::size_t best = 0;
  double best_reward = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    const double r = mdp.transition(s, t, a).reward;
    if (r > best_reward) {
      best_reward = r;
      best = a;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::string to_string(FeatureKind kind) { return kind == FeatureKind::Full ? "full" : "one-hot-state"; }

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "full") return FeatureKind::Full;
  if (name == "one-hot-state") return FeatureKind::OneHotState;
  throw std::invalid_argument("unknown feature kind '" + name + "' (expected full or one-hot-state)");
}

namespace {

std::string mode_name(GraspMode m) { return m == GraspMode::AllAssigned ? "all-assigned" : "with-null"; }

GraspMode mode_from(const std::string& name) {
  if (name == "all-assigned") return GraspMode::AllAssigned;
  if (name == "with-null") return GraspMode::WithNull;
  throw std::invalid_argument("unknown grasp mode '" + name + "'");
}

constexpr std::size_t kPoseFeatures = 4;     // position in hand-base frame, world height
constexpr std::size_t kSummaryFeatures = 10;  // wrench, mass, com offset

}  // namespace

FeatureEncoder::FeatureEncoder(FeatureKind kind, std::vector<std::size_t> catalog_sizes, GraspMode grasp_mode,
                               int horizon)
    : kind_(kind), catalog_(std::move(catalog_sizes)), mode_(grasp_mode), space_(catalog_, grasp_mode),
      horizon_(horizon) {
  if (horizon_ < 2) throw std::invalid_argument("feature encoder needs a horizon of at least 2");
  if (kind_ == FeatureKind::Full) {
    std::size_t digits = 0;
    for (std::size_t c : catalog_) digits += c + (mode_ == GraspMode::WithNull ? 1 : 0);
    dim_ = 3 + digits + kPoseFeatures + kSummaryFeatures + static_cast<std::size_t>(horizon_) * (digits + 2);
  } else {
    dim_ = (space_.size() + 1) * static_cast<std::size_t>(horizon_);
  }
}

FeatureEncoder FeatureEncoder::for_env(FeatureKind kind, const GraspEnv& env) {
  return FeatureEncoder(kind, env.catalog_sizes(), env.space().mode(), env.horizon());
}

void FeatureEncoder::check(const DiscreteGraspMdp& mdp) const {
  const GraspEnv& env = mdp.env();
  if (env.catalog_sizes() != catalog_ || env.space().mode() != mode_ || env.horizon() != horizon_) {
    throw std::invalid_argument("feature encoder does not match this environment");
  }
}

void FeatureEncoder::encode(const DiscreteGraspMdp& mdp, Policy::State s, int t, std::vector<double>& out) const {
  if (t < 0 || t >= horizon_) throw std::out_of_range("feature time outside horizon");
  out.assign(dim_, 0.0);
  const bool dropped = s == mdp.dropped();
  if (kind_ == FeatureKind::OneHotState) {
    out[static_cast<std::size_t>(t) * (space_.size() + 1) + s] = 1.0;
    return;
  }
  std::size_t k = 0;
  out[k++] = 1.0;
  out[k++] = static_cast<double>(t) / (horizon_ - 1);
  out[k++] = dropped ? 1.0 : 0.0;
  const Grasp g = dropped ? Grasp{} : space_.at(s);
  for (std::size_t slot = 0; slot < catalog_.size(); ++slot) {
    const std::size_t width = catalog_[slot] + (mode_ == GraspMode::WithNull ? 1 : 0);
    if (!dropped) {
      const int p = g.pairing[slot];
      const std::size_t digit = mode_ == GraspMode::WithNull ? static_cast<std::size_t>(p + 1) : static_cast<std::size_t>(p);
      out[k + digit] = 1.0;
    }
    k += width;
  }
  const EpisodeInput& ep = mdp.env().episode();
  const Waypoint& w = ep.waypoints[static_cast<std::size_t>(t)];
  const Vec3 rel = w.hand_base.inverse().transform(w.tool.position);
  out[k++] = rel.x();
  out[k++] = rel.y();
  out[k++] = rel.z();
  out[k++] = w.tool.position.z();
  for (int i = 0; i < 6; ++i) out[k++] = ep.external_wrench[i];
  out[k++] = ep.tool.mass;
  for (int i = 0; i < 3; ++i) out[k++] = ep.tool.com_offset[i];
  // Per-time-slice copies of the grasp digits, torque and relative height.
  const std::size_t base = k;
  const std::size_t block = base - 3 - kPoseFeatures - kSummaryFeatures + 2;
  std::size_t c = base + static_cast<std::size_t>(t) * block;
  for (std::size_t i = 3; i < 3 + block - 2; ++i) out[c++] = out[i];
  out[c++] = ep.external_wrench[5];
  out[c++] = rel.z();
}

std::vector<double> FeatureEncoder::encode(const DiscreteGraspMdp& mdp, Policy::State s, int t) const {
  std::vector<double> out;
  encode(mdp, s, t, out);
  return out;
}

// ---------------------------------------------------------------------------

void BcDataset::write_jsonl(std::ostream& os) const {
  for (const BcRow& r : rows) {
    json j;
    j["features"] = r.features;
    j["action"] = r.action;
    j["value"] = r.value;
    j["trajectory_id"] = r.trajectory_id;
    j["t"] = r.t;
    j["state"] = r.state;
    os << j.dump() << '\n';
  }
}

std::vector<BcRow> BcDataset::read_jsonl(std::istream& is) {
  std::vector<BcRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      BcRow r;
      r.features = j.at("features").get<std::vector<double>>();
      r.action = j.at("action").get<std::uint32_t>();
      r.value = j.at("value").get<double>();
      r.trajectory_id = j.at("trajectory_id").get<int>();
      r.t = j.at("t").get<int>();
      r.state = j.value("state", 0u);
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

BcDataset BcDataset::deduplicated() const {
  BcDataset out{encoder, num_actions, trajectories, {}};
  std::map<std::vector<double>, bool> seen;
  for (const BcRow& r : rows) {
    if (seen.emplace(r.features, true).second) out.rows.push_back(r);
  }
  return out;
}

BcDataset BcDataset::subset(const std::vector<int>& ids, bool keep) const {
  BcDataset out{encoder, num_actions, trajectories, {}};
  for (const BcRow& r : rows) {
    const bool in = std::find(ids.begin(), ids.end(), r.trajectory_id) != ids.end();
    if (in == keep) out.rows.push_back(r);
  }
  return out;
}

std::vector<std::vector<Policy::State>> reachable_states(const DiscreteGraspMdp& mdp) {
  const int last = mdp.horizon() - 1;
  std::vector<std::vector<Policy::State>> out(static_cast<std::size_t>(std::max(last, 0)));
  if (last < 1) return out;
  std::vector<Policy::State> frontier{mdp.initial_state()};
  std::vector<char> seen(mdp.num_states());
  for (int t = 0; t < last; ++t) {
    auto& here = out[static_cast<std::size_t>(t)];
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<Policy::State> next;
    for (Policy::State s : frontier) {
      if (s != mdp.dropped()) here.push_back(s);
      for (std::size_t a = 0; a < mdp.num_actions(s, t); ++a) {
        const Policy::State n = mdp.transition(s, t, a).next;
        if (!seen[n]) {
          seen[n] = 1;
          next.push_back(n);
        }
      }
    }
    std::sort(here.begin(), here.end());
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

namespace {

template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

BcDataset generate_bc_dataset(const std::vector<SolvedTrajectory>& trajectories, FeatureKind kind,
                              std::uint64_t seed) {
  if (trajectories.empty()) throw std::invalid_argument("no trajectories to generate a dataset from");
  BcDataset ds;
  ds.encoder = FeatureEncoder::for_env(kind, trajectories.front().mdp->env());
  for (std::size_t id = 0; id < trajectories.size(); ++id) {
    const DiscreteGraspMdp& mdp = *trajectories[id].mdp;
    const DpSolution& sol = trajectories[id].solution;
    ds.encoder.check(mdp);
    if (sol.policy.num_states() != mdp.num_states() || sol.policy.horizon() != mdp.horizon()) {
      throw std::invalid_argument("DP solution does not match trajectory " + std::to_string(id));
    }
    ds.trajectories.push_back(mdp.env().episode().name);
    const auto reach = reachable_states(mdp);
    for (int t = 0; t < static_cast<int>(reach.size()); ++t) {
      for (Policy::State s : reach[static_cast<std::size_t>(t)]) {
        ds.num_actions = std::max(ds.num_actions, mdp.num_actions(s, t));
        BcRow r;
        ds.encoder.encode(mdp, s, t, r.features);
        r.action = sol.policy.at(s, t);
        r.value = sol.values.at(s, t);
        r.trajectory_id = static_cast<int>(id);
        r.t = t;
        r.state = s;
        ds.rows.push_back(std::move(r));
      }
    }
  }
  seeded_shuffle(ds.rows, seed);
  return ds;
}

// ---------------------------------------------------------------------------

ApproxPolicy::ApproxPolicy(FeatureEncoder encoder, std::size_t num_actions, double r_min)
    : encoder_(std::move(encoder)), actions_(num_actions), r_min_(r_min) {
  if (actions_ == 0) throw std::invalid_argument("policy needs at least one action");
  if (!(r_min_ < 0.0)) throw std::invalid_argument("r_min must be negative");
  const std::size_t f = encoder_.dim();
  mean.assign(f, 0.0);
  scale.assign(f, 1.0);
  policy_weights.assign(actions_ * f, 0.0);
  value_weights.assign(f, 0.0);
}

void ApproxPolicy::standardize(const std::vector<double>& in, std::vector<double>& out) const {
  if (in.size() != mean.size()) throw std::invalid_argument("feature vector has the wrong length");
  out.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - mean[i]) / scale[i];
}

std::vector<double> ApproxPolicy::scores(const std::vector<double>& features) const {
  std::vector<double> x;
  standardize(features, x);
  const std::size_t f = x.size();
  std::vector<double> z(actions_, 0.0);
  for (std::size_t i = 0; i < f; ++i) {
    if (x[i] == 0.0) continue;
    for (std::size_t a = 0; a < actions_; ++a) z[a] += policy_weights[a * f + i] * x[i];
  }
  return z;
}

double ApproxPolicy::value_of(const std::vector<double>& features) const {
  std::vector<double> x;
  standardize(features, x);
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) v += value_weights[i] * x[i];
  const double horizon = encoder_.horizon();
  return std::clamp(v * -r_min_, r_min_ * horizon, 0.0);
}

std::size_t ApproxPolicy::best_action(const std::vector<double>& features, std::size_t available) const {
  const auto z = scores(features);
  const std::size_t n = std::min(available, actions_);
  std::size_t best = 0;
  for (std::size_t a = 1; a < n; ++a) {
    if (z[a] > z[best]) best = a;
  }
  return best;
}

std::size_t ApproxPolicy::act(const DiscreteGraspMdp& mdp, State s, int t) const {
  const std::size_t available = mdp.num_actions(s, t);
  if (available <= 1) return 0;
  return best_action(encoder_.encode(mdp, s, t), available);
}

std::optional<double> ApproxPolicy::value(const DiscreteGraspMdp& mdp, State s, int t) const {
  if (s == mdp.dropped()) return 0.0;
  return value_of(encoder_.encode(mdp, s, t));
}

std::string ApproxPolicy::to_json() const {
  json j;
  j["format"] = "graspdp-policy";
  j["version"] = 1;
  j["encoder"] = {{"kind", to_string(encoder_.kind())},
                  {"catalog_sizes", encoder_.catalog_sizes()},
                  {"grasp_mode", mode_name(encoder_.grasp_mode())},
                  {"horizon", encoder_.horizon()}};
  j["num_actions"] = actions_;
  j["num_features"] = encoder_.dim();
  j["r_min"] = r_min_;
  j["training"] = {{"epochs", trained_with.epochs},
                   {"batch_size", trained_with.batch_size},
                   {"learning_rate", trained_with.learning_rate},
                   {"value_weight", trained_with.value_weight},
                   {"l2", trained_with.l2},
                   {"seed", trained_with.seed},
                   {"skip_doomed", trained_with.skip_doomed},
                   {"validation_trajectories", trained_with.validation_trajectories}};
  j["mean"] = mean;
  j["scale"] = scale;
  j["policy_weights"] = policy_weights;
  j["value_weights"] = value_weights;
  return j.dump(1);
}

ApproxPolicy ApproxPolicy::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "graspdp-policy") throw std::invalid_argument("not a graspdp policy");
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported policy version");
    const json& e = j.at("encoder");
    FeatureEncoder enc(feature_kind_from_string(e.at("kind").get<std::string>()),
                       e.at("catalog_sizes").get<std::vector<std::size_t>>(),
                       mode_from(e.at("grasp_mode").get<std::string>()), e.at("horizon").get<int>());
    ApproxPolicy p(enc, j.at("num_actions").get<std::size_t>(), j.at("r_min").get<double>());
    if (j.at("num_features").get<std::size_t>() != enc.dim()) throw std::invalid_argument("num_features mismatch");
    p.mean = j.at("mean").get<std::vector<double>>();
    p.scale = j.at("scale").get<std::vector<double>>();
    p.policy_weights = j.at("policy_weights").get<std::vector<double>>();
    p.value_weights = j.at("value_weights").get<std::vector<double>>();
    if (p.mean.size() != enc.dim() || p.scale.size() != enc.dim() || p.value_weights.size() != enc.dim() ||
        p.policy_weights.size() != enc.dim() * p.num_actions()) {
      throw std::invalid_argument("weight arrays do not match the declared shape");
    }
    for (double s : p.scale) {
      if (!(s > 0.0)) throw std::invalid_argument("feature scales must be positive");
    }
    if (j.contains("training")) {
      const json& t = j["training"];
      p.trained_with.epochs = t.value("epochs", 0);
      p.trained_with.batch_size = t.value("batch_size", std::size_t{0});
      p.trained_with.learning_rate = t.value("learning_rate", 0.0);
      p.trained_with.value_weight = t.value("value_weight", 0.0);
      p.trained_with.l2 = t.value("l2", 0.0);
      p.trained_with.seed = t.value("seed", std::uint64_t{0});
      p.trained_with.skip_doomed = t.value("skip_doomed", false);
      p.trained_with.validation_trajectories = t.value("validation_trajectories", std::vector<int>{});
    }
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("policy JSON: ") + e.what());
  }
}

ApproxPolicy load_policy(const std::filesystem::path& path) { return ApproxPolicy::from_json(read_text_file(path)); }

// ---------------------------------------------------------------------------

namespace {

struct SparseRow {
  std::vector<std::pair<std::size_t, double>> x;  // standardized nonzeros
  std::uint32_t action;
  double target;  // value / |r_min|
};

struct Adam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long step = 0;

  Adam(std::size_t n, double rate) : lr(rate), m(n, 0.0), v(n, 0.0) {}

  void apply(std::vector<double>& theta, const std::vector<double>& grad, std::size_t offset) {
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const std::size_t k = offset + i;
      m[k] = b1 * m[k] + (1 - b1) * grad[i];
      v[k] = b2 * v[k] + (1 - b2) * grad[i] * grad[i];
      theta[i] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
};

struct Eval {
  double loss = 0.0, accuracy = 0.0, mse = 0.0;
};

Eval evaluate_rows(const ApproxPolicy& p, const std::vector<SparseRow>& rows) {
  Eval e;
  if (rows.empty()) return e;
  const std::size_t f = p.num_features(), A = p.num_actions();
  std::vector<double> z(A);
  for (const SparseRow& r : rows) {
    std::fill(z.begin(), z.end(), 0.0);
    double v = 0.0;
    for (auto [i, xi] : r.x) {
      for (std::size_t a = 0; a < A; ++a) z[a] += p.policy_weights[a * f + i] * xi;
      v += p.value_weights[i] * xi;
    }
    const std::size_t best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const double zmax = z[best];
    double sum = 0.0;
    for (double zi : z) sum += std::exp(zi - zmax);
    e.loss += -(z[r.action] - zmax - std::log(sum));
    e.accuracy += best == r.action ? 1.0 : 0.0;
    e.mse += (v - r.target) * (v - r.target);
  }
  const double n = static_cast<double>(rows.size());
  e.loss /= n;
  e.accuracy /= n;
  e.mse /= n;
  return e;
}

}  // namespace

TrainResult train_bc(const BcDataset& dataset, const TrainConfig& config, double r_min) {
  if (dataset.rows.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (config.epochs < 0 || config.batch_size == 0 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("invalid training configuration");
  }
  const std::size_t f = dataset.encoder.dim();
  const std::size_t A = dataset.num_actions;
  for (const BcRow& r : dataset.rows) {
    if (r.features.size() != f) throw std::invalid_argument("dataset row has the wrong feature count");
    for (double x : r.features) {
      if (!std::isfinite(x)) throw std::invalid_argument("dataset contains non-finite features");
    }
    if (r.action >= A) throw std::invalid_argument("dataset action outside the action range");
    if (!std::isfinite(r.value)) throw std::invalid_argument("dataset contains non-finite values");
  }

  BcDataset train = dataset.subset(config.validation_trajectories, false);
  BcDataset valid = dataset.subset(config.validation_trajectories, true);
  if (config.skip_doomed) {
    for (BcDataset* d : {&train, &valid}) {
      std::erase_if(d->rows, [&](const BcRow& r) { return r.value <= r_min; });
    }
  }
  if (train.rows.empty()) throw std::invalid_argument("every row is held out for validation");

  ApproxPolicy p(dataset.encoder, A, r_min);
  p.trained_with = config;
  // Indicator columns stay unscaled so rows stay sparse.
  if (dataset.encoder.kind() == FeatureKind::Full) {
    const double n = static_cast<double>(train.rows.size());
    for (std::size_t i = 0; i < f; ++i) {
      const bool indicator = std::all_of(train.rows.begin(), train.rows.end(), [i](const BcRow& r) {
        return r.features[i] == 0.0 || r.features[i] == 1.0;
      });
      if (indicator) continue;
      double mu = 0.0;
      for (const BcRow& r : train.rows) mu += r.features[i];
      mu /= n;
      double var = 0.0;
      for (const BcRow& r : train.rows) var += (r.features[i] - mu) * (r.features[i] - mu);
      const double sd = std::sqrt(var / n);
      // Constant columns are centered only, so unseen values shift nothing.
      p.mean[i] = mu;
      if (sd > 1e-12) p.scale[i] = sd;
    }
  }

  const double value_unit = -r_min;
  const auto to_sparse = [&](const std::vector<BcRow>& rows) {
    std::vector<SparseRow> out;
    out.reserve(rows.size());
    for (const BcRow& r : rows) {
      SparseRow s{{}, r.action, std::max(r.value, r_min * dataset.encoder.horizon()) / value_unit};
      for (std::size_t i = 0; i < f; ++i) {
        const double x = (r.features[i] - p.mean[i]) / p.scale[i];
        if (x != 0.0) s.x.emplace_back(i, x);
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  const std::vector<SparseRow> tr = to_sparse(train.rows);
  const std::vector<SparseRow> va = to_sparse(valid.rows);

  Adam adam(A * f + f, config.learning_rate);
  std::vector<double> gw(A * f), gv(f), z(A);
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  std::uint64_t epoch_seed = config.seed;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    seeded_shuffle(order, epoch_seed++);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gv.begin(), gv.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const SparseRow& r = tr[order[k]];
        std::fill(z.begin(), z.end(), 0.0);
        double v = 0.0;
        for (auto [i, xi] : r.x) {
          for (std::size_t a = 0; a < A; ++a) z[a] += p.policy_weights[a * f + i] * xi;
          v += p.value_weights[i] * xi;
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& zi : z) sum += (zi = std::exp(zi - zmax));
        for (std::size_t a = 0; a < A; ++a) z[a] = z[a] / sum - (a == r.action ? 1.0 : 0.0);
        const double dv = 2.0 * config.value_weight * (v - r.target);
        for (auto [i, xi] : r.x) {
          for (std::size_t a = 0; a < A; ++a) gw[a * f + i] += inv * z[a] * xi;
          gv[i] += inv * dv * xi;
        }
      }
      if (config.l2 > 0.0) {
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += config.l2 * p.policy_weights[i];
        for (std::size_t i = 0; i < f; ++i) gv[i] += config.l2 * p.value_weights[i];
      }
      ++adam.step;
      adam.apply(p.policy_weights, gw, 0);
      adam.apply(p.value_weights, gv, A * f);
    }
    const Eval et = evaluate_rows(p, tr);
    EpochMetrics m{epoch, et.loss, et.accuracy, et.mse, std::nullopt, std::nullopt};
    if (!va.empty()) {
      const Eval ev = evaluate_rows(p, va);
      m.validation_accuracy = ev.accuracy;
      m.validation_value_mse = ev.mse;
    }
    result.history.push_back(m);
  }
  result.policy = std::move(p);
  return result;
}

double action_agreement(const ApproxPolicy& policy, const std::vector<BcRow>& rows, std::size_t available) {
  if (rows.empty()) return 0.0;
  std::size_t hits = 0;
  for (const BcRow& r : rows) hits += policy.best_action(r.features, available) == r.action ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace graspdp
