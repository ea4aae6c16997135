#include "aebs/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace aebs {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) fail(field, why);
}

// Reads typed values from one JSON object and remembers which keys were
// consumed so leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) fail(name_, "must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(name_ + "." + key, "wrong type");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  std::optional<json> raw(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return std::nullopt;
    return *it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) fail(name_ + "." + it.key(), "unknown key");
    }
  }

  const std::string& name() const { return name_; }

 private:
  const json& obj_;
  std::string name_;
  std::set<std::string> used_;
};

void read_interval(Section& s, const char* key, double& lo, double& hi) {
  auto v = s.raw(key);
  if (!v) return;
  const std::string field = s.name() + "." + key;
  if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
    fail(field, "expected [min, max]");
  lo = (*v)[0].get<double>();
  hi = (*v)[1].get<double>();
}

// Accepts either a linear value (key) or a dBm value (key + "_dbm").
void read_power(Section& s, const char* key, double& watts) {
  const std::string dbm_key = std::string(key) + "_dbm";
  const bool lin = s.has(key);
  const bool log = s.has(dbm_key.c_str());
  if (lin && log) fail(s.name() + "." + key, "give either " + std::string(key) + " or " + dbm_key);
  s.get(key, watts);
  double dbm = 0.0;
  auto v = s.raw(dbm_key.c_str());
  if (v) {
    if (!v->is_number()) fail(s.name() + "." + dbm_key, "wrong type");
    dbm = v->get<double>();
    watts = dbm_to_watts(dbm);
  }
}

template <typename E>
E parse_enum(const std::string& field, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, e] : options)
    if (value == name) return e;
  std::string allowed;
  for (const auto& [name, e] : options) allowed += std::string(allowed.empty() ? "" : "|") + name;
  fail(field, "expected one of " + allowed);
}

}  // namespace

void NetworkConfig::validate() const {
  const std::string s = "network.";
  require(num_aebs >= 1, s + "K", "must be >= 1");
  require(num_gus >= 2 * num_aebs, s + "N", "must be >= 2K so every AeBS can serve two GUs");
  require(num_antennas >= 1, s + "Nt", "must be >= 1");
  require(x_max > x_min, s + "area_x", "max must exceed min");
  require(y_max > y_min, s + "area_y", "max must exceed min");
  require(altitude > 0.0, s + "H", "must be > 0");
  require(comm_radius > 0.0, s + "R_comm", "must be > 0");
  require(min_separation > 0.0, s + "d_min", "must be > 0");
  require(max_gus_per_aebs >= 2, s + "N_a", "must be >= 2");
  require(carrier_hz > 0.0, s + "fc", "must be > 0");
  require(light_speed > 0.0, s + "c_light", "must be > 0");
  require(eta > 0.0, s + "eta", "must be > 0");
  require(varsigma > 0.0, s + "varsigma", "must be > 0");
  require(noise_w > 0.0, s + "sigma2", "must be > 0");
  require(max_power_w > 0.0, s + "P_max", "must be > 0");
  require(common_blocklength >= 100, s + "Dc", "must be >= 100");
  require(private_blocklength >= 100, s + "Dp", "must be >= 100");
  require(decoding_error > 0.0 && decoding_error < 0.5, s + "eps_dec", "must lie in (0, 0.5)");
  require(min_rate >= 0.0, s + "R_min", "must be >= 0");
  require(lambda1 >= 0.0 && lambda2 >= 0.0, s + "lambda", "weights must be >= 0");
  require(rate_norm() > 0.0, s + "R_N", "must be > 0");
  const double max_d = std::hypot(altitude, area_diagonal());
  require(big_m_value() > max_d, s + "S_big", "must exceed the largest AeBS-GU distance");
}

void TrainConfig::validate(int diffusion_steps) const {
  require(trajectories >= 1, "train.M", "must be >= 1");
  require(timestep_samples >= 1 && timestep_samples <= std::max(1, diffusion_steps),
          "train.timestep_samples", "must lie in [1, T]");
  require(steps >= 0, "train.L", "must be >= 0");
  require(learning_rate > 0.0, "train.learning_rate", "must be > 0");
  require(batch_size >= 1, "train.batch_size", "must be >= 1");
  require(baseline_decay >= 0.0 && baseline_decay < 1.0, "train.baseline_decay", "must lie in [0, 1)");
  require(checkpoint_every >= 0, "train.checkpoint_every", "must be >= 0");
  for (double w : omega) require(w >= 0.0, "train.omega", "penalty weights must be >= 0");
}

void AppConfig::validate() const {
  network.validate();
  require(scenario.clusters >= 1, "scenario.clusters", "must be >= 1");
  require(scenario.cluster_radius > 0.0, "scenario.cluster_radius", "must be > 0");
  require(diffusion.steps >= 0, "diffusion.T", "must be >= 0");
  require(diffusion.grid >= 1, "diffusion.grid", "must be >= 1");
  require(diffusion.cosine_offset > 0.0, "diffusion.cosine_offset", "must be > 0");
  require(denoiser.layers >= 1, "denoiser.layers", "must be >= 1");
  require(denoiser.hidden >= 1, "denoiser.hidden", "must be >= 1");
  require(denoiser.heads >= 1 && denoiser.hidden % denoiser.heads == 0, "denoiser.heads",
          "must divide denoiser.hidden");
  require(denoiser.time_dim >= 2 && denoiser.time_dim % 2 == 0, "denoiser.time_dim",
          "must be a positive even number");
  train.validate(diffusion.steps);
  require(solve.k_max >= 1, "solve.k_max", "must be >= 1");
  require(solve.tau > 0.0, "solve.tau", "must be > 0");
  require(solve.sca_tau > 0.0, "solve.sca_tau", "must be > 0");
  require(solve.sca_max_iters >= 1, "solve.sca_max_iters", "must be >= 1");
}

AppConfig config_from_json(const json& doc) {
  AppConfig cfg;
  Section root(doc, "config");

  if (auto net = root.raw("network")) {
    Section s(*net, "network");
    auto& n = cfg.network;
    s.get("K", n.num_aebs);
    s.get("N", n.num_gus);
    s.get("Nt", n.num_antennas);
    read_interval(s, "area_x", n.x_min, n.x_max);
    read_interval(s, "area_y", n.y_min, n.y_max);
    s.get("H", n.altitude);
    s.get("R_comm", n.comm_radius);
    s.get("d_min", n.min_separation);
    s.get("N_a", n.max_gus_per_aebs);
    s.get("fc", n.carrier_hz);
    s.get("c_light", n.light_speed);
    s.get("zeta_los", n.zeta_los_db);
    s.get("zeta_nlos", n.zeta_nlos_db);
    s.get("eta", n.eta);
    s.get("varsigma", n.varsigma);
    read_power(s, "sigma2", n.noise_w);
    read_power(s, "P_max", n.max_power_w);
    s.get("Dc", n.common_blocklength);
    s.get("Dp", n.private_blocklength);
    s.get("eps_dec", n.decoding_error);
    s.get("R_min", n.min_rate);
    s.get("lambda1", n.lambda1);
    s.get("lambda2", n.lambda2);
    if (auto v = s.raw("R_N")) {
      if (!v->is_number()) fail("network.R_N", "wrong type");
      n.rate_normalization = v->get<double>();
    }
    if (auto v = s.raw("S_big")) {
      if (!v->is_number()) fail("network.S_big", "wrong type");
      n.big_m = v->get<double>();
    }
    s.finish();
  }

  if (auto sc = root.raw("scenario")) {
    Section s(*sc, "scenario");
    std::string layout = cfg.scenario.layout == GuLayout::Uniform ? "uniform" : "clustered";
    s.get("gu_layout", layout);
    cfg.scenario.layout = parse_enum<GuLayout>("scenario.gu_layout", layout,
                                               {{"uniform", GuLayout::Uniform}, {"clustered", GuLayout::Clustered}});
    s.get("clusters", cfg.scenario.clusters);
    s.get("cluster_radius", cfg.scenario.cluster_radius);
    s.get("seed", cfg.scenario.seed);
    s.finish();
  }

  if (auto d = root.raw("diffusion")) {
    Section s(*d, "diffusion");
    s.get("T", cfg.diffusion.steps);
    s.get("grid", cfg.diffusion.grid);
    std::string st = cfg.diffusion.stationary == Stationary::Uniform ? "uniform" : "marginal";
    s.get("stationary", st);
    cfg.diffusion.stationary = parse_enum<Stationary>("diffusion.stationary", st,
                                                      {{"uniform", Stationary::Uniform}, {"marginal", Stationary::Marginal}});
    s.get("cosine_offset", cfg.diffusion.cosine_offset);
    s.finish();
  }

  if (auto d = root.raw("denoiser")) {
    Section s(*d, "denoiser");
    s.get("layers", cfg.denoiser.layers);
    s.get("hidden", cfg.denoiser.hidden);
    s.get("heads", cfg.denoiser.heads);
    s.get("time_dim", cfg.denoiser.time_dim);
    s.get("init_seed", cfg.denoiser.init_seed);
    s.finish();
  }

  if (auto t = root.raw("train")) {
    Section s(*t, "train");
    auto& tr = cfg.train;
    s.get("M", tr.trajectories);
    s.get("timestep_samples", tr.timestep_samples);
    s.get("L", tr.steps);
    s.get("learning_rate", tr.learning_rate);
    s.get("batch_size", tr.batch_size);
    std::string mode = to_string(tr.reward_mode);
    s.get("reward_mode", mode);
    tr.reward_mode = parse_enum<RewardMode>("train.reward_mode", mode,
                                            {{"exact", RewardMode::Exact}, {"surrogate", RewardMode::Surrogate}});
    std::string opt = tr.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    s.get("optimizer", opt);
    tr.optimizer = parse_enum<OptimizerKind>("train.optimizer", opt,
                                             {{"adam", OptimizerKind::Adam}, {"sgd", OptimizerKind::Sgd}});
    std::string est = tr.estimator == Estimator::Eager ? "eager" : "per_step";
    s.get("estimator", est);
    tr.estimator = parse_enum<Estimator>("train.estimator", est,
                                         {{"eager", Estimator::Eager}, {"per_step", Estimator::PerStep}});
    s.get("baseline", tr.baseline);
    s.get("baseline_decay", tr.baseline_decay);
    s.get("checkpoint_every", tr.checkpoint_every);
    s.get("workers", tr.workers);
    if (auto v = s.raw("omega")) {
      if (!v->is_array() || v->size() != 4) fail("train.omega", "expected 4 weights");
      for (int i = 0; i < 4; ++i) {
        if (!(*v)[i].is_number()) fail("train.omega", "weights must be numbers");
        tr.omega[i] = (*v)[i].get<double>();
      }
    }
    s.finish();
  }

  if (auto v = root.raw("solve")) {
    Section s(*v, "solve");
    s.get("k_max", cfg.solve.k_max);
    s.get("tau", cfg.solve.tau);
    s.get("sca_tau", cfg.solve.sca_tau);
    s.get("sca_max_iters", cfg.solve.sca_max_iters);
    s.finish();
  }

  root.finish();
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const AppConfig& cfg) {
  const auto& n = cfg.network;
  json net = {
      {"K", n.num_aebs},
      {"N", n.num_gus},
      {"Nt", n.num_antennas},
      {"area_x", {n.x_min, n.x_max}},
      {"area_y", {n.y_min, n.y_max}},
      {"H", n.altitude},
      {"R_comm", n.comm_radius},
      {"d_min", n.min_separation},
      {"N_a", n.max_gus_per_aebs},
      {"fc", n.carrier_hz},
      {"c_light", n.light_speed},
      {"zeta_los", n.zeta_los_db},
      {"zeta_nlos", n.zeta_nlos_db},
      {"eta", n.eta},
      {"varsigma", n.varsigma},
      {"sigma2", n.noise_w},
      {"P_max", n.max_power_w},
      {"Dc", n.common_blocklength},
      {"Dp", n.private_blocklength},
      {"eps_dec", n.decoding_error},
      {"R_min", n.min_rate},
      {"lambda1", n.lambda1},
      {"lambda2", n.lambda2},
      {"R_N", n.rate_norm()},
      {"S_big", n.big_m_value()},
  };
  const auto& t = cfg.train;
  return {
      {"network", net},
      {"scenario",
       {{"gu_layout", cfg.scenario.layout == GuLayout::Uniform ? "uniform" : "clustered"},
        {"clusters", cfg.scenario.clusters},
        {"cluster_radius", cfg.scenario.cluster_radius},
        {"seed", cfg.scenario.seed}}},
      {"diffusion",
       {{"T", cfg.diffusion.steps},
        {"grid", cfg.diffusion.grid},
        {"stationary", cfg.diffusion.stationary == Stationary::Uniform ? "uniform" : "marginal"},
        {"cosine_offset", cfg.diffusion.cosine_offset}}},
      {"denoiser",
       {{"layers", cfg.denoiser.layers},
        {"hidden", cfg.denoiser.hidden},
        {"heads", cfg.denoiser.heads},
        {"time_dim", cfg.denoiser.time_dim},
        {"init_seed", cfg.denoiser.init_seed}}},
      {"train",
       {{"M", t.trajectories},
        {"timestep_samples", t.timestep_samples},
        {"L", t.steps},
        {"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"reward_mode", to_string(t.reward_mode)},
        {"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
        {"estimator", t.estimator == Estimator::Eager ? "eager" : "per_step"},
        {"baseline", t.baseline},
        {"baseline_decay", t.baseline_decay},
        {"checkpoint_every", t.checkpoint_every},
        {"workers", t.workers},
        {"omega", t.omega}}},
      {"solve",
       {{"k_max", cfg.solve.k_max},
        {"tau", cfg.solve.tau},
        {"sca_tau", cfg.solve.sca_tau},
        {"sca_max_iters", cfg.solve.sca_max_iters}}},
  };
}

const char* to_string(RewardMode m) { return m == RewardMode::Exact ? "exact" : "surrogate"; }

RewardMode reward_mode_from_string(const std::string& s) {
  return parse_enum<RewardMode>("reward-mode", s, {{"exact", RewardMode::Exact}, {"surrogate", RewardMode::Surrogate}});
}

}  // namespace aebs
