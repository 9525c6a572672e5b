#include "cofc/config.hpp"

#include "cofc/error.hpp"
#include "cofc/rng.hpp"
#include "cofc/structured_file.hpp"

#include <charconv>
#include <cstdlib>
#include <set>

namespace cofc {
namespace {

using nlohmann::json;

/// Reads keys from one table and rejects any it did not ask for.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw Error(ErrorCode::Config, "'" + name_ + "' must be a table");
    doc_ = &doc;
  }

  ~Section() noexcept(false) {
    if (!doc_ || std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : doc_->items()) {
      if (!seen_.contains(key)) throw Error(ErrorCode::Config, "unknown key '" + qualified(key) + "'");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!doc_ || !doc_->contains(key)) return nullptr;
    return &doc_->at(key);
  }

  Section table(const std::string& key) {
    if (const json* v = find(key)) return Section(*v, qualified(key));
    return Section(json(), qualified(key));
  }

  void number(const std::string& key, double& target) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      target = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& target) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "a non-negative integer");
      target = v->get<std::size_t>();
    }
  }

  void flag(const std::string& key, bool& target) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      target = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& target) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      target = v->get<std::string>();
    }
  }

  void sizes(const std::string& key, std::vector<int>& target) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->empty()) fail(key, "a non-empty list of layer sizes");
      std::vector<int> out;
      for (const auto& item : *v) {
        if (!item.is_number_integer() || item.get<long long>() <= 0) fail(key, "a list of positive integers");
        out.push_back(item.get<int>());
      }
      target = std::move(out);
    }
  }

  const json* raw() const { return doc_; }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const char* expected) const {
    throw Error(ErrorCode::Config, "'" + qualified(key) + "' must be " + expected);
  }

  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::string& value, const std::filesystem::path& base) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::Config, "referenced file not found: " + p.string());
  return p.lexically_normal();
}

void read_train(Section s, TrainSettings& t) {
  s.count("epochs", t.epochs);
  s.count("steps_per_epoch", t.steps_per_epoch);
  s.count("num_envs", t.num_envs);
  s.count("num_threads", t.num_threads);
  s.count("start_steps", t.start_steps);
  s.count("batch_size", t.batch_size);
  s.count("updates_per_epoch", t.updates_per_epoch);
  s.count("replay_capacity", t.replay_capacity);
  s.number("gamma", t.gamma);
  s.number("eps_T", t.eps_T);
  s.number("reward_scale", t.reward_scale);
  s.number("cost_scale", t.cost_scale);
  s.sizes("policy_hidden", t.policy_hidden);
  s.number("policy_learning_rate", t.policy_learning_rate);
  s.number("initial_log_std", t.initial_log_std);
  s.number("final_soc_tolerance", t.final_soc_tolerance);
}

void read_critic(Section s, CriticSettings& c) {
  s.sizes("hidden", c.hidden);
  s.number("learning_rate", c.learning_rate);
  s.number("polyak", c.polyak);
  s.number("max_grad_norm", c.max_grad_norm);
}

json train_to_json(const TrainSettings& t) {
  return {{"epochs", t.epochs},
          {"steps_per_epoch", t.steps_per_epoch},
          {"num_envs", t.num_envs},
          {"num_threads", t.num_threads},
          {"start_steps", t.start_steps},
          {"batch_size", t.batch_size},
          {"updates_per_epoch", t.updates_per_epoch},
          {"replay_capacity", t.replay_capacity},
          {"gamma", t.gamma},
          {"eps_T", t.eps_T},
          {"reward_scale", t.reward_scale},
          {"cost_scale", t.cost_scale},
          {"policy_hidden", t.policy_hidden},
          {"policy_learning_rate", t.policy_learning_rate},
          {"initial_log_std", t.initial_log_std},
          {"final_soc_tolerance", t.final_soc_tolerance}};
}

}  // namespace

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::Cvpo ? "cvpo" : "pid_lagrangian";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "pid_lagrangian") return Algorithm::PidLagrangian;
  if (name == "cvpo") return Algorithm::Cvpo;
  throw Error(ErrorCode::Config, "unknown algorithm '" + name + "' (expected pid_lagrangian or cvpo)");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.lagrangian.common.target_soc = cfg.corridor.balance;
  cfg.cvpo.common.target_soc = cfg.corridor.balance;
  return cfg;
}

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg = default_run_config();
  cfg.source = doc;
  Section root(doc, "");

  std::string algorithm = to_string(cfg.algorithm);
  root.text("algorithm", algorithm);
  cfg.algorithm = algorithm_from_string(algorithm);
  if (const json* v = root.find("seed")) {
    if (!v->is_number_integer() || v->get<long long>() < 0) {
      throw Error(ErrorCode::Config, "'seed' must be a non-negative integer");
    }
    cfg.seed = v->get<std::uint64_t>();
  }
  std::string output = cfg.output_dir.string();
  root.text("output_dir", output);
  cfg.output_dir = output;
  root.count("checkpoint_every", cfg.checkpoint_every);

  {
    Section cycle = root.table("cycle");
    std::string path;
    cycle.text("path", path);
    cfg.cycle_path = resolve(path, base_dir);
    Section trap = cycle.table("trapezoid");
    trap.number("duration_s", cfg.trapezoid.duration_s);
    trap.number("peak_kmh", cfg.trapezoid.peak_kmh);
    trap.number("ramp_s", cfg.trapezoid.ramp_s);
    trap.number("dt", cfg.trapezoid.dt);
  }
  {
    Section pt = root.table("powertrain");
    std::string path;
    pt.text("path", path);
    cfg.powertrain_path = resolve(path, base_dir);
    json inline_tables = json::object();
    for (const char* name : {"vehicle", "engine", "battery"}) {
      if (const json* v = pt.find(name)) inline_tables[name] = *v;
    }
    json merged = cfg.powertrain_path.empty() ? json::object() : load_structured_file(cfg.powertrain_path);
    merged.merge_patch(inline_tables);
    cfg.powertrain = powertrain_from_json(merged);
  }
  {
    Section c = root.table("corridor");
    c.number("high", cfg.corridor.high);
    c.number("low", cfg.corridor.low);
    c.number("balance", cfg.corridor.balance);
    c.count("ramp_out", cfg.corridor.ramp_out);
    c.count("ramp_in", cfg.corridor.ramp_in);
    c.count("horizon", cfg.corridor.horizon);
    c.flag("from_random_rollout", cfg.corridor_from_random_rollout);
  }

  TrainSettings common = cfg.lagrangian.common;
  read_train(root.table("train"), common);
  read_critic(root.table("critic"), common.critic);
  common.target_soc = cfg.corridor.balance;
  cfg.lagrangian.common = common;
  cfg.cvpo.common = common;
  {
    Section pid = root.table("pid");
    pid.number("kp", cfg.lagrangian.pid.kp);
    pid.number("ki", cfg.lagrangian.pid.ki);
    pid.number("kd", cfg.lagrangian.pid.kd);
  }
  {
    Section lag = root.table("lagrangian");
    lag.count("policy_delay", cfg.lagrangian.policy_delay);
    lag.number("noise_log_std", cfg.lagrangian.noise_log_std);
    lag.number("final_noise_log_std", cfg.lagrangian.final_noise_log_std);
    lag.count("noise_decay_epochs", cfg.lagrangian.noise_decay_epochs);
    lag.number("preactivation_penalty", cfg.lagrangian.preactivation_penalty);
  }
  {
    Section cv = root.table("cvpo");
    cv.number("eps2", cfg.cvpo.eps2);
    cv.number("eps_kl", cfg.cvpo.eps_kl);
    cv.count("num_action_samples", cfg.cvpo.num_action_samples);
    cv.count("e_step_batch", cfg.cvpo.e_step_batch);
    cv.count("policy_updates_per_epoch", cfg.cvpo.policy_updates_per_epoch);
    cv.count("m_step_iterations", cfg.cvpo.m_step_iterations);
    cv.number("kl_multiplier_rate", cfg.cvpo.kl_multiplier_rate);
    cv.number("preactivation_penalty", cfg.cvpo.preactivation_penalty);
    cv.number("min_log_std", cfg.cvpo.min_log_std);
    Section d = cv.table("dual");
    d.number("eta_min", cfg.cvpo.dual.eta_min);
    d.number("lambda_max", cfg.cvpo.dual.lambda_max);
    d.number("eta_init", cfg.cvpo.dual.eta_init);
    d.number("lambda_init", cfg.cvpo.dual.lambda_init);
    d.count("max_iterations", cfg.cvpo.dual.max_iterations);
    d.number("tolerance", cfg.cvpo.dual.tolerance);
  }
  {
    Section o = root.table("oracle");
    o.count("soc_levels", cfg.oracle.soc_levels);
    o.count("action_levels", cfg.oracle.action_levels);
    o.count("threads", cfg.oracle.threads);
    o.number("work_budget", cfg.oracle.work_budget);
    if (o.find("terminal_tolerance")) {
      double tol = 0.0;
      o.number("terminal_tolerance", tol);
      cfg.oracle.terminal_tolerance = tol;
    }
  }

  cfg.lagrangian.validate();
  cfg.cvpo.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Config, "config file not found: " + path.string());
  RunConfig cfg = run_config_from_json(load_structured_file(path.string()), path.parent_path());
  apply_seed_override(cfg);
  return cfg;
}

void apply_seed_override(RunConfig& config) {
  const char* env = std::getenv("COFC_SEED");
  if (!env || !*env) return;
  const std::string text(env);
  std::uint64_t seed = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorCode::Config, "COFC_SEED must be a non-negative integer, got '" + text + "'");
  }
  config.seed = seed;
}

json run_config_to_json(const RunConfig& cfg) {
  const auto& l = cfg.lagrangian;
  const auto& v = cfg.cvpo;
  const auto& crit = cfg.common().critic;
  const auto& pt = cfg.powertrain;
  json line = json::array();
  for (const auto& p : pt.engine.optimal_line) line.push_back({p.power, p.speed, p.torque, p.bsfc});
  json doc = {
      {"algorithm", to_string(cfg.algorithm)},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir.string()},
      {"checkpoint_every", cfg.checkpoint_every},
      {"cycle",
       {{"path", cfg.cycle_path.string()},
        {"trapezoid",
         {{"duration_s", cfg.trapezoid.duration_s},
          {"peak_kmh", cfg.trapezoid.peak_kmh},
          {"ramp_s", cfg.trapezoid.ramp_s},
          {"dt", cfg.trapezoid.dt}}}}},
      {"powertrain",
       {{"path", ""},
        {"vehicle",
         {{"mass", pt.vehicle.mass},
          {"drag_coeff", pt.vehicle.drag_coeff},
          {"frontal_area", pt.vehicle.frontal_area},
          {"air_density", pt.vehicle.air_density},
          {"rolling_coeff", pt.vehicle.rolling_coeff},
          {"gravity", pt.vehicle.gravity},
          {"driveline_efficiency", pt.vehicle.driveline_efficiency},
          {"regen_efficiency", pt.vehicle.regen_efficiency},
          {"max_regen_power", pt.vehicle.max_regen_power},
          {"accessory_load", pt.vehicle.accessory_load}}},
        {"engine",
         {{"idle_fuel_rate", pt.engine.idle_fuel_rate},
          {"max_power", pt.engine.max_power},
          {"on_threshold", pt.engine.on_threshold},
          {"optimal_line", line}}},
        {"battery",
         {{"capacity", pt.battery.capacity},
          {"nominal_voltage", pt.battery.nominal_voltage},
          {"max_charge_power", pt.battery.max_charge_power},
          {"max_discharge_power", pt.battery.max_discharge_power},
          {"coulombic_efficiency", pt.battery.coulombic_efficiency}}}}},
      {"corridor",
       {{"high", cfg.corridor.high},
        {"low", cfg.corridor.low},
        {"balance", cfg.corridor.balance},
        {"ramp_out", cfg.corridor.ramp_out},
        {"ramp_in", cfg.corridor.ramp_in},
        {"horizon", cfg.corridor.horizon},
        {"from_random_rollout", cfg.corridor_from_random_rollout}}},
      {"train", train_to_json(cfg.common())},
      {"critic",
       {{"hidden", crit.hidden},
        {"learning_rate", crit.learning_rate},
        {"polyak", crit.polyak},
        {"max_grad_norm", crit.max_grad_norm}}},
      {"pid", {{"kp", l.pid.kp}, {"ki", l.pid.ki}, {"kd", l.pid.kd}}},
      {"lagrangian",
       {{"policy_delay", l.policy_delay},
        {"noise_log_std", l.noise_log_std},
        {"final_noise_log_std", l.final_noise_log_std},
        {"noise_decay_epochs", l.noise_decay_epochs},
        {"preactivation_penalty", l.preactivation_penalty}}},
      {"cvpo",
       {{"eps2", v.eps2},
        {"eps_kl", v.eps_kl},
        {"num_action_samples", v.num_action_samples},
        {"e_step_batch", v.e_step_batch},
        {"policy_updates_per_epoch", v.policy_updates_per_epoch},
        {"m_step_iterations", v.m_step_iterations},
        {"kl_multiplier_rate", v.kl_multiplier_rate},
        {"preactivation_penalty", v.preactivation_penalty},
        {"min_log_std", v.min_log_std},
        {"dual",
         {{"eta_min", v.dual.eta_min},
          {"lambda_max", v.dual.lambda_max},
          {"eta_init", v.dual.eta_init},
          {"lambda_init", v.dual.lambda_init},
          {"max_iterations", v.dual.max_iterations},
          {"tolerance", v.dual.tolerance}}}}},
      {"oracle",
       {{"soc_levels", cfg.oracle.soc_levels},
        {"action_levels", cfg.oracle.action_levels},
        {"threads", cfg.oracle.threads},
        {"work_budget", cfg.oracle.work_budget}}},
  };
  if (cfg.oracle.terminal_tolerance) doc["oracle"]["terminal_tolerance"] = *cfg.oracle.terminal_tolerance;
  return doc;
}

TaskFactory Scenario::task_factory() const {
  return [scenario = *this] { return std::make_unique<HevTask>(scenario.make_env()); };
}

Scenario make_scenario(const RunConfig& config) {
  Scenario s;
  if (config.cycle_path.empty()) {
    const auto& t = config.trapezoid;
    s.cycle = std::make_shared<const DriveCycle>(make_trapezoid_cycle(t.duration_s, t.peak_kmh, t.ramp_s, t.dt));
  } else {
    s.cycle = std::make_shared<const DriveCycle>(load_cycle_file(config.cycle_path.string()));
  }
  s.powertrain = config.powertrain;
  s.corridor = config.corridor;
  if (s.corridor.horizon == 0) s.corridor.horizon = s.cycle->steps();
  if (s.corridor.horizon > s.cycle->steps()) {
    throw Error(ErrorCode::Config, "corridor horizon exceeds the number of cycle steps");
  }
  if (config.corridor_from_random_rollout) {
    // Allowed range from the envelope of a uniformly random engine-power rollout.
    HevEnv env(s.cycle, s.powertrain, {1.0, 0.0, s.corridor.balance, s.corridor.ramp_out, s.corridor.ramp_in,
                                       s.corridor.horizon});
    Rng rng(split_seed(config.seed, 0x5eed));
    std::vector<double> socs{env.reset(config.seed).soc};
    while (!env.done()) {
      socs.push_back(env.step(rng.uniform(0.0, s.powertrain.engine.max_power)).s_next.soc);
    }
    s.corridor = corridor_from_envelope(socs, s.corridor.balance, s.corridor.ramp_out, s.corridor.ramp_in,
                                        s.corridor.horizon);
  }
  s.corridor.validate();
  return s;
}

DpGrid make_dp_grid(const Scenario& scenario, const OracleSettings& settings) {
  DpGrid grid;
  grid.cycle = scenario.cycle;
  grid.params = scenario.powertrain;
  grid.corridor = scenario.corridor;
  grid.soc_levels = settings.soc_levels;
  grid.action_levels = settings.action_levels;
  grid.threads = settings.threads;
  grid.work_budget = settings.work_budget;
  grid.terminal_tolerance = settings.terminal_tolerance;
  return grid;
}

}  // namespace cofc
