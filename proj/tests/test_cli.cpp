#include "cofc/checkpoint.hpp"
#include "cofc/cli.hpp"
#include "cofc/config.hpp"
#include "cofc/error.hpp"
#include "cofc/plot.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace cofc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cofc_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

// A few quick epochs on the default trapezoid scenario.
fs::path small_config(const fs::path& dir, const std::string& algorithm) {
  const json doc = {
      {"algorithm", algorithm},
      {"seed", 3},
      {"powertrain", {{"path", COFC_SOURCE_DIR "/config/default_hev.toml"}}},
      {"train",
       {{"epochs", 4},
        {"steps_per_epoch", 200},
        {"num_envs", 2},
        {"start_steps", 200},
        {"batch_size", 32},
        {"updates_per_epoch", 5},
        {"policy_hidden", {16}}}},
      {"critic", {{"hidden", {16, 16}}}},
      {"cvpo", {{"e_step_batch", 8}, {"num_action_samples", 8}, {"policy_updates_per_epoch", 2}}}};
  const fs::path p = dir / ("small_" + algorithm + ".json");
  std::ofstream(p) << doc.dump(2);
  return p;
}

}  // namespace

TEST_CASE("committed default.toml mirrors the built-in defaults") {
  const RunConfig file = load_run_config(COFC_SOURCE_DIR "/config/default.toml");
  CHECK(run_config_to_json(file) == run_config_to_json(default_run_config()));
  CHECK(file.lagrangian.common.target_soc == 0.5);
  CHECK(file.cvpo.common.target_soc == 0.5);
}

TEST_CASE("config errors") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "bad.toml") << "[train]\nepochs = \"many\"\n";
  CHECK_THROWS_AS(load_run_config(dir / "bad.toml"), Error);
  std::ofstream(dir / "gamma.toml") << "[train]\ngamma = 1.5\n";
  CHECK_THROWS_AS(load_run_config(dir / "gamma.toml"), Error);
  CHECK_THROWS_AS(load_run_config(dir / "missing.toml"), Error);
  CHECK(run({"train", "--config", (dir / "bad.toml").string()}) == kExitConfig);
  CHECK(algorithm_from_string("cvpo") == Algorithm::Cvpo);
  CHECK_THROWS_AS(algorithm_from_string("ppo"), Error);
}

TEST_CASE("seed override from the environment") {
  RunConfig cfg = default_run_config();
  ::setenv("COFC_SEED", "77", 1);
  apply_seed_override(cfg);
  CHECK(cfg.seed == 77);
  ::setenv("COFC_SEED", "seventy", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg), Error);
  ::unsetenv("COFC_SEED");
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(9);
  Checkpoint ck;
  ck.algorithm = "cvpo";
  ck.epoch = 12;
  ck.kind = "best";
  ck.policy = GaussianPolicy(3, {8, 8}, -1.234567890123);
  ck.policy.initialize(rng);
  Critics critics(3, CriticSettings{{8}, 1e-3, 0.02, 10.0});
  critics.initialize(rng);
  Eigen::VectorXd grad = Eigen::VectorXd::Random(critics.reward.params().size());
  critics.reward_optimizer.step(critics.reward.params(), grad);
  ck.critics = critics;
  ck.policy_optimizer = Adam(ck.policy.mean_net().params().size(), 3e-4, 5.0);
  ck.m_step = make_m_step_state(ck.policy, 1e-3);
  ck.m_step->kl_multiplier = 0.1 + 1e-17;
  ck.pid = PidDualState{{1.0, 0.5, 0.25}, 0.3, 0.7, 1.0 / 3.0, true};
  ck.cvpo_duals = DualPoint{0.123456789, 2.0 / 7.0};
  rng.normal();
  ck.rng_state = rng.state();
  ck.summary = {{"fuel_g", 35.9}};

  const fs::path dir = scratch("checkpoint");
  save_checkpoint(ck, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.policy.mean_net().params() == ck.policy.mean_net().params());
  CHECK(back.policy.raw_log_std() == ck.policy.raw_log_std());
  REQUIRE(back.critics);
  CHECK(back.critics->reward.params() == critics.reward.params());
  CHECK(back.critics->cost_target.params() == critics.cost_target.params());
  CHECK(back.critics->reward_optimizer.state().second_moment ==
        critics.reward_optimizer.state().second_moment);
  CHECK(back.pid->prev_cost == ck.pid->prev_cost);
  CHECK(back.cvpo_duals->lambda == ck.cvpo_duals->lambda);
  CHECK(back.m_step->kl_multiplier == ck.m_step->kl_multiplier);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(ck));
  save_checkpoint(back, dir / "b.ckpt");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
}

TEST_CASE("usage errors exit with the config status") {
  std::string err;
  CHECK(run({}, &err) == kExitConfig);
  CHECK(json::parse(err).contains("error"));
  CHECK(run({"fly"}) == kExitConfig);
  CHECK(run({"eval"}) == kExitConfig);
  CHECK(run({"plot"}) == kExitConfig);
  CHECK(run({"train", "--algo", "sarsa"}) == kExitConfig);
}

TEST_CASE("runtime failures exit with status 3") {
  const fs::path dir = scratch("runtime");
  std::string err;
  CHECK(run({"oracle", "--out", dir.string(), "--soc-levels", "1000000"}, &err) == kExitRuntime);
  CHECK(json::parse(err).at("error").at("code") == "InstanceTooLarge");
  // A checkpoint that does not parse is bad input.
  std::ofstream(dir / "broken.ckpt") << "{\"version\": 1}";
  CHECK(run({"eval", "--checkpoint", (dir / "broken.ckpt").string()}) == kExitConfig);
}

TEST_CASE("plotting an empty trace writes nothing") {
  const fs::path dir = scratch("plot");
  std::ofstream(dir / "trace.csv") << "epoch,mean_Jr,mean_Jc,lambda,fuel_g,final_soc\n";
  CHECK(run({"plot", "--trace", (dir / "trace.csv").string()}) == kExitConfig);
  CHECK_FALSE(fs::exists(dir / "trace.svg"));
  std::ofstream(dir / "empty.csv") << "";
  CHECK(run({"plot", "--trace", (dir / "empty.csv").string(), "--out", (dir / "x.svg").string()}) == kExitConfig);
  CHECK_FALSE(fs::exists(dir / "x.svg"));
}

TEST_CASE("train, eval, plot") {
  const fs::path dir = scratch("train");
  const fs::path cfg = small_config(dir, "pid_lagrangian");
  const fs::path run_dir = dir / "run";
  REQUIRE(run({"train", "--config", cfg.string(), "--out", run_dir.string()}) == kExitOk);
  for (const char* f : {"trace.csv", "summary.json", "best.ckpt", "final.ckpt", "best_episode.csv"}) {
    CHECK(fs::exists(run_dir / f));
  }
  const json summary = json::parse(slurp(run_dir / "summary.json"));
  for (const char* key : {"reward", "fuel_g", "fuel_l_per_100km", "cost", "final_soc"}) {
    CHECK(summary.contains(key));
  }
  const double distance = cycle_stats(make_trapezoid_cycle(200.0, 50.0, 40.0)).distance_km;
  const double l100 = summary.at("fuel_g").get<double>() / 720.0 / distance * 100.0;
  CHECK(std::abs(summary.at("fuel_l_per_100km").get<double>() - l100) <= 0.01);

  std::istringstream trace(slurp(run_dir / "trace.csv"));
  const CsvTable table = read_csv_table(trace);
  CHECK(table.rows() == 4);
  for (const char* col : {"epoch", "mean_Jr", "mean_Jc", "lambda", "fuel_g", "final_soc"}) CHECK(table.has(col));

  REQUIRE(run({"eval", "--checkpoint", (run_dir / "best.ckpt").string(), "--out", (dir / "eval").string()}) ==
          kExitOk);
  CHECK(fs::exists(dir / "eval" / "episode.csv"));
  CHECK(fs::exists(dir / "eval" / "eval_summary.json"));

  CHECK(run({"plot", "--trace", (run_dir / "trace.csv").string()}) == kExitOk);
  CHECK(slurp(run_dir / "trace.svg").find("<svg") != std::string::npos);
  CHECK(run({"plot", "--episode", (dir / "eval" / "episode.csv").string()}) == kExitOk);
  CHECK(fs::exists(dir / "eval" / "episode.svg"));
}

TEST_CASE("identical config and seed give identical traces") {
  for (const std::string algo : {"pid_lagrangian", "cvpo"}) {
    const fs::path dir = scratch("determinism_" + algo);
    const fs::path cfg = small_config(dir, algo);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitOk);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "b").string()}) == kExitOk);
    const std::string a = slurp(dir / "a" / "trace.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b" / "trace.csv"));
    if (algo == "cvpo") CHECK(a.find("eta") != std::string::npos);
  }
}

TEST_CASE("an untrained policy violates the corridor") {
  const fs::path dir = scratch("untrained");
  RunConfig cfg = default_run_config();
  Rng rng(16);
  Checkpoint ck;
  ck.algorithm = "pid_lagrangian";
  ck.kind = "final";
  ck.policy = GaussianPolicy(3, {64, 64}, -1.6);
  ck.policy.initialize(rng);
  ck.config = run_config_to_json(cfg);
  save_checkpoint(ck, dir / "random.ckpt");
  REQUIRE(run({"eval", "--checkpoint", (dir / "random.ckpt").string(), "--out", (dir / "eval").string()}) ==
          kExitOk);
  const json s = json::parse(slurp(dir / "eval" / "eval_summary.json"));
  CHECK(s.at("cost").get<double>() > cfg.lagrangian.common.eps_T);
  CHECK(std::abs(s.at("final_soc").get<double>() - 0.5) > 0.05);
}

TEST_CASE("oracle command") {
  const fs::path dir = scratch("oracle");
  REQUIRE(run({"oracle", "--out", dir.string(), "--soc-levels", "101", "--action-levels", "11"}) == kExitOk);
  const json s = json::parse(slurp(dir / "oracle_summary.json"));
  CHECK(s.at("min_fuel_g").get<double>() > 0.0);
  CHECK(fs::exists(dir / "oracle_trajectory.csv"));
}
