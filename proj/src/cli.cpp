#include "cofc/cli.hpp"

#include "cofc/checkpoint.hpp"
#include "cofc/config.hpp"
#include "cofc/error.hpp"
#include "cofc/plot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace cofc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) { g_stop.store(true); }

/// Restores the previous SIGINT handler on scope exit.
class InterruptGuard {
 public:
  InterruptGuard() {
    g_stop.store(false);
    previous_ = std::signal(SIGINT, on_interrupt);
  }
  ~InterruptGuard() { std::signal(SIGINT, previous_); }
  InterruptGuard(const InterruptGuard&) = delete;
  InterruptGuard& operator=(const InterruptGuard&) = delete;

 private:
  void (*previous_)(int) = SIG_DFL;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// The Table 1 column set for one deterministic episode.
json episode_summary_json(const EpisodeSummary& s, double distance_km) {
  return {{"reward", number_or_null(s.reward)},
          {"fuel_g", number_or_null(s.fuel_g)},
          {"fuel_l_per_100km", number_or_null(fuel_economy(s.fuel_g, distance_km))},
          {"cost", number_or_null(s.cost)},
          {"final_soc", number_or_null(s.final_soc)},
          {"steps", s.steps},
          {"distance_km", distance_km}};
}

struct EvalOutcome {
  EpisodeSummary summary;
  std::vector<EpisodeLogRow> log;
};

EvalOutcome run_episode(const Scenario& scenario, const GaussianPolicy& policy, std::optional<std::uint64_t> sample_seed) {
  HevTask task(scenario.make_env(), true);
  EvalOutcome outcome;
  if (!sample_seed) {
    outcome.summary = evaluate_policy(task, policy);
  } else {
    Rng rng(*sample_seed);
    Eigen::VectorXd obs = task.reset();
    EpisodeSummary& s = outcome.summary;
    for (std::size_t k = 0; k < task.horizon(); ++k) {
      const TaskStep step = task.step(policy.sample(obs, rng));
      s.reward += step.r;
      s.cost += step.c;
      ++s.steps;
      obs = step.s_next;
      if (step.done) break;
    }
    s.fuel_g = task.metrics().fuel_g;
    s.final_soc = task.metrics().final_soc;
  }
  outcome.log = task.log();
  return outcome;
}

template <typename Trainer>
Checkpoint snapshot(const Trainer& trainer, const RunConfig& cfg, std::size_t epoch, const std::string& kind,
                    const GaussianPolicy& policy, json summary) {
  Checkpoint ck;
  ck.algorithm = to_string(cfg.algorithm);
  ck.epoch = epoch;
  ck.kind = kind;
  ck.policy = policy;
  ck.critics = trainer.critics();
  ck.rng_state = trainer.rng().state();
  ck.summary = std::move(summary);
  ck.config = run_config_to_json(cfg);
  if constexpr (std::is_same_v<Trainer, LagrangianTrainer>) {
    ck.policy_optimizer = trainer.policy_optimizer();
    ck.pid = trainer.dual();
  } else {
    ck.m_step = trainer.m_step_state();
    ck.cvpo_duals = trainer.duals();
  }
  return ck;
}

template <typename Trainer>
int train_with(Trainer& trainer, const RunConfig& cfg, const Scenario& scenario, std::ostream& out) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "config.json", run_config_to_json(cfg).dump(2) + "\n");
  const double distance = cycle_stats(*scenario.cycle).distance_km;
  const auto& common = cfg.common();

  InterruptGuard guard;
  TrainHooks hooks;
  hooks.stop = &g_stop;
  hooks.on_epoch = [&](const EpochRecord& r, bool improved) {
    out << "epoch " << r.epoch << "  Jr " << r.mean_reward << "  Jc " << r.mean_cost << "  lambda " << r.lambda
        << "  test fuel " << r.fuel_g << " g  test cost " << r.test_cost << "  soc " << r.final_soc
        << (improved ? "  *" : "") << '\n';
    if (improved) {
      EpisodeSummary s{r.test_reward, r.test_cost, r.fuel_g, r.final_soc, 0};
      save_checkpoint(snapshot(trainer, cfg, r.epoch, "best", trainer.policy(), episode_summary_json(s, distance)),
                      dir / "best.ckpt");
    }
    if (cfg.checkpoint_every > 0 && r.epoch % cfg.checkpoint_every == 0) {
      save_checkpoint(snapshot(trainer, cfg, r.epoch, "periodic", trainer.policy(), json::object()),
                      dir / "latest.ckpt");
    }
  };

  const TrainingResult result = trainer.train(hooks);
  const bool interrupted = g_stop.load();
  const std::size_t epochs_done = result.trace.size();
  save_checkpoint(snapshot(trainer, cfg, epochs_done, "final", result.final_policy, json::object()),
                  dir / "final.ckpt");
  {
    std::ofstream trace = open_output(dir / "trace.csv");
    write_trace(result.trace, cfg.algorithm == Algorithm::Cvpo, trace);
  }
  if (epochs_done == 0) throw Error(ErrorCode::EmptyEpisode, "training stopped before the first epoch");

  const EvalOutcome best = run_episode(scenario, result.best_policy, std::nullopt);
  {
    std::ofstream log = open_output(dir / "best_episode.csv");
    write_episode_log(best.log, log);
  }
  json summary = episode_summary_json(best.summary, distance);
  summary["algorithm"] = to_string(cfg.algorithm);
  summary["seed"] = cfg.seed;
  summary["best_epoch"] = result.best_epoch;
  summary["feasible"] = best.summary.cost <= common.eps_T;
  summary["eps_T"] = common.eps_T;
  summary["epochs_completed"] = epochs_done;
  summary["interrupted"] = interrupted;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Scenario scenario = make_scenario(cfg);
  if (cfg.algorithm == Algorithm::Cvpo) {
    CvpoTrainer trainer(cfg.cvpo, scenario.task_factory(), cfg.seed);
    return train_with(trainer, cfg, scenario, out);
  }
  LagrangianTrainer trainer(cfg.lagrangian, scenario.task_factory(), cfg.seed);
  return train_with(trainer, cfg, scenario, out);
}

int cmd_eval(const fs::path& checkpoint_path, const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> sample_seed, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  } else {
    // File paths stored in the checkpoint were already resolved when it was written.
    cfg = run_config_from_json(ck.config, fs::current_path());
  }
  const Scenario scenario = make_scenario(cfg);
  if (ck.policy.obs_dim() != 3) throw Error(ErrorCode::ShapeMismatch, "checkpoint policy is not an HEV policy");
  const EvalOutcome outcome = run_episode(scenario, ck.policy, sample_seed);
  const fs::path dir = out_dir.empty() ? checkpoint_path.parent_path() : fs::path(out_dir);
  {
    std::ofstream log = open_output(dir / "episode.csv");
    write_episode_log(outcome.log, log);
  }
  json summary = episode_summary_json(outcome.summary, cycle_stats(*scenario.cycle).distance_km);
  summary["checkpoint"] = checkpoint_path.string();
  summary["checkpoint_epoch"] = ck.epoch;
  summary["feasible"] = outcome.summary.cost <= cfg.common().eps_T;
  summary["stochastic"] = sample_seed.has_value();
  write_text(dir / "eval_summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  const Scenario scenario = make_scenario(cfg);
  const DpGrid grid = make_dp_grid(scenario, cfg.oracle);
  const DpSolution sol = dp_solve(grid);
  const fs::path dir = cfg.output_dir;
  {
    std::ofstream traj = open_output(dir / "oracle_trajectory.csv");
    write_dp_trajectory(sol, traj);
  }
  const double distance = cycle_stats(*scenario.cycle).distance_km;
  json summary = {{"min_fuel_g", sol.min_fuel},
                  {"fuel_l_per_100km", fuel_economy(sol.min_fuel, distance)},
                  {"realized_fuel_g", sol.realized_fuel},
                  {"final_soc", sol.final_soc},
                  {"feasible", sol.feasible},
                  {"soc_levels", grid.soc_levels},
                  {"action_levels", grid.action_levels},
                  {"steps", grid.corridor.horizon},
                  {"terminal_tolerance", grid.terminal_window()},
                  {"distance_km", distance}};
  write_text(dir / "oracle_summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_plot(const std::string& trace, const std::string& episode, std::string output, std::ostream& out) {
  const bool is_trace = !trace.empty();
  const fs::path input = is_trace ? fs::path(trace) : fs::path(episode);
  std::ifstream in(input, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot open " + input.string());
  const CsvTable table = read_csv_table(in);
  const auto panels = is_trace ? trace_panels(table) : episode_panels(table);
  if (output.empty()) output = fs::path(input).replace_extension(".svg").string();
  write_text(output, render_svg(panels));
  out << output << '\n';
  return kExitOk;
}

void report(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained-RL workbench for HEV energy management"};
  app.require_subcommand(1);

  std::string config_path, algo, out_dir, checkpoint, trace, episode, svg;
  std::optional<std::uint64_t> seed, epochs, sample_seed;
  std::optional<std::size_t> soc_levels, action_levels;

  auto* train = app.add_subcommand("train", "Train a policy and write trace, checkpoints and summary");
  train->add_option("--config", config_path, "TOML or JSON run configuration");
  train->add_option("--algo", algo, "pid_lagrangian or cvpo (overrides the config)");
  train->add_option("--seed", seed, "Root seed (overrides config and COFC_SEED)");
  train->add_option("--epochs", epochs, "Number of epochs (overrides the config)");
  train->add_option("--out", out_dir, "Output directory (overrides the config)");

  auto* eval = app.add_subcommand("eval", "Replay a checkpointed policy for one episode");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--config", config_path, "Run configuration (default: the one stored in the checkpoint)");
  eval->add_option("--out", out_dir, "Output directory (default: next to the checkpoint)");
  eval->add_option("--sample-seed", sample_seed, "Sample actions from the policy with this seed");

  auto* oracle = app.add_subcommand("oracle", "Solve the discretized instance by dynamic programming");
  oracle->add_option("--config", config_path, "TOML or JSON run configuration");
  oracle->add_option("--out", out_dir, "Output directory (overrides the config)");
  oracle->add_option("--soc-levels", soc_levels, "SOC grid size");
  oracle->add_option("--action-levels", action_levels, "Engine power grid size");

  auto* plot = app.add_subcommand("plot", "Render a trace or episode CSV to SVG");
  auto* trace_opt = plot->add_option("--trace", trace, "Training trace CSV");
  auto* episode_opt = plot->add_option("--episode", episode, "Episode log CSV");
  plot->add_option("--out", svg, "Output SVG path (default: input with .svg)");
  trace_opt->excludes(episode_opt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report(err, "Usage", e.what());
    return kExitConfig;
  }

  try {
    auto load = [&] {
      RunConfig cfg;
      if (config_path.empty()) {
        cfg = default_run_config();
        apply_seed_override(cfg);
      } else {
        cfg = load_run_config(config_path);
      }
      if (!algo.empty()) cfg.algorithm = algorithm_from_string(algo);
      if (seed) cfg.seed = *seed;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      return cfg;
    };
    if (*train) {
      RunConfig cfg = load();
      if (epochs) {
        if (*epochs == 0) throw Error(ErrorCode::Config, "epochs must be positive");
        cfg.lagrangian.common.epochs = *epochs;
        cfg.cvpo.common.epochs = *epochs;
      }
      return cmd_train(cfg, out);
    }
    if (*eval) return cmd_eval(checkpoint, config_path, out_dir, sample_seed, out);
    if (*oracle) {
      RunConfig cfg = load();
      if (soc_levels) cfg.oracle.soc_levels = *soc_levels;
      if (action_levels) cfg.oracle.action_levels = *action_levels;
      return cmd_oracle(cfg, out);
    }
    if (trace.empty() && episode.empty()) throw Error(ErrorCode::Config, "plot needs --trace or --episode");
    return cmd_plot(trace, episode, svg, out);
  } catch (const Error& e) {
    report(err, std::string(to_string(e.code())), e.what());
    return e.code() == ErrorCode::Config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    report(err, "Internal", e.what());
    return kExitRuntime;
  }
}

}  // namespace cofc
