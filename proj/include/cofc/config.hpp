#pragma once

#include "cofc/cvpo.hpp"
#include "cofc/drive_cycle.hpp"
#include "cofc/env.hpp"
#include "cofc/lagrangian.hpp"
#include "cofc/oracle.hpp"
#include "cofc/powertrain.hpp"
#include "cofc/task.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace cofc {

enum class Algorithm { PidLagrangian, Cvpo };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

/// Synthetic 0 -> peak -> 0 cycle used when no cycle file is given.
struct TrapezoidSpec {
  double duration_s = 200.0;
  double peak_kmh = 50.0;
  double ramp_s = 40.0;
  double dt = 1.0;
};

struct OracleSettings {
  std::size_t soc_levels = 201;
  std::size_t action_levels = 21;
  std::size_t threads = 1;
  double work_budget = 5e8;
  std::optional<double> terminal_tolerance;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::PidLagrangian;
  std::uint64_t seed = 16;
  std::filesystem::path output_dir = "runs/latest";
  std::size_t checkpoint_every = 10;  // epochs; 0 keeps only best and final

  std::filesystem::path cycle_path;  // empty: trapezoid
  TrapezoidSpec trapezoid;
  std::filesystem::path powertrain_path;  // empty: defaults plus inline tables
  PowertrainParams powertrain = default_powertrain();
  SocCorridor corridor{0.55, 0.45, 0.5, 40, 160, 0};  // horizon 0: whole cycle
  bool corridor_from_random_rollout = false;

  LagrangianSettings lagrangian;
  CvpoSettings cvpo;
  OracleSettings oracle;

  /// The merged document the config was read from (echoed into checkpoints).
  nlohmann::json source = nlohmann::json::object();

  TrainSettings& common() {
    return algorithm == Algorithm::Cvpo ? cvpo.common : lagrangian.common;
  }
  const TrainSettings& common() const {
    return algorithm == Algorithm::Cvpo ? cvpo.common : lagrangian.common;
  }
};

/// Defaults used when a key is absent; the committed default.toml spells
/// out the same values.
RunConfig default_run_config();

/// Reads TOML or JSON. Relative file paths inside resolve against the
/// config file's directory. `COFC_SEED` in the environment overrides the seed.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// The config as a JSON document with every setting spelled out.
nlohmann::json run_config_to_json(const RunConfig& config);

/// Applies `COFC_SEED` if set; throws Config on a malformed value.
void apply_seed_override(RunConfig& config);

/// Environment pieces resolved from a config.
struct Scenario {
  std::shared_ptr<const DriveCycle> cycle;
  PowertrainParams powertrain;
  SocCorridor corridor;

  HevEnv make_env() const { return HevEnv(cycle, powertrain, corridor); }
  TaskFactory task_factory() const;
};

Scenario make_scenario(const RunConfig& config);

DpGrid make_dp_grid(const Scenario& scenario, const OracleSettings& settings);

}  // namespace cofc
