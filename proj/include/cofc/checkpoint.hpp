#pragma once

#include "cofc/adam.hpp"
#include "cofc/critics.hpp"
#include "cofc/cvpo.hpp"
#include "cofc/lagrangian.hpp"
#include "cofc/policy.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace cofc {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to replay a policy, plus the learner state it was
/// trained with. Doubles are stored in shortest round-trip form so a
/// save/load cycle reproduces every bit.
struct Checkpoint {
  std::string algorithm;
  std::size_t epoch = 0;
  std::string kind;  // "best", "final", "periodic"
  GaussianPolicy policy;
  std::optional<Critics> critics;
  std::optional<Adam> policy_optimizer;
  std::optional<MStepState> m_step;
  std::optional<PidDualState> pid;
  std::optional<DualPoint> cvpo_duals;
  std::string rng_state;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json mlp_to_json(const MlpD& net);
MlpD mlp_from_json(const nlohmann::json& doc);
nlohmann::json adam_to_json(const Adam& adam);
Adam adam_from_json(const nlohmann::json& doc);

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

/// Writes through a temporary file and renames, so an interrupted write
/// never leaves a truncated checkpoint behind.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cofc
