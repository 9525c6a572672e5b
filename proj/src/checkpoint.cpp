#include "cofc/checkpoint.hpp"

#include "cofc/error.hpp"

#include <fstream>

namespace cofc {
namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json policy_to_json(const GaussianPolicy& policy) {
  return {{"mean", mlp_to_json(policy.mean_net())}, {"log_std", policy.raw_log_std()}};
}

GaussianPolicy policy_from_json(const json& doc) {
  GaussianPolicy policy;
  policy.mean_net() = mlp_from_json(doc.at("mean"));
  policy.set_log_std(doc.at("log_std").get<double>());
  return policy;
}

}  // namespace

json mlp_to_json(const MlpD& net) {
  return {{"layers", net.layer_sizes()},
          {"hidden_activation", to_string(net.hidden_activation())},
          {"output_activation", to_string(net.output_activation())},
          {"params", vector_to_json(net.params())}};
}

MlpD mlp_from_json(const json& doc) {
  MlpD net(doc.at("layers").get<std::vector<int>>(),
           activation_from_string(doc.at("hidden_activation").get<std::string>()),
           activation_from_string(doc.at("output_activation").get<std::string>()));
  Eigen::VectorXd params = vector_from_json(doc.at("params"));
  if (params.size() != net.params().size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter count does not match the layer sizes");
  }
  net.params() = std::move(params);
  return net;
}

json adam_to_json(const Adam& adam) {
  return {{"learning_rate", adam.learning_rate()},
          {"max_grad_norm", adam.max_grad_norm()},
          {"steps", adam.state().steps},
          {"first_moment", vector_to_json(adam.state().first_moment)},
          {"second_moment", vector_to_json(adam.state().second_moment)}};
}

Adam adam_from_json(const json& doc) {
  Eigen::VectorXd m = vector_from_json(doc.at("first_moment"));
  Adam adam(m.size(), doc.at("learning_rate").get<double>(), doc.at("max_grad_norm").get<double>());
  adam.state().first_moment = std::move(m);
  adam.state().second_moment = vector_from_json(doc.at("second_moment"));
  adam.state().steps = doc.at("steps").get<long>();
  return adam;
}

json checkpoint_to_json(const Checkpoint& ck) {
  json doc = {{"format", "cofc-checkpoint"},
              {"version", kCheckpointVersion},
              {"algorithm", ck.algorithm},
              {"epoch", ck.epoch},
              {"kind", ck.kind},
              {"policy", policy_to_json(ck.policy)},
              {"rng", ck.rng_state},
              {"summary", ck.summary},
              {"config", ck.config}};
  if (ck.critics) {
    const Critics& c = *ck.critics;
    doc["critics"] = {{"reward", mlp_to_json(c.reward)},
                      {"cost", mlp_to_json(c.cost)},
                      {"reward_target", mlp_to_json(c.reward_target)},
                      {"cost_target", mlp_to_json(c.cost_target)},
                      {"reward_optimizer", adam_to_json(c.reward_optimizer)},
                      {"cost_optimizer", adam_to_json(c.cost_optimizer)},
                      {"polyak", c.polyak}};
  }
  if (ck.policy_optimizer) doc["policy_optimizer"] = adam_to_json(*ck.policy_optimizer);
  if (ck.m_step) {
    doc["m_step"] = {{"mean_optimizer", adam_to_json(ck.m_step->mean_optimizer)},
                     {"log_std_optimizer", adam_to_json(ck.m_step->log_std_optimizer)},
                     {"kl_multiplier", ck.m_step->kl_multiplier}};
  }
  if (ck.pid) {
    doc["pid"] = {{"kp", ck.pid->gains.kp},
                  {"ki", ck.pid->gains.ki},
                  {"kd", ck.pid->gains.kd},
                  {"lambda", ck.pid->lambda},
                  {"integral", ck.pid->integral},
                  {"prev_cost", ck.pid->prev_cost},
                  {"has_prev", ck.pid->has_prev}};
  }
  if (ck.cvpo_duals) doc["cvpo_duals"] = {{"eta", ck.cvpo_duals->eta}, {"lambda", ck.cvpo_duals->lambda}};
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "cofc-checkpoint") {
      throw Error(ErrorCode::Config, "not a checkpoint file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::Config, "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.algorithm = doc.at("algorithm").get<std::string>();
    ck.epoch = doc.at("epoch").get<std::size_t>();
    ck.kind = doc.at("kind").get<std::string>();
    ck.policy = policy_from_json(doc.at("policy"));
    ck.rng_state = doc.at("rng").get<std::string>();
    ck.summary = doc.at("summary");
    ck.config = doc.at("config");
    if (doc.contains("critics")) {
      const json& c = doc.at("critics");
      Critics critics;
      critics.reward = mlp_from_json(c.at("reward"));
      critics.cost = mlp_from_json(c.at("cost"));
      critics.reward_target = mlp_from_json(c.at("reward_target"));
      critics.cost_target = mlp_from_json(c.at("cost_target"));
      critics.reward_optimizer = adam_from_json(c.at("reward_optimizer"));
      critics.cost_optimizer = adam_from_json(c.at("cost_optimizer"));
      critics.polyak = c.at("polyak").get<double>();
      ck.critics = std::move(critics);
    }
    if (doc.contains("policy_optimizer")) ck.policy_optimizer = adam_from_json(doc.at("policy_optimizer"));
    if (doc.contains("m_step")) {
      const json& m = doc.at("m_step");
      ck.m_step = MStepState{adam_from_json(m.at("mean_optimizer")), adam_from_json(m.at("log_std_optimizer")),
                             m.at("kl_multiplier").get<double>()};
    }
    if (doc.contains("pid")) {
      const json& p = doc.at("pid");
      ck.pid = PidDualState{{p.at("kp").get<double>(), p.at("ki").get<double>(), p.at("kd").get<double>()},
                            p.at("lambda").get<double>(),
                            p.at("integral").get<double>(),
                            p.at("prev_cost").get<double>(),
                            p.value("has_prev", true)};
    }
    if (doc.contains("cvpo_duals")) {
      const json& d = doc.at("cvpo_duals");
      ck.cvpo_duals = DualPoint{d.at("eta").get<double>(), d.at("lambda").get<double>()};
    }
    return ck;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << checkpoint_to_json(checkpoint).dump(1) << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, "checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace cofc
