#include "cofc/error.hpp"
#include "cofc/lagrangian.hpp"
#include "cofc/rng.hpp"
#include "cofc/task.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace cofc;

TEST_CASE("cost limit") {
  CHECK(std::abs(cost_limit(1.5, 3000, 0.99) - 0.05) <= 1e-4);
  CHECK(cost_limit(1.5, 3000, 1.0) == 1.5);
  CHECK(cost_limit(1.5, 1, 0.9) == doctest::Approx(1.5).epsilon(1e-14));
  for (double g : {0.0, -0.1, 1.01}) {
    bool threw = false;
    try {
      cost_limit(1.5, 100, g);
    } catch (const Error& e) {
      threw = e.code() == ErrorCode::InvalidGamma;
    }
    CHECK(threw);
  }
}

TEST_CASE("pid update examples") {
  PidDualState on{{1.0, 1.0, 1.0}};
  CHECK(pid_dual_update(on, 1.5, 1.5) == 0.0);
  CHECK(on.integral == 0.0);

  PidDualState s{{1.0, 0.5, 2.0}};
  s.prev_cost = 1.0;
  s.has_prev = true;
  CHECK(pid_dual_update(s, 2.0, 1.5) == doctest::Approx(2.75).epsilon(1e-15));
  CHECK(s.integral == 0.5);
  CHECK(s.prev_cost == 2.0);
}

TEST_CASE("pid invariants on random cost sequences") {
  Rng rng(16);
  for (int seq = 0; seq < 200; ++seq) {
    const PidGains gains{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    PidDualState full{gains};
    PidDualState no_d{{gains.kp, gains.ki, 0.0}};
    PidDualState integral_only{{0.0, gains.ki, 0.0}};
    double ref_integral = 0.0;
    const double eps1 = rng.uniform(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
      const double jc = rng.uniform(-1.0, 2.0);
      const double prev = full.prev_cost;
      const double lam = pid_dual_update(full, jc, eps1);
      const double lam_no_d = pid_dual_update(no_d, jc, eps1);
      CHECK(lam >= 0.0);
      CHECK(full.integral >= 0.0);
      if (k > 0 && jc < prev) CHECK(lam == lam_no_d);
      ref_integral = std::max(ref_integral + jc - eps1, 0.0);
      CHECK(pid_dual_update(integral_only, jc, eps1) == doctest::Approx(gains.ki * ref_integral));
    }
  }
}

TEST_CASE("persistent violation winds the multiplier up") {
  PidDualState s{{0.5, 0.2, 0.1}};
  double prev = pid_dual_update(s, 2.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double lam = pid_dual_update(s, 2.0, 1.0);
    CHECK(lam > prev);
    prev = lam;
  }
  PidDualState i_only{{0.0, 0.3, 0.0}};
  Rng rng(1);
  prev = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double lam = pid_dual_update(i_only, rng.uniform(1.01, 3.0), 1.0);
    CHECK(lam > prev);
    prev = lam;
  }
}

TEST_CASE("zero gains keep the multiplier at zero") {
  PidDualState s;
  for (double jc : {5.0, 9.0, 0.0, 12.0}) CHECK(pid_dual_update(s, jc, 0.1) == 0.0);
}

TEST_CASE("lagrangian actor loss") {
  Eigen::RowVectorXd qr(3), qc(3);
  qr << 1.0, -2.0, 0.5;
  qc << 0.1, 0.4, 0.0;
  CHECK(lagrangian_actor_loss(qr, qc, 0.0) == doctest::Approx(-qr.mean()));
  Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(2);
  CHECK(lagrangian_actor_loss(ones, ones, 1.0) == 0.0);
  CHECK(lagrangian_actor_loss(qr, qc, 1e9) == doctest::Approx(qc.mean()).epsilon(1e-6));
  CHECK_THROWS_AS(lagrangian_actor_loss(qr, ones, 1.0), Error);
}

TEST_CASE("cost budget maps episode cost onto the discounted scale") {
  const CostBudget b{1.5, 200, 0.99};
  CHECK(b.discounted(1.5) == doctest::Approx(b.eps1()));
  CHECK(b.discounted(0.0) == 0.0);
}

namespace {

LagrangianSettings bandit_settings(std::size_t epochs) {
  LagrangianSettings s;
  auto& c = s.common;
  c.epochs = epochs;
  c.steps_per_epoch = 32;
  c.num_envs = 1;
  c.num_threads = 1;
  c.start_steps = 64;
  c.batch_size = 32;
  c.updates_per_epoch = 10;
  c.replay_capacity = 2000;
  c.gamma = 0.99;
  c.eps_T = 0.2;
  c.cost_scale = 1.0;
  c.policy_hidden = {16};
  c.critic.hidden = {32, 32};
  s.noise_log_std = -1.6;
  s.final_noise_log_std = -3.0;
  s.noise_decay_epochs = 300;
  s.pid = {1.0, 0.5, 0.0};
  return s;
}

TaskFactory bandit() {
  return [] { return std::make_unique<BanditTask>(0.5); };
}

}  // namespace

TEST_CASE("toy bandit reaches the constrained optimum") {
  // Reward -a^2, cost (0.5 - a)_+, limit 0.2: the optimum is a = 0.3.
  LagrangianTrainer trainer(bandit_settings(500), bandit(), 16);
  const TrainingResult r = trainer.train();
  CHECK(r.best_feasible);
  CHECK(r.best_summary.cost <= 0.2);
  CHECK(std::abs(r.best_summary.cost - 0.2) <= 0.03);
  BanditTask task;
  const double a = r.best_policy.mean(Eigen::VectorXd(task.reset()));
  CHECK(std::abs(a - 0.3) <= 0.03);
}

TEST_CASE("zero gains train an unconstrained actor") {
  LagrangianSettings s = bandit_settings(150);
  s.pid = {0.0, 0.0, 0.0};
  LagrangianTrainer trainer(s, bandit(), 16);
  const TrainingResult r = trainer.train();
  for (const auto& rec : r.trace) CHECK(rec.lambda == 0.0);
  // Without the constraint the actor heads for a = 0.
  BanditTask task;
  CHECK(std::abs(r.final_policy.mean(Eigen::VectorXd(task.reset()))) <= 0.05);
}

TEST_CASE("equal seeds give equal traces") {
  LagrangianTrainer a(bandit_settings(30), bandit(), 5);
  LagrangianTrainer b(bandit_settings(30), bandit(), 5);
  const TrainingResult x = a.train();
  const TrainingResult y = b.train();
  REQUIRE(x.trace.size() == y.trace.size());
  for (std::size_t i = 0; i < x.trace.size(); ++i) {
    CHECK(x.trace[i].mean_reward == y.trace[i].mean_reward);
    CHECK(x.trace[i].lambda == y.trace[i].lambda);
    CHECK(x.trace[i].test_reward == y.trace[i].test_reward);
  }
  CHECK(x.final_policy.mean_net().params() == y.final_policy.mean_net().params());
}
