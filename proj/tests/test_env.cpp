#include "cofc/drive_cycle.hpp"
#include "cofc/env.hpp"
#include "cofc/error.hpp"
#include "cofc/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

using namespace cofc;

namespace {

SocCorridor wide() { return SocCorridor{0.7, 0.3, 0.5, 200, 980, 1180}; }

std::shared_ptr<const DriveCycle> nedc() {
  return std::make_shared<const DriveCycle>(load_cycle_file(COFC_SOURCE_DIR "/data/nedc.csv"));
}

}  // namespace

TEST_CASE("corridor limits") {
  const SocCorridor c = wide();
  CHECK(corridor_limits(0, c).upper == 0.5);
  CHECK(corridor_limits(0, c).lower == 0.5);
  CHECK(corridor_limits(100, c).upper == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(corridor_limits(100, c).lower == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(corridor_limits(500, c).upper == 0.7);
  CHECK(corridor_limits(500, c).lower == 0.3);
  CHECK(corridor_limits(1180, c).upper == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(corridor_limits(1180, c).lower == doctest::Approx(0.5).epsilon(1e-14));
  for (std::size_t t = 0; t <= c.horizon; ++t) {
    const CorridorLimits l = corridor_limits(t, c);
    CHECK(l.upper >= l.lower);
  }
  bool threw = false;
  try {
    corridor_limits(1181, c);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::StepOutOfRange;
  }
  CHECK(threw);
}

TEST_CASE("soc cost") {
  const SocCorridor c = wide();
  CHECK(soc_cost(0.5, 500, c) == 0.0);
  CHECK(soc_cost(0.75, 500, c) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(soc_cost(0.25, 500, c) == doctest::Approx(0.05).epsilon(1e-12));
  // Slope in soc is -1, 0 or +1.
  for (double soc = 0.0; soc < 1.0; soc += 0.013) {
    const double slope = (soc_cost(soc + 1e-6, 300, c) - soc_cost(soc, 300, c)) / 1e-6;
    const double d = std::min({std::abs(slope), std::abs(slope - 1.0), std::abs(slope + 1.0)});
    CHECK(d < 1e-6);
    CHECK((soc_cost(soc, 300, c) == 0.0) == (soc >= 0.3 && soc <= 0.7));
  }
}

TEST_CASE("fuel economy") {
  CHECK(std::abs(fuel_economy(311.43, 10.93) - 3.96) < 0.005);
  CHECK(std::abs(fuel_economy(333.91, 10.93) - 4.24) < 0.005);
  CHECK(fuel_economy(0.0, 3.0) == 0.0);
  bool threw = false;
  try {
    fuel_economy(1.0, 0.0);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::ZeroDistance;
  }
  CHECK(threw);
}

TEST_CASE("episode returns") {
  std::vector<Transition> ten(10);
  for (auto& t : ten) t.r = -1.0;
  const EpisodeReturns a = episode_returns(ten, 1.0);
  CHECK(a.reward_return == -10.0);
  CHECK(a.cost_return == 0.0);
  CHECK(a.total_fuel == 10.0);

  std::vector<Transition> two(2);
  for (auto& t : two) t.r = -1.0;
  CHECK(episode_returns(two, 0.5).reward_return == -1.5);

  std::vector<Transition> three(3);
  for (auto& t : three) t.c = 0.1;
  three.back().s_next.soc = 0.42;
  const EpisodeReturns c = episode_returns(three, 0.9);
  CHECK(c.cost_return == doctest::Approx(0.271).epsilon(1e-12));
  CHECK(c.final_soc == 0.42);

  bool threw = false;
  try {
    episode_returns(std::vector<Transition>{}, 0.9);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::EmptyEpisode;
  }
  CHECK(threw);
}

TEST_CASE("reset and step") {
  auto cycle = std::make_shared<const DriveCycle>(make_trapezoid_cycle(200.0, 50.0, 40.0));
  HevEnv env(cycle, default_powertrain(), SocCorridor{0.55, 0.45, 0.5, 40, 160, 200});
  const Observation o = env.reset(16);
  CHECK(o.soc == 0.5);
  CHECK(o.velocity == 0.0);
  CHECK(o.acceleration == doctest::Approx(accel_at(*cycle, 0)));

  for (int k = 0; k < 50; ++k) env.step(20.0);
  const Observation again = env.reset(99);
  CHECK(again.soc == o.soc);
  CHECK(again.velocity == o.velocity);
  CHECK(again.acceleration == o.acceleration);
  CHECK(env.step_index() == 0);
}

TEST_CASE("zero-speed segment with the engine off") {
  auto cycle = std::make_shared<const DriveCycle>(make_constant_cycle(20.0, 0.0));
  HevEnv env(cycle, default_powertrain(), SocCorridor{0.55, 0.45, 0.5, 5, 15, 20});
  env.reset();
  const Transition t = env.step(0.0);
  CHECK(t.r == 0.0);
  CHECK(t.c == 0.0);
}

TEST_CASE("ten kilowatts for one second") {
  // Demand is 0, so the engine charges the battery and fuel is 10 kW at 240 g/kWh.
  auto cycle = std::make_shared<const DriveCycle>(make_constant_cycle(20.0, 0.0));
  HevEnv env(cycle, default_powertrain(), SocCorridor{0.55, 0.45, 0.5, 5, 15, 20});
  env.reset();
  CHECK(env.step(10.0).r == doctest::Approx(-10.0 * 240.0 / 3600.0).epsilon(1e-12));
}

TEST_CASE("episode length and done flag") {
  auto cycle = std::make_shared<const DriveCycle>(make_trapezoid_cycle(200.0, 50.0, 40.0));
  HevEnv env(cycle, default_powertrain(), SocCorridor{0.55, 0.45, 0.5, 40, 160, 200});
  env.reset();
  std::size_t n = 0;
  bool last_done = false;
  while (!env.done()) {
    const Transition t = env.step(5.0);
    ++n;
    CHECK(t.c >= 0.0);
    last_done = t.done;
    if (n < 200) CHECK_FALSE(t.done);
  }
  CHECK(n == 200);
  CHECK(last_done);
  bool threw = false;
  try {
    env.step(0.0);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::EpisodeFinished;
  }
  CHECK(threw);
}

TEST_CASE("identical actions give identical transitions") {
  auto cycle = nedc();
  HevEnv a(cycle, default_powertrain(), wide());
  HevEnv b(cycle, default_powertrain(), wide());
  a.reset();
  b.reset();
  Rng rng(3);
  while (!a.done()) {
    const double p = rng.uniform(0.0, 57.0);
    const Transition x = a.step(p);
    const Transition y = b.step(p);
    CHECK(x.s_next.soc == y.s_next.soc);
    CHECK(x.r == y.r);
    CHECK(x.c == y.c);
  }
}

TEST_CASE("random NEDC episode saturates the battery") {
  HevEnv env(nedc(), default_powertrain(), wide());
  env.reset(16);
  Rng rng(16);
  std::vector<Transition> transitions;
  while (!env.done()) transitions.push_back(env.step(rng.uniform(0.0, 57.0)));
  const EpisodeReturns ret = episode_returns(transitions, 1.0);
  CHECK(ret.final_soc == 1.0);
  CHECK(ret.cost_return > 10.0);
}

TEST_CASE("corridor from a recorded envelope") {
  const std::vector<double> trace{0.5, 0.61, 0.72, 0.47, 0.38, 0.5};
  const SocCorridor c = corridor_from_envelope(trace, 0.5, 2, 4, 6);
  CHECK(c.high == 0.72);
  CHECK(c.low == 0.38);
}
