#pragma once

#include "cofc/drive_cycle.hpp"
#include "cofc/powertrain.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace cofc {

/// Time-varying SOC-allowed range: ramps from the balance point B out to
/// [L, H] over [0, bl], stays flat to br, and ramps back to B at Ts.
struct SocCorridor {
  double high = 0.7;      // H
  double low = 0.3;       // L
  double balance = 0.5;   // B
  std::size_t ramp_out = 200;   // bl
  std::size_t ramp_in = 980;    // br
  std::size_t horizon = 1180;   // Ts

  void validate() const;
};

struct CorridorLimits {
  double upper = 0.0;
  double lower = 0.0;
};

CorridorLimits corridor_limits(std::size_t t, const SocCorridor& corridor);

/// Distance of `soc` outside the corridor at step `t`.
double soc_cost(double soc, std::size_t t, const SocCorridor& corridor);

struct Observation {
  double soc = 0.0;
  double velocity = 0.0;      // m/s
  double acceleration = 0.0;  // m/s^2
};

struct Transition {
  Observation s;
  double a = 0.0;  // engine power command, kW
  Observation s_next;
  double r = 0.0;  // negative grams of fuel burned during the step
  double c = 0.0;  // corridor violation after the step
  bool done = false;
};

struct EpisodeReturns {
  double reward_return = 0.0;  // J_r
  double cost_return = 0.0;    // J_c
  double total_fuel = 0.0;     // g
  double final_soc = 0.0;
};

EpisodeReturns episode_returns(std::span<const Transition> transitions, double gamma);

inline constexpr double kFuelDensity = 720.0;  // g/L

/// Fuel economy in L/100km.
double fuel_economy(double total_fuel_g, double distance_km);

struct EpisodeLogRow {
  std::size_t t = 0;
  double v = 0.0;
  double a = 0.0;
  double demand = 0.0;
  double engine = 0.0;
  double battery = 0.0;
  double soc = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  double r = 0.0;
  double c = 0.0;
};

void write_episode_log(std::span<const EpisodeLogRow> rows, std::ostream& out);

/// Constrained MDP over a reference drive cycle. The vehicle follows the
/// reference speed exactly; the action only sets the engine power.
class HevEnv {
 public:
  HevEnv(std::shared_ptr<const DriveCycle> cycle, PowertrainParams params, SocCorridor corridor);

  /// The environment itself is deterministic; `seed` is accepted for the
  /// gym-style interface and ignored.
  Observation reset(std::uint64_t seed = 0);
  Transition step(double engine_power);

  std::size_t step_index() const { return t_; }
  bool done() const { return t_ >= corridor_.horizon; }
  std::size_t clamped_actions() const { return clamped_actions_; }

  const DriveCycle& cycle() const { return *cycle_; }
  const PowertrainParams& params() const { return params_; }
  const SocCorridor& corridor() const { return corridor_; }
  /// Row describing the most recent step (for episode logs).
  const EpisodeLogRow& last_row() const { return last_row_; }

 private:
  Observation observe(std::size_t t) const;

  std::shared_ptr<const DriveCycle> cycle_;
  PowertrainParams params_;
  SocCorridor corridor_;
  std::size_t t_ = 0;
  double soc_ = 0.0;
  std::size_t clamped_actions_ = 0;
  EpisodeLogRow last_row_;
};

/// Corridor whose H and L are the extremes of a recorded SOC trajectory,
/// as done when the allowed range is chosen from a random rollout.
SocCorridor corridor_from_envelope(std::span<const double> soc_trajectory, double balance,
                                   std::size_t ramp_out, std::size_t ramp_in, std::size_t horizon);

}  // namespace cofc
