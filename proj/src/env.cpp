#include "cofc/env.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace cofc {

void SocCorridor::validate() const {
  if (!(0.0 <= low && low < balance && balance < high && high <= 1.0)) {
    throw Error(ErrorCode::Config, "corridor requires 0 <= L < B < H <= 1");
  }
  if (!(0 < ramp_out && ramp_out < ramp_in && ramp_in < horizon)) {
    throw Error(ErrorCode::Config, "corridor requires 0 < bl < br < Ts");
  }
}

CorridorLimits corridor_limits(std::size_t t, const SocCorridor& c) {
  if (t > c.horizon) throw Error(ErrorCode::StepOutOfRange, "step beyond corridor horizon");
  const double td = static_cast<double>(t);
  const double bl = static_cast<double>(c.ramp_out);
  const double br = static_cast<double>(c.ramp_in);
  const double ts = static_cast<double>(c.horizon);
  if (t <= c.ramp_out) {
    return {(c.high - c.balance) / bl * td + c.balance, (c.low - c.balance) / bl * td + c.balance};
  }
  if (t > c.ramp_in) {
    return {(c.high - c.balance) / (br - ts) * (td - ts) + c.balance,
            (c.low - c.balance) / (br - ts) * (td - ts) + c.balance};
  }
  return {c.high, c.low};
}

double soc_cost(double soc, std::size_t t, const SocCorridor& corridor) {
  const auto [upper, lower] = corridor_limits(t, corridor);
  return std::max(soc - upper, 0.0) + std::max(lower - soc, 0.0);
}

EpisodeReturns episode_returns(std::span<const Transition> transitions, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidGamma, "gamma must lie in (0, 1]");
  if (transitions.empty()) throw Error(ErrorCode::EmptyEpisode, "no transitions");
  EpisodeReturns out;
  double discount = 1.0;
  for (const auto& tr : transitions) {
    out.reward_return += discount * tr.r;
    out.cost_return += discount * tr.c;
    out.total_fuel -= tr.r;
    discount *= gamma;
  }
  out.final_soc = transitions.back().s_next.soc;
  return out;
}

double fuel_economy(double total_fuel_g, double distance_km) {
  if (!(distance_km > 0.0)) throw Error(ErrorCode::ZeroDistance, "distance must be positive");
  return total_fuel_g / kFuelDensity / distance_km * 100.0;
}

void write_episode_log(std::span<const EpisodeLogRow> rows, std::ostream& out) {
  out << "t,v,a,P_dem,P_eng,P_batt,soc,upper,lower,r,c\n" << std::setprecision(10);
  for (const auto& row : rows) {
    out << row.t << ',' << row.v << ',' << row.a << ',' << row.demand << ',' << row.engine << ','
        << row.battery << ',' << row.soc << ',' << row.upper << ',' << row.lower << ',' << row.r
        << ',' << row.c << '\n';
  }
}

HevEnv::HevEnv(std::shared_ptr<const DriveCycle> cycle, PowertrainParams params, SocCorridor corridor)
    : cycle_(std::move(cycle)), params_(std::move(params)), corridor_(corridor) {
  corridor_.validate();
  if (corridor_.horizon > cycle_->steps()) {
    throw Error(ErrorCode::Config, "corridor horizon exceeds the drive cycle length");
  }
  reset();
}

Observation HevEnv::observe(std::size_t t) const {
  return {soc_, cycle_->speed(t), accel_at(*cycle_, t)};
}

Observation HevEnv::reset(std::uint64_t /*seed*/) {
  t_ = 0;
  soc_ = corridor_.balance;
  clamped_actions_ = 0;
  last_row_ = {};
  return observe(0);
}

Transition HevEnv::step(double engine_power) {
  if (done()) throw Error(ErrorCode::EpisodeFinished, "episode already finished");
  Transition tr;
  tr.s = observe(t_);
  tr.a = engine_power;
  const PowertrainStep ps = advance_powertrain(soc_, cycle_->speed(t_), cycle_->speed(t_ + 1),
                                               cycle_->dt(), engine_power, params_);
  if (ps.action_clamped) ++clamped_actions_;
  soc_ = ps.soc;
  ++t_;
  tr.s_next = observe(t_);
  tr.r = -ps.fuel;
  tr.c = soc_cost(soc_, t_, corridor_);
  tr.done = t_ == corridor_.horizon;
  const auto limits = corridor_limits(t_, corridor_);
  last_row_ = {t_ - 1,   tr.s.velocity, tr.s.acceleration, ps.demand,    ps.engine, ps.battery,
               soc_,     limits.upper,  limits.lower,      tr.r,         tr.c};
  return tr;
}

SocCorridor corridor_from_envelope(std::span<const double> soc_trajectory, double balance,
                                   std::size_t ramp_out, std::size_t ramp_in, std::size_t horizon) {
  if (soc_trajectory.empty()) throw Error(ErrorCode::EmptyEpisode, "empty SOC trajectory");
  const auto [lo, hi] = std::minmax_element(soc_trajectory.begin(), soc_trajectory.end());
  SocCorridor corridor{std::min(*hi, 1.0), std::max(*lo, 0.0), balance, ramp_out, ramp_in, horizon};
  corridor.validate();
  return corridor;
}

}  // namespace cofc
