#include "cofc/powertrain.hpp"

#include "cofc/error.hpp"
#include "cofc/structured_file.hpp"

#include <algorithm>
#include <cmath>

namespace cofc {
namespace {

constexpr double kPowerTolerance = 1e-9;

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::Config, message);
}

template <typename T>
void read_if_present(const nlohmann::json& section, const char* key, T& target) {
  if (section.contains(key)) {
    try {
      target = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::Config, std::string("bad value for '") + key + "'");
    }
  }
}

}  // namespace

PowertrainParams powertrain_from_json(const nlohmann::json& doc) {
  PowertrainParams params = default_powertrain();
  if (doc.contains("vehicle")) {
    const auto& s = doc.at("vehicle");
    auto& v = params.vehicle;
    read_if_present(s, "mass", v.mass);
    read_if_present(s, "drag_coeff", v.drag_coeff);
    read_if_present(s, "frontal_area", v.frontal_area);
    read_if_present(s, "air_density", v.air_density);
    read_if_present(s, "rolling_coeff", v.rolling_coeff);
    read_if_present(s, "gravity", v.gravity);
    read_if_present(s, "driveline_efficiency", v.driveline_efficiency);
    read_if_present(s, "regen_efficiency", v.regen_efficiency);
    read_if_present(s, "max_regen_power", v.max_regen_power);
    read_if_present(s, "accessory_load", v.accessory_load);
  }
  if (doc.contains("engine")) {
    const auto& s = doc.at("engine");
    auto& e = params.engine;
    read_if_present(s, "idle_fuel_rate", e.idle_fuel_rate);
    read_if_present(s, "max_power", e.max_power);
    read_if_present(s, "on_threshold", e.on_threshold);
    if (s.contains("optimal_line")) {
      e.optimal_line.clear();
      for (const auto& row : s.at("optimal_line")) {
        require(row.is_array() && row.size() == 4,
                "engine.optimal_line rows must be [power, speed, torque, bsfc]");
        e.optimal_line.push_back({row[0].get<double>(), row[1].get<double>(),
                                  row[2].get<double>(), row[3].get<double>()});
      }
    }
  }
  if (doc.contains("battery")) {
    const auto& s = doc.at("battery");
    auto& b = params.battery;
    read_if_present(s, "capacity", b.capacity);
    read_if_present(s, "nominal_voltage", b.nominal_voltage);
    read_if_present(s, "max_charge_power", b.max_charge_power);
    read_if_present(s, "max_discharge_power", b.max_discharge_power);
    read_if_present(s, "coulombic_efficiency", b.coulombic_efficiency);
  }
  params.vehicle.validate();
  params.engine.validate();
  params.battery.validate();
  return params;
}

void VehicleParams::validate() const {
  require(mass > 0 && drag_coeff > 0 && frontal_area > 0 && air_density > 0 && rolling_coeff > 0 &&
              gravity > 0 && max_regen_power > 0,
          "vehicle parameters must be positive");
  require(driveline_efficiency > 0 && driveline_efficiency <= 1,
          "driveline_efficiency must lie in (0, 1]");
  require(regen_efficiency >= 0 && regen_efficiency <= 1, "regen_efficiency must lie in [0, 1]");
  require(accessory_load >= 0, "accessory_load must be non-negative");
}

void EngineMap::validate() const {
  require(optimal_line.size() >= 2, "engine.optimal_line needs at least two points");
  require(optimal_line.front().power == 0.0, "engine.optimal_line must start at 0 kW");
  for (std::size_t i = 0; i < optimal_line.size(); ++i) {
    const auto& p = optimal_line[i];
    require(p.bsfc > 0, "bsfc must be positive");
    require(p.speed >= 800 && p.speed <= 4500, "engine speed must lie in [800, 4500] r/min");
    if (i > 0) require(p.power > optimal_line[i - 1].power, "optimal_line powers must increase");
  }
  require(max_power > 0 && max_power <= optimal_line.back().power + kPowerTolerance,
          "engine.max_power must be covered by the optimal line");
  require(idle_fuel_rate >= 0 && on_threshold >= 0, "idle settings must be non-negative");
}

void BatteryParams::validate() const {
  require(capacity > 0 && nominal_voltage > 0, "battery capacity and voltage must be positive");
  require(max_charge_power > 0 && max_discharge_power > 0, "battery power limits must be positive");
  require(coulombic_efficiency > 0 && coulombic_efficiency <= 1,
          "coulombic_efficiency must lie in (0, 1]");
}

EngineMap default_engine_map() {
  EngineMap map;
  map.optimal_line = {
      {0.0, 1000.0, 0.0, 400.0},    {5.0, 1100.0, 43.4, 320.0},   {10.0, 1300.0, 73.5, 240.0},
      {15.0, 1500.0, 95.5, 232.0},  {20.0, 1700.0, 112.3, 226.0}, {25.0, 1900.0, 125.6, 223.0},
      {30.0, 2100.0, 136.4, 222.0}, {35.0, 2400.0, 139.3, 224.0}, {40.0, 2700.0, 141.5, 228.0},
      {45.0, 3100.0, 138.6, 234.0}, {50.0, 3600.0, 132.6, 242.0}, {57.0, 4500.0, 121.0, 255.0},
  };
  map.idle_fuel_rate = 0.1;
  map.max_power = 57.0;
  map.on_threshold = 1.0;
  return map;
}

PowertrainParams default_powertrain() {
  PowertrainParams params;
  params.engine = default_engine_map();
  return params;
}

PowertrainParams parse_powertrain_toml(const std::string& text) { return powertrain_from_json(parse_toml(text)); }

PowertrainParams load_powertrain(const std::string& path) {
  return powertrain_from_json(load_structured_file(path));
}

double demand_power(double speed, double accel, const VehicleParams& p) {
  const double rolling = speed > 0.0 ? p.mass * p.gravity * p.rolling_coeff : 0.0;
  const double aero = 0.5 * p.air_density * p.drag_coeff * p.frontal_area * speed * speed;
  const double wheel_kw = (p.mass * accel + aero + rolling) * speed / 1000.0;
  if (wheel_kw >= 0.0) return wheel_kw / p.driveline_efficiency;
  return std::max(-p.max_regen_power, p.regen_efficiency * wheel_kw);
}

EngineOperatingPoint engine_fuel_rate(double engine_power, const EngineMap& map) {
  if (engine_power < 0.0 || engine_power > map.max_power + kPowerTolerance ||
      !std::isfinite(engine_power)) {
    throw Error(ErrorCode::PowerOutOfRange, "engine power outside [0, max_power]");
  }
  if (engine_power == 0.0) return {};
  const auto& line = map.optimal_line;
  auto upper = std::upper_bound(line.begin(), line.end(), engine_power,
                                [](double p, const EnginePoint& pt) { return p < pt.power; });
  if (upper == line.end()) upper = line.end() - 1;
  const auto lower = upper - 1;
  const double w = (engine_power - lower->power) / (upper->power - lower->power);
  const auto lerp = [w](double a, double b) { return a + w * (b - a); };
  const double bsfc = lerp(lower->bsfc, upper->bsfc);
  return {std::max(map.idle_fuel_rate, engine_power * bsfc / 3600.0), lerp(lower->speed, upper->speed),
          lerp(lower->torque, upper->torque)};
}

BatteryStep battery_step(double soc, double battery_power, double dt, const BatteryParams& params) {
  if (battery_power > params.max_discharge_power + kPowerTolerance ||
      battery_power < -params.max_charge_power - kPowerTolerance) {
    throw Error(ErrorCode::PowerLimitExceeded, "battery power outside charge/discharge limits");
  }
  if (battery_power == 0.0) return {soc, false};
  const double current = battery_power * 1000.0 / params.nominal_voltage;
  double delta = -current * dt / (3600.0 * params.capacity);
  if (battery_power < 0.0) delta *= params.coulombic_efficiency;
  const double next = soc + delta;
  if (next < 0.0) return {0.0, true};
  if (next > 1.0) return {1.0, true};
  return {next, false};
}

PowerSplit power_split(double demand, double engine_power, const BatteryParams& battery) {
  const double wanted = demand - engine_power;
  const double delivered = std::clamp(wanted, -battery.max_charge_power, battery.max_discharge_power);
  return {delivered, delivered - wanted};
}

PowertrainStep advance_powertrain(double soc, double v0, double v1, double dt, double engine_command,
                                  const PowertrainParams& params) {
  PowertrainStep out;
  const auto& engine = params.engine;
  out.demand = demand_power(0.5 * (v0 + v1), (v1 - v0) / dt, params.vehicle) +
               params.vehicle.accessory_load;
  out.engine_command = std::clamp(engine_command, 0.0, engine.max_power);
  out.action_clamped = out.engine_command != engine_command;
  double engine_kw = out.engine_command < engine.on_threshold ? 0.0 : out.engine_command;
  // The battery cannot cover the rest: the engine makes up the shortfall.
  const double shortfall = out.demand - engine_kw - params.battery.max_discharge_power;
  if (shortfall > 0.0) engine_kw = std::min(engine.max_power, engine_kw + shortfall);
  const PowerSplit split = power_split(out.demand, engine_kw, params.battery);
  out.engine = engine_kw;
  out.battery = split.battery;
  out.wasted = split.wasted;
  out.fuel = engine_fuel_rate(engine_kw, engine).fuel_rate * dt;
  const BatteryStep b = battery_step(soc, split.battery, dt, params.battery);
  out.soc = b.soc;
  out.soc_clamped = b.clamped;
  return out;
}

}  // namespace cofc
