#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace cofc {

struct VehicleParams {
  double mass = 1500.0;                // kg
  double drag_coeff = 0.30;            // Cd
  double frontal_area = 2.2;           // m^2
  double air_density = 1.2;            // kg/m^3
  double rolling_coeff = 0.01;         // Cr
  double gravity = 9.81;               // m/s^2
  double driveline_efficiency = 0.92;  // (0, 1]
  double regen_efficiency = 0.5;       // [0, 1]
  double max_regen_power = 30.0;       // kW
  double accessory_load = 0.0;         // kW, drawn from the battery side

  void validate() const;
};

struct EnginePoint {
  double power = 0.0;   // kW
  double speed = 0.0;   // r/min
  double torque = 0.0;  // N m
  double bsfc = 0.0;    // g/kWh
};

/// Engine constrained to its minimum-BSFC operating line.
struct EngineMap {
  std::vector<EnginePoint> optimal_line;
  double idle_fuel_rate = 0.1;  // g/s, floor while the engine is on
  double max_power = 57.0;      // kW
  double on_threshold = 1.0;    // kW, below this the engine is off

  void validate() const;
};

struct BatteryParams {
  double capacity = 6.5;              // Ah
  double nominal_voltage = 325.0;     // V
  double max_charge_power = 25.0;     // kW
  double max_discharge_power = 25.0;  // kW
  double coulombic_efficiency = 0.98;

  void validate() const;
};

struct PowertrainParams {
  VehicleParams vehicle;
  EngineMap engine;
  BatteryParams battery;
};

/// Built-in compact-HEV parameter set (mirrors config/default_hev.toml).
PowertrainParams default_powertrain();
EngineMap default_engine_map();

/// Loads a parameter file with [vehicle], [engine] and [battery] sections.
/// The format is chosen by extension: `.json` or TOML otherwise.
PowertrainParams load_powertrain(const std::string& path);
PowertrainParams parse_powertrain_toml(const std::string& text);
/// Missing keys keep their defaults; tables `vehicle`, `engine`, `battery`.
PowertrainParams powertrain_from_json(const nlohmann::json& doc);

/// Wheel power demand in kW; braking power is scaled by the regen efficiency
/// and floored at -max_regen_power.
double demand_power(double speed, double accel, const VehicleParams& params);

struct EngineOperatingPoint {
  double fuel_rate = 0.0;  // g/s
  double speed = 0.0;      // r/min
  double torque = 0.0;     // N m
};

EngineOperatingPoint engine_fuel_rate(double engine_power, const EngineMap& map);

struct BatteryStep {
  double soc = 0.0;
  bool clamped = false;
};

/// Coulomb-counting SOC update; positive power discharges.
BatteryStep battery_step(double soc, double battery_power, double dt, const BatteryParams& params);

struct PowerSplit {
  double battery = 0.0;  // kW, positive discharges
  double wasted = 0.0;   // kW of engine or regen power the battery cannot absorb
};

PowerSplit power_split(double demand, double engine_power, const BatteryParams& battery);

/// One control interval of the powertrain, shared by the environment and the
/// dynamic-programming oracle so both see identical physics.
struct PowertrainStep {
  double demand = 0.0;          // kW
  double engine_command = 0.0;  // kW, after clamping to [0, max_power]
  double engine = 0.0;          // kW actually delivered
  double battery = 0.0;         // kW
  double wasted = 0.0;          // kW
  double fuel = 0.0;            // g over the interval
  double soc = 0.0;             // after the interval
  bool action_clamped = false;
  bool soc_clamped = false;
};

/// Applies engine power `engine_command` for `dt` seconds while the vehicle
/// moves from speed `v0` to `v1`. The engine is raised when the battery alone
/// cannot cover the remaining demand.
PowertrainStep advance_powertrain(double soc, double v0, double v1, double dt,
                                  double engine_command, const PowertrainParams& params);

}  // namespace cofc
