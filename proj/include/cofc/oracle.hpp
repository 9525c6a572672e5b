#pragma once

#include "cofc/drive_cycle.hpp"
#include "cofc/env.hpp"
#include "cofc/powertrain.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace cofc {

/// Discretized constrained fuel-minimization instance. The corridor is a
/// hard constraint and the final SOC must return to the balance point
/// within `terminal_tolerance` (half a SOC cell unless set).
struct DpGrid {
  std::shared_ptr<const DriveCycle> cycle;
  PowertrainParams params;
  SocCorridor corridor;
  std::size_t soc_levels = 201;
  std::size_t action_levels = 21;
  std::optional<double> soc_min;     // default: corridor L
  std::optional<double> soc_max;     // default: corridor H
  std::optional<double> action_max;  // default: engine max power
  std::optional<double> terminal_tolerance;
  /// Round every successor SOC to the nearest grid node (removes
  /// interpolation, so backward induction equals exhaustive search).
  bool snap_to_grid = false;
  double work_budget = 5e8;  // soc_levels * action_levels * steps
  std::size_t threads = 1;

  double lowest() const { return soc_min.value_or(corridor.low); }
  double highest() const { return soc_max.value_or(corridor.high); }
  double cell() const;
  double terminal_window() const { return terminal_tolerance.value_or(0.5 * cell()); }
  double max_action() const { return action_max.value_or(params.engine.max_power); }
  Eigen::VectorXd soc_nodes() const;
  Eigen::VectorXd actions() const;
};

struct DpTrajectoryPoint {
  std::size_t t = 0;
  double soc = 0.0;     // at the start of the step
  double engine = 0.0;  // kW command
  double fuel = 0.0;    // g over the step
  double upper = 0.0;
  double lower = 0.0;
};

struct DpSolution {
  double min_fuel = std::numeric_limits<double>::infinity();
  bool feasible = false;
  Eigen::MatrixXd value;   // (steps + 1) x soc_levels, infinity where infeasible
  Eigen::MatrixXi policy;  // steps x soc_levels action index, -1 where infeasible
  Eigen::VectorXd soc_grid;
  /// Feasible SOC interval per step (steps + 1 entries). Without snapping
  /// its end points are interpolation knots alongside the grid nodes.
  Eigen::VectorXd feasible_low;
  Eigen::VectorXd feasible_high;
  std::vector<DpTrajectoryPoint> trajectory;
  double realized_fuel = 0.0;  // fuel of the forward-simulated optimal trajectory
  double final_soc = 0.0;
};

DpSolution dp_solve(const DpGrid& grid);

/// Exhaustive search over every action sequence on the same discrete
/// dynamics; throws InstanceTooLarge beyond 1e6 sequences.
double enumerate_solve(const DpGrid& grid);

void write_dp_trajectory(const DpSolution& solution, std::ostream& out);

}  // namespace cofc
