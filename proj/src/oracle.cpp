#include "cofc/oracle.hpp"

#include "cofc/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <functional>
#include <thread>

namespace cofc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-12;

using Intervals = std::vector<std::pair<double, double>>;

/// Cost-to-go over one feasible interval, piecewise linear between knots.
struct Segment {
  std::vector<double> knots;
  std::vector<double> values;

  double lo() const { return knots.front(); }
  double hi() const { return knots.back(); }

  double at(double soc) const {
    if (knots.size() == 1) return values.front();
    const auto it = std::upper_bound(knots.begin(), knots.end(), soc);
    if (it == knots.begin()) return values.front();
    if (it == knots.end()) return values.back();
    const auto i = static_cast<std::size_t>(it - knots.begin()) - 1;
    const double w = (soc - knots[i]) / (knots[i + 1] - knots[i]);
    if (w == 0.0) return values[i];
    if (values[i] == kInf || values[i + 1] == kInf) return kInf;
    return values[i] + w * (values[i + 1] - values[i]);
  }
};

/// Cost-to-go of one step; infinite outside every segment.
struct ValueRow {
  std::vector<Segment> segments;

  double at(double soc) const {
    auto it = std::upper_bound(segments.begin(), segments.end(), soc,
                               [](double s, const Segment& seg) { return s < seg.lo() - kSlack; });
    if (it == segments.begin()) return kInf;
    --it;
    if (soc > it->hi() + kSlack) return kInf;
    return it->at(soc);
  }
};

Intervals merge_intervals(Intervals v, std::size_t max_count) {
  std::sort(v.begin(), v.end());
  Intervals out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second + kSlack) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  // Too fragmented: close the narrowest gaps (conservative, since points in
  // a closed gap just evaluate to infinity).
  while (out.size() > max_count) {
    std::size_t k = 0;
    for (std::size_t i = 1; i + 1 < out.size(); ++i) {
      if (out[i + 1].first - out[i].second < out[k + 1].first - out[k].second) k = i;
    }
    out[k].second = out[k + 1].second;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(k) + 1);
  }
  return out;
}

/// Successor model shared by backward induction, forward simulation and
/// enumeration.
class Stage {
 public:
  explicit Stage(const DpGrid& grid)
      : grid_(grid),
        nodes_(grid.soc_nodes()),
        actions_(grid.actions()),
        horizon_(grid.corridor.horizon),
        cell_(grid.cell()) {}

  std::size_t horizon() const { return horizon_; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& actions() const { return actions_; }

  struct Successor {
    double soc = 0.0;
    double fuel = 0.0;
    bool feasible = false;
  };

  Successor next(std::size_t t, double soc, double engine) const {
    const DriveCycle& cycle = *grid_.cycle;
    const PowertrainStep ps = advance_powertrain(soc, cycle.speed(t), cycle.speed(t + 1), cycle.dt(), engine,
                                                 grid_.params);
    Successor out{ps.soc, ps.fuel, false};
    if (grid_.snap_to_grid) out.soc = nodes_[nearest(out.soc)];
    out.feasible = admissible(t + 1, out.soc);
    return out;
  }

  /// Allowed SOC band at step t: the corridor, or the terminal window.
  std::pair<double, double> band(std::size_t t) const {
    double lo = nodes_[0];
    double hi = nodes_[nodes_.size() - 1];
    if (t == horizon_) {
      const double b = grid_.corridor.balance;
      const double tol = grid_.terminal_window();
      return {std::max(lo, b - tol), std::min(hi, b + tol)};
    }
    const auto [upper, lower] = corridor_limits(t, grid_.corridor);
    return {std::max(lo, lower), std::min(hi, upper)};
  }

  bool admissible(std::size_t t, double soc) const {
    const auto [lo, hi] = band(t);
    return soc >= lo - kSlack && soc <= hi + kSlack;
  }

  Eigen::Index nearest(double soc) const {
    const double pos = (soc - nodes_[0]) / cell_;
    return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(pos)), 0, nodes_.size() - 1);
  }

  struct Choice {
    double value = kInf;
    Eigen::Index action = -1;
  };

  Choice best(const ValueRow& next_row, std::size_t t, double soc) const {
    Choice choice;
    for (Eigen::Index k = 0; k < actions_.size(); ++k) {
      const Successor s = next(t, soc, actions_[k]);
      if (!s.feasible) continue;
      const double v = s.fuel + next_row.at(s.soc);
      if (v < choice.value) choice = {v, k};
    }
    return choice;
  }

  /// SOC change of one action at step t, evaluated at `soc`.
  double delta(std::size_t t, double soc, double engine) const {
    const DriveCycle& cycle = *grid_.cycle;
    return advance_powertrain(soc, cycle.speed(t), cycle.speed(t + 1), cycle.dt(), engine, grid_.params).soc -
           soc;
  }

 private:
  const DpGrid& grid_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd actions_;
  std::size_t horizon_;
  double cell_;
};

void validate(const DpGrid& grid) {
  if (!grid.cycle) throw Error(ErrorCode::Config, "DP grid has no drive cycle");
  if (grid.soc_levels < 2 || grid.action_levels < 2) {
    throw Error(ErrorCode::Config, "DP grid needs at least two SOC and two action levels");
  }
  grid.corridor.validate();
  if (grid.corridor.horizon > grid.cycle->steps()) {
    throw Error(ErrorCode::Config, "corridor horizon exceeds the drive cycle length");
  }
  if (!(grid.highest() > grid.lowest())) throw Error(ErrorCode::Config, "empty SOC grid range");
  if (!(grid.max_action() > 0.0) || grid.max_action() > grid.params.engine.max_power) {
    throw Error(ErrorCode::Config, "action_max must lie in (0, engine max power]");
  }
  if (grid.terminal_tolerance && !(*grid.terminal_tolerance >= 0.0)) {
    throw Error(ErrorCode::Config, "terminal_tolerance must be non-negative");
  }
}

double enumerate_from(const Stage& stage, std::size_t t, double soc) {
  if (t == stage.horizon()) return 0.0;
  double best = kInf;
  for (Eigen::Index k = 0; k < stage.actions().size(); ++k) {
    const Stage::Successor s = stage.next(t, soc, stage.actions()[k]);
    if (!s.feasible) continue;
    const double v = s.fuel + enumerate_from(stage, t + 1, s.soc);
    if (v < best) best = v;
  }
  return best;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += threads) body(i);
    });
  }
}

}  // namespace

double DpGrid::cell() const { return (highest() - lowest()) / static_cast<double>(soc_levels - 1); }

Eigen::VectorXd DpGrid::soc_nodes() const {
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(soc_levels), lowest(), highest());
}

Eigen::VectorXd DpGrid::actions() const {
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(action_levels), 0.0, max_action());
}

DpSolution dp_solve(const DpGrid& grid) {
  validate(grid);
  const std::size_t steps = grid.corridor.horizon;
  const double work = static_cast<double>(grid.soc_levels) * static_cast<double>(grid.action_levels) *
                      static_cast<double>(steps);
  if (work > grid.work_budget) throw Error(ErrorCode::InstanceTooLarge, "DP instance exceeds the work budget");

  const Stage stage(grid);
  const auto n = static_cast<Eigen::Index>(grid.soc_levels);
  const auto rows = static_cast<Eigen::Index>(steps) + 1;
  DpSolution sol;
  sol.soc_grid = stage.nodes();
  sol.value = Eigen::MatrixXd::Constant(rows, n, kInf);
  sol.policy = Eigen::MatrixXi::Constant(rows - 1, n, -1);
  sol.feasible_low = Eigen::VectorXd::Constant(rows, kInf);
  sol.feasible_high = Eigen::VectorXd::Constant(rows, -kInf);

  const std::size_t max_intervals = 4 * grid.soc_levels;
  auto segment_knots = [&](double lo, double hi) {
    std::vector<double> knots;
    if (grid.snap_to_grid) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = sol.soc_grid[i];
        if (s >= lo - kSlack && s <= hi + kSlack) knots.push_back(s);
      }
      return knots;
    }
    knots.push_back(lo);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sol.soc_grid[i];
      if (s > lo + kSlack && s < hi - kSlack) knots.push_back(s);
    }
    if (hi > lo + kSlack) knots.push_back(hi);
    return knots;
  };

  std::vector<ValueRow> value_rows(steps + 1);
  auto fill_row = [&](std::size_t t, const Intervals& feasible, const ValueRow* next_row) {
    ValueRow& row = value_rows[t];
    const auto r = static_cast<Eigen::Index>(t);
    for (const auto& [lo, hi] : feasible) {
      Segment seg;
      seg.knots = segment_knots(lo, hi);
      if (seg.knots.empty()) continue;
      seg.values.assign(seg.knots.size(), 0.0);
      if (next_row) {
        parallel_for(seg.knots.size(), grid.threads,
                     [&](std::size_t i) { seg.values[i] = stage.best(*next_row, t, seg.knots[i]).value; });
      }
      sol.feasible_low[r] = std::min(sol.feasible_low[r], seg.lo());
      sol.feasible_high[r] = std::max(sol.feasible_high[r], seg.hi());
      row.segments.push_back(std::move(seg));
    }
    if (row.segments.empty()) throw Error(ErrorCode::Infeasible, "no action sequence keeps SOC in the corridor");
    for (Eigen::Index i = 0; i < n; ++i) {
      sol.value(r, i) = row.at(sol.soc_grid[i]);
      if (next_row && std::isfinite(sol.value(r, i))) {
        sol.policy(r, i) = static_cast<int>(stage.best(*next_row, t, sol.soc_grid[i]).action);
      }
    }
  };

  Intervals feasible;
  {
    const auto [lo, hi] = stage.band(steps);
    if (hi >= lo - kSlack) feasible.push_back({lo, std::max(lo, hi)});
    if (feasible.empty()) throw Error(ErrorCode::Infeasible, "terminal window lies outside the SOC grid");
    fill_row(steps, feasible, nullptr);
  }
  for (std::size_t t = steps; t-- > 0;) {
    // SOC values from which some action lands in the next feasible set,
    // restricted to this step's band.
    const auto [band_lo, band_hi] = stage.band(t);
    Intervals pre;
    for (const auto& [lo, hi] : feasible) {
      for (Eigen::Index k = 0; k < stage.actions().size(); ++k) {
        const double a = stage.actions()[k];
        const double from = std::max(band_lo, lo - stage.delta(t, lo, a));
        const double to = std::min(band_hi, hi - stage.delta(t, hi, a));
        if (to >= from - kSlack) pre.push_back({from, std::max(from, to)});
      }
    }
    feasible = merge_intervals(std::move(pre), max_intervals);
    if (feasible.empty()) throw Error(ErrorCode::Infeasible, "no action sequence keeps SOC in the corridor");
    fill_row(t, feasible, &value_rows[t + 1]);
  }

  // The start state is evaluated exactly rather than read from the grid.
  const double start = grid.corridor.balance;
  sol.min_fuel = stage.best(value_rows[1], 0, start).value;
  sol.feasible = std::isfinite(sol.min_fuel);
  if (!sol.feasible) throw Error(ErrorCode::Infeasible, "no action sequence keeps SOC in the corridor");

  double soc = start;
  for (std::size_t t = 0; t < steps; ++t) {
    const Stage::Choice c = stage.best(value_rows[t + 1], t, soc);
    if (c.action < 0) break;
    const double engine = stage.actions()[c.action];
    const Stage::Successor s = stage.next(t, soc, engine);
    const auto limits = corridor_limits(t, grid.corridor);
    sol.trajectory.push_back({t, soc, engine, s.fuel, limits.upper, limits.lower});
    sol.realized_fuel += s.fuel;
    soc = s.soc;
  }
  sol.final_soc = soc;
  return sol;
}

double enumerate_solve(const DpGrid& grid) {
  validate(grid);
  const double sequences =
      std::pow(static_cast<double>(grid.action_levels), static_cast<double>(grid.corridor.horizon));
  if (sequences > 1e6) throw Error(ErrorCode::InstanceTooLarge, "more than 1e6 action sequences");
  const Stage stage(grid);
  const double best = enumerate_from(stage, 0, grid.corridor.balance);
  if (!std::isfinite(best)) throw Error(ErrorCode::Infeasible, "no action sequence keeps SOC in the corridor");
  return best;
}

void write_dp_trajectory(const DpSolution& solution, std::ostream& out) {
  out << "t,soc,P_eng,fuel_g,upper,lower\n" << std::setprecision(10);
  for (const auto& p : solution.trajectory) {
    out << p.t << ',' << p.soc << ',' << p.engine << ',' << p.fuel << ',' << p.upper << ',' << p.lower
        << '\n';
  }
}

}  // namespace cofc
