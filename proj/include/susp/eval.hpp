#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "susp/ddpg.hpp"
#include "susp/env.hpp"
#include "susp/road.hpp"

#include "json.hpp"

namespace susp {

struct EvalConfig {
  int experiments = 50;           // K
  std::size_t steps = 10000;      // T, control steps per simulation
  double dt = 1e-3;
  std::size_t control_interval = 1;
  RoadSpec road_spec;
  QuarterCarParams vehicle;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

// One simulated leg; arrays have steps+1 samples on the dt grid.
struct RunTrajectory {
  std::vector<double> x_b, v_b, a_b, x_w;
  std::vector<double> k_a, c_a;
  std::uint64_t road_checksum = 0;  // hash of every road input fed to the integrator
  bool diverged = false;
};

struct TrajectoryPair {
  std::shared_ptr<const RoadTrace> road;
  RunTrajectory passive;
  RunTrajectory drl;
  int experiment_index = 0;
  bool diverged() const { return passive.diverged || drl.diverged; }
};

// Simulates passive and DRL runs over the identical road realization from
// identical rest initial conditions.
TrajectoryPair run_pair(const ControlPolicy& policy, const EvalConfig& config,
                        int experiment_index);

// Same, but on a caller-provided road (e.g. ingested from CSV).
TrajectoryPair run_pair_on_road(const ControlPolicy& policy,
                                const EvalConfig& config,
                                const RoadSampler& sampler,
                                std::shared_ptr<const RoadTrace> trace);

// (1/K)(1/T) * sum of |values| over all experiments.
double mean_abs(const std::vector<std::vector<double>>& signal);

// Percentage change of the DRL mean against the passive mean; negative when
// DRL improves.
double overall_reduction(double mu_drl, double mu_passive);

// Linear-interpolation percentile of |values|, q in [0, 1].
double abs_percentile(const std::vector<double>& values, double q);

// Reduction restricted to the samples where the passive signal is at or above
// its per-experiment q-th |value| percentile (the same time indices are used
// in both signals).
double q3_reduction_at(const std::vector<std::vector<double>>& drl,
                       const std::vector<std::vector<double>>& passive,
                       double q);
double q3_reduction(const std::vector<std::vector<double>>& drl,
                    const std::vector<std::vector<double>>& passive);

struct MetricsReport {
  std::string scenario;
  double v_overall = 0.0, v_q3 = 0.0;
  double a_overall = 0.0, a_q3 = 0.0;
  double mu_v_passive = 0.0, mu_v_drl = 0.0;
  double mu_a_passive = 0.0, mu_a_drl = 0.0;
  std::vector<double> per_exp_v_passive, per_exp_v_drl;
  std::vector<double> per_exp_a_passive, per_exp_a_drl;
  int requested_experiments = 0;
  int effective_experiments = 0;
  std::vector<int> excluded_experiments;
  // Seconds from the end of the last hump until |x_b| stays below 1e-4 m;
  // only for bump scenarios.
  std::optional<double> stabilization_time_passive;
  std::optional<double> stabilization_time_drl;
};

nlohmann::json metrics_to_json(const MetricsReport& report,
                               const EvalConfig& config);

struct ScenarioResult {
  MetricsReport report;
  std::vector<TrajectoryPair> pairs;  // experiment-index order
};

// Aggregates the four reduction metrics over experiment pairs; diverged pairs
// are excluded and reported, never silently folded into the denominators.
MetricsReport aggregate_pairs(const std::vector<TrajectoryPair>& pairs,
                              const std::string& scenario_name, double dt);

// Runs K experiment pairs (in parallel; result order is deterministic) and
// aggregates the four reduction metrics.
ScenarioResult evaluate_scenario(const ControlPolicy& policy,
                                 const EvalConfig& config,
                                 const std::string& scenario_name);

inline constexpr double kStabilizationThreshold = 1e-4;  // [m]

// Time from the end of road excitation until |x_b| last exceeds the
// stabilization threshold. Empty for roads without a defined end (ISO).
std::optional<double> stabilization_time(const RunTrajectory& run,
                                         const RoadSpec& spec, double dt);

// Header: t,x_r,x_b_passive,v_b_passive,a_b_passive,x_b_drl,v_b_drl,a_b_drl,k_a,c_a
void write_trajectory_pair_csv(const TrajectoryPair& pair,
                               const std::string& path);

// Single-leg export, header: t,x_r,x_b,v_b,a_b,x_w,k_a,c_a
void write_single_run_csv(const RunTrajectory& run, const RoadTrace& road,
                          const std::string& path);

}  // namespace susp
