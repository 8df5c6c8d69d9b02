#include "susp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <thread>

#include "susp/io.hpp"
#include "susp/rng.hpp"

namespace susp {

void EvalConfig::validate() const {
  if (experiments < 1) throw SpecError("experiments (K) must be >= 1");
  if (steps < 1) throw SpecError("steps (T) must be >= 1");
  if (!(dt > 0.0)) throw SpecError("dt must be > 0");
  if (control_interval < 1) throw SpecError("control_interval must be >= 1");
  vehicle.validate();
}

namespace {

// Records every road input the integrator consumes, so a pair can prove both
// legs saw the identical road.
class HashingSampler final : public RoadSampler {
 public:
  explicit HashingSampler(const RoadSampler& inner) : inner_(inner) {}

  RoadInput eval(double t) const override {
    const RoadInput r = inner_.eval(t);
    mix(r.x_r);
    mix(r.v_r);
    return r;
  }

  std::uint64_t hash() const { return hash_; }

 private:
  void mix(double v) const {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    hash_ ^= bits;
    hash_ *= 0x100000001b3ull;  // FNV-1a
  }

  const RoadSampler& inner_;
  mutable std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

RunTrajectory rollout(const ControlPolicy& policy, const EvalConfig& config,
                      const RoadSampler& road, std::shared_ptr<const RoadTrace> trace) {
  EpisodeConfig episode;
  episode.steps_per_episode = config.steps;
  episode.dt = config.dt;
  episode.control_interval = config.control_interval;
  episode.road_spec = config.road_spec;
  episode.vehicle = config.vehicle;

  SuspensionEnv env(episode);
  auto hashing = std::make_shared<HashingSampler>(road);
  Observation obs = env.reset(hashing, std::move(trace));

  const std::size_t n = config.steps + 1;
  RunTrajectory out;
  out.x_b.reserve(n);
  out.v_b.reserve(n);
  out.a_b.reserve(n);
  out.x_w.reserve(n);
  out.k_a.reserve(n);
  out.c_a.reserve(n);

  const auto record = [&](const ActiveAction& action) {
    const VehicleState& s = env.state();
    const RoadInput r = env.trace().at(env.sample_index());
    const double f_a = active_force(s, action, config.vehicle);
    out.x_b.push_back(s.x_b);
    out.v_b.push_back(s.v_b);
    out.a_b.push_back(outputs(s, r, f_a, config.vehicle).body_accel);
    out.x_w.push_back(s.x_w);
    out.k_a.push_back(action.k_a);
    out.c_a.push_back(action.c_a);
  };

  ActiveAction action{};
  for (std::size_t k = 0; k < config.steps; ++k) {
    action = policy(obs.to_state());
    record(action);
    const StepResult sr = env.step(action);
    obs = sr.observation;
    if (env.diverged()) {
      out.diverged = true;
      break;
    }
  }
  if (!out.diverged) record(action);
  out.road_checksum = hashing->hash();
  return out;
}

}  // namespace

TrajectoryPair run_pair_on_road(const ControlPolicy& policy,
                                const EvalConfig& config,
                                const RoadSampler& sampler,
                                std::shared_ptr<const RoadTrace> trace) {
  config.validate();
  TrajectoryPair pair;
  pair.road = trace;
  pair.passive = rollout(make_passive_policy(), config, sampler, trace);
  pair.drl = rollout(policy, config, sampler, std::move(trace));
  return pair;
}

TrajectoryPair run_pair(const ControlPolicy& policy, const EvalConfig& config,
                        int experiment_index) {
  config.validate();
  RoadSpec spec = config.road_spec;
  spec.dt = config.dt;
  spec.duration =
      static_cast<double>(config.steps * config.control_interval) * config.dt;
  if (auto* iso = std::get_if<Iso8608Spec>(&spec.kind)) {
    iso->seed = derive_seed(config.seed, "experiment-road",
                            static_cast<std::uint64_t>(experiment_index));
  }
  const auto sampler = make_road_sampler(spec);
  auto trace = std::make_shared<const RoadTrace>(generate_road(spec));

  TrajectoryPair pair =
      run_pair_on_road(policy, config, *sampler, std::move(trace));
  pair.experiment_index = experiment_index;
  return pair;
}

double mean_abs(const std::vector<std::vector<double>>& signal) {
  if (signal.empty() || signal.front().empty()) {
    throw InsufficientData("mean_abs: empty signal");
  }
  const double k = static_cast<double>(signal.size());
  double total = 0.0;
  for (const auto& experiment : signal) {
    if (experiment.empty()) throw InsufficientData("mean_abs: empty experiment");
    double acc = 0.0;
    for (double v : experiment) acc += std::fabs(v);
    total += acc / static_cast<double>(experiment.size());
  }
  return total / k;
}

double overall_reduction(double mu_drl, double mu_passive) {
  if (mu_passive == 0.0) {
    throw SpecError("overall_reduction: passive mean is zero");
  }
  return (mu_drl - mu_passive) / mu_passive * 100.0;
}

double abs_percentile(const std::vector<double>& values, double q) {
  if (values.empty()) throw InsufficientData("abs_percentile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw SpecError("percentile q must be in [0,1]");
  std::vector<double> mags(values.size());
  std::transform(values.begin(), values.end(), mags.begin(),
                 [](double v) { return std::fabs(v); });
  std::sort(mags.begin(), mags.end());
  const double pos = q * static_cast<double>(mags.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= mags.size()) return mags.back();
  const double frac = pos - static_cast<double>(lo);
  return mags[lo] + frac * (mags[lo + 1] - mags[lo]);
}

double q3_reduction_at(const std::vector<std::vector<double>>& drl,
                       const std::vector<std::vector<double>>& passive,
                       double q) {
  if (drl.size() != passive.size() || drl.empty()) {
    throw InsufficientData("q3_reduction: shape mismatch or empty");
  }
  double mu_drl = 0.0;
  double mu_passive = 0.0;
  for (std::size_t k = 0; k < passive.size(); ++k) {
    if (drl[k].size() != passive[k].size() || passive[k].empty()) {
      throw InsufficientData("q3_reduction: shape mismatch or empty");
    }
    const double threshold = abs_percentile(passive[k], q);
    double acc_p = 0.0, acc_d = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < passive[k].size(); ++t) {
      if (std::fabs(passive[k][t]) >= threshold) {
        acc_p += std::fabs(passive[k][t]);
        acc_d += std::fabs(drl[k][t]);
        ++count;
      }
    }
    mu_passive += acc_p / static_cast<double>(count);
    mu_drl += acc_d / static_cast<double>(count);
  }
  mu_passive /= static_cast<double>(passive.size());
  mu_drl /= static_cast<double>(drl.size());
  return overall_reduction(mu_drl, mu_passive);
}

double q3_reduction(const std::vector<std::vector<double>>& drl,
                    const std::vector<std::vector<double>>& passive) {
  return q3_reduction_at(drl, passive, 0.75);
}

std::optional<double> stabilization_time(const RunTrajectory& run,
                                         const RoadSpec& spec, double dt) {
  double end_position = 0.0;
  if (const auto* b = std::get_if<SingleBumpSpec>(&spec.kind)) {
    end_position = b->start_position + b->length;
  } else if (const auto* m = std::get_if<MultiHumpSpec>(&spec.kind)) {
    end_position = m->start_position + (m->count - 1) * m->spacing + m->length;
  } else {
    return std::nullopt;
  }
  const double t_end = end_position / spec.vehicle_speed;
  const auto first = static_cast<std::size_t>(std::ceil(t_end / dt));
  double last_exceed = t_end;
  for (std::size_t i = first; i < run.x_b.size(); ++i) {
    if (std::fabs(run.x_b[i]) >= kStabilizationThreshold) {
      last_exceed = static_cast<double>(i) * dt;
    }
  }
  return last_exceed - t_end;
}

MetricsReport aggregate_pairs(const std::vector<TrajectoryPair>& pairs,
                              const std::string& scenario_name, double dt) {
  MetricsReport report;
  report.scenario = scenario_name;
  report.requested_experiments = static_cast<int>(pairs.size());

  std::vector<std::vector<double>> v_passive, v_drl, a_passive, a_drl;
  for (const TrajectoryPair& pair : pairs) {
    if (pair.diverged()) {
      report.excluded_experiments.push_back(pair.experiment_index);
      continue;
    }
    // Post-step samples 1..T enter the metrics; sample 0 is the rest state.
    v_passive.emplace_back(pair.passive.v_b.begin() + 1, pair.passive.v_b.end());
    v_drl.emplace_back(pair.drl.v_b.begin() + 1, pair.drl.v_b.end());
    a_passive.emplace_back(pair.passive.a_b.begin() + 1, pair.passive.a_b.end());
    a_drl.emplace_back(pair.drl.a_b.begin() + 1, pair.drl.a_b.end());
  }
  report.effective_experiments = static_cast<int>(v_passive.size());
  if (report.effective_experiments == 0) {
    throw NumericalDivergence("all experiment pairs diverged");
  }

  for (std::size_t i = 0; i < v_passive.size(); ++i) {
    report.per_exp_v_passive.push_back(mean_abs({v_passive[i]}));
    report.per_exp_v_drl.push_back(mean_abs({v_drl[i]}));
    report.per_exp_a_passive.push_back(mean_abs({a_passive[i]}));
    report.per_exp_a_drl.push_back(mean_abs({a_drl[i]}));
  }
  report.mu_v_passive = mean_abs(v_passive);
  report.mu_v_drl = mean_abs(v_drl);
  report.mu_a_passive = mean_abs(a_passive);
  report.mu_a_drl = mean_abs(a_drl);
  report.v_overall = overall_reduction(report.mu_v_drl, report.mu_v_passive);
  report.a_overall = overall_reduction(report.mu_a_drl, report.mu_a_passive);
  report.v_q3 = q3_reduction(v_drl, v_passive);
  report.a_q3 = q3_reduction(a_drl, a_passive);

  // Stabilization time of the first non-diverged pair (bump roads are
  // identical across experiments).
  for (const TrajectoryPair& pair : pairs) {
    if (pair.diverged()) continue;
    report.stabilization_time_passive =
        stabilization_time(pair.passive, pair.road->spec, dt);
    report.stabilization_time_drl =
        stabilization_time(pair.drl, pair.road->spec, dt);
    break;
  }

  return report;
}

ScenarioResult evaluate_scenario(const ControlPolicy& policy,
                                 const EvalConfig& config,
                                 const std::string& scenario_name) {
  config.validate();
  const int k = config.experiments;
  std::vector<TrajectoryPair> pairs(k);

  unsigned n_threads = config.threads;
  if (n_threads == 0) {
    n_threads = std::max(1u, std::thread::hardware_concurrency());
  }
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(k));

  std::atomic<int> next{0};
  const auto worker = [&] {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= k) break;
      pairs[idx] = run_pair(policy, config, idx);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  MetricsReport report = aggregate_pairs(pairs, scenario_name, config.dt);
  return {std::move(report), std::move(pairs)};
}

nlohmann::json metrics_to_json(const MetricsReport& report,
                               const EvalConfig& config) {
  nlohmann::json j{
      {"scenario", report.scenario},
      {"velocity_reduction_overall_pct", report.v_overall},
      {"velocity_reduction_q3_pct", report.v_q3},
      {"acceleration_reduction_overall_pct", report.a_overall},
      {"acceleration_reduction_q3_pct", report.a_q3},
      {"mean_abs_velocity_passive", report.mu_v_passive},
      {"mean_abs_velocity_drl", report.mu_v_drl},
      {"mean_abs_acceleration_passive", report.mu_a_passive},
      {"mean_abs_acceleration_drl", report.mu_a_drl},
      {"per_experiment",
       {{"velocity_passive", report.per_exp_v_passive},
        {"velocity_drl", report.per_exp_v_drl},
        {"acceleration_passive", report.per_exp_a_passive},
        {"acceleration_drl", report.per_exp_a_drl}}},
      {"requested_experiments", report.requested_experiments},
      {"effective_experiments", report.effective_experiments},
      {"excluded_experiments", report.excluded_experiments},
      {"config",
       {{"experiments", config.experiments},
        {"steps", config.steps},
        {"dt", config.dt},
        {"control_interval", config.control_interval},
        {"seed", config.seed}}},
  };
  if (report.stabilization_time_passive) {
    j["stabilization_time_passive_s"] = *report.stabilization_time_passive;
    j["stabilization_time_drl_s"] = *report.stabilization_time_drl;
  }
  return j;
}

void write_single_run_csv(const RunTrajectory& run, const RoadTrace& road,
                          const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "t,x_r,x_b,v_b,a_b,x_w,k_a,c_a\n";
    char line[384];
    for (std::size_t i = 0; i < run.x_b.size(); ++i) {
      std::snprintf(line, sizeof(line),
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<double>(i) * road.dt, road.x_r[i], run.x_b[i],
                    run.v_b[i], run.a_b[i], run.x_w[i], run.k_a[i],
                    run.c_a[i]);
      out << line;
    }
  });
}

void write_trajectory_pair_csv(const TrajectoryPair& pair,
                               const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "t,x_r,x_b_passive,v_b_passive,a_b_passive,"
           "x_b_drl,v_b_drl,a_b_drl,k_a,c_a\n";
    const std::size_t n =
        std::min(pair.passive.x_b.size(), pair.drl.x_b.size());
    const double dt = pair.road->dt;
    char line[512];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(line, sizeof(line),
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<double>(i) * dt, pair.road->x_r[i],
                    pair.passive.x_b[i], pair.passive.v_b[i],
                    pair.passive.a_b[i], pair.drl.x_b[i], pair.drl.v_b[i],
                    pair.drl.a_b[i], pair.drl.k_a[i], pair.drl.c_a[i]);
      out << line;
    }
  });
}

}  // namespace susp
