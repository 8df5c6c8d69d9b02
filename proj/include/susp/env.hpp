#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "susp/ddpg.hpp"
#include "susp/dynamics.hpp"
#include "susp/road.hpp"

#include "json.hpp"

namespace susp {

// Reward weight on |body velocity|.
inline constexpr double kRewardVelocityWeight = 0.1;

// Current and previous control-step velocities of body, wheel and road.
struct Observation {
  double v_b = 0.0;
  double v_w = 0.0;
  double v_r = 0.0;
  double v_b_prev = 0.0;
  double v_w_prev = 0.0;
  double v_r_prev = 0.0;

  StateVec to_state() const {
    return {v_b, v_w, v_r, v_b_prev, v_w_prev, v_r_prev};
  }
};

struct EpisodeConfig {
  std::size_t steps_per_episode = 2000;  // control steps
  double dt = 1e-3;                      // physics step [s]
  std::size_t control_interval = 1;      // physics steps per control step
  RoadSpec road_spec;                    // family template; duration/dt derived
  QuarterCarParams vehicle;

  void validate() const;
  double episode_duration() const {
    return static_cast<double>(steps_per_episode * control_interval) * dt;
  }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

// Couples the quarter-car dynamics with one road realization into an episodic
// reset/step interface.
class SuspensionEnv {
 public:
  explicit SuspensionEnv(EpisodeConfig config);

  // Starts an episode on a fresh road realization (ISO roads draw their
  // phases from road_seed; deterministic roads ignore it).
  Observation reset(std::uint64_t road_seed);
  // Starts an episode on an externally supplied road.
  Observation reset(std::shared_ptr<const RoadSampler> sampler,
                    std::shared_ptr<const RoadTrace> trace);

  StepResult step(const ActiveAction& action);

  const EpisodeConfig& config() const { return config_; }
  const VehicleState& state() const { return state_; }
  const RoadTrace& trace() const { return *trace_; }
  std::size_t sample_index() const { return sample_index_; }
  double time() const { return static_cast<double>(sample_index_) * config_.dt; }
  bool done() const { return done_; }
  bool diverged() const { return diverged_; }

 private:
  EpisodeConfig config_;
  std::shared_ptr<const RoadSampler> sampler_;
  std::shared_ptr<const RoadTrace> trace_;
  VehicleState state_;
  Observation obs_;
  std::size_t sample_index_ = 0;
  std::size_t control_steps_ = 0;
  bool done_ = true;
  bool diverged_ = false;
};

struct TrainRunConfig {
  int n_episodes = 700;
  AgentConfig agent;
  EpisodeConfig episode;
  std::uint64_t seed = 1;
  std::string checkpoint_path;  // empty: keep checkpoints in memory only
  int checkpoint_every = 0;     // episodes between on-disk checkpoints; 0 = final only
  // episode index, cumulative reward, sigma
  std::function<void(int, double, double)> progress;

  void validate() const;
};

struct TrainResult {
  std::vector<double> reward_curve;  // cumulative reward per episode
  nlohmann::json checkpoint;         // final agent checkpoint
};

// Full DDPG training loop with the exploration-noise schedule. Every source
// of randomness derives from config.seed.
TrainResult train(const TrainRunConfig& config);

void write_reward_curve_csv(const std::vector<double>& curve,
                            const std::string& path);

}  // namespace susp
