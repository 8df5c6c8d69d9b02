#include "susp/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "susp/io.hpp"
#include "susp/rng.hpp"

namespace susp {

void EpisodeConfig::validate() const {
  if (steps_per_episode < 1) throw SpecError("steps_per_episode must be >= 1");
  if (control_interval < 1) throw SpecError("control_interval must be >= 1");
  if (!(dt > 0.0)) throw SpecError("dt must be > 0");
  vehicle.validate();
}

void TrainRunConfig::validate() const {
  if (n_episodes < 1) throw SpecError("n_episodes must be >= 1");
  agent.validate();
  episode.validate();
}

SuspensionEnv::SuspensionEnv(EpisodeConfig config) : config_(std::move(config)) {
  config_.validate();
}

Observation SuspensionEnv::reset(std::uint64_t road_seed) {
  RoadSpec spec = config_.road_spec;
  spec.dt = config_.dt;
  // A trace longer than the episode is fine (the episode ends early); it just
  // must cover every sample the episode can reach.
  spec.duration = std::max(spec.duration, config_.episode_duration());
  if (auto* iso = std::get_if<Iso8608Spec>(&spec.kind)) {
    iso->seed = road_seed;
  }
  auto sampler = std::shared_ptr<const RoadSampler>(make_road_sampler(spec));
  auto trace = std::make_shared<const RoadTrace>(generate_road(spec));
  return reset(std::move(sampler), std::move(trace));
}

Observation SuspensionEnv::reset(std::shared_ptr<const RoadSampler> sampler,
                                 std::shared_ptr<const RoadTrace> trace) {
  const std::size_t needed =
      config_.steps_per_episode * config_.control_interval + 1;
  if (!sampler || !trace) throw SpecError("reset requires a road");
  if (trace->size() < needed) {
    throw SpecError("road trace has " + std::to_string(trace->size()) +
                    " samples, episode needs " + std::to_string(needed));
  }
  sampler_ = std::move(sampler);
  trace_ = std::move(trace);
  state_ = VehicleState{};
  sample_index_ = 0;
  control_steps_ = 0;
  done_ = false;
  diverged_ = false;
  obs_ = Observation{};
  obs_.v_r = trace_->v_r[0];
  return obs_;
}

StepResult SuspensionEnv::step(const ActiveAction& action) {
  if (done_) throw SpecError("step called on a finished episode");
  if (!action_in_bounds(action)) {
    throw SpecError("action outside physical bounds");
  }
  const Observation prev = obs_;
  const auto road_fn = [this](double t) { return sampler_->eval(t); };

  try {
    for (std::size_t i = 0; i < config_.control_interval; ++i) {
      const double t = static_cast<double>(sample_index_) * config_.dt;
      state_ = step_rk4(state_, road_fn, action, config_.vehicle, t, config_.dt);
      ++sample_index_;
    }
  } catch (const NumericalDivergence&) {
    // state_ still holds the last finite state; end the episode there.
    diverged_ = true;
    done_ = true;
  }

  ++control_steps_;
  if (control_steps_ >= config_.steps_per_episode) done_ = true;

  const double reward = -kRewardVelocityWeight * std::fabs(state_.v_b);
  obs_.v_b = state_.v_b;
  obs_.v_w = state_.v_w;
  obs_.v_r = trace_->v_r[sample_index_];
  obs_.v_b_prev = prev.v_b;
  obs_.v_w_prev = prev.v_w;
  obs_.v_r_prev = prev.v_r;
  return {obs_, reward, done_};
}

TrainResult train(const TrainRunConfig& config) {
  config.validate();
  DdpgAgent agent(config.agent, derive_seed(config.seed, "agent"));
  SuspensionEnv env(config.episode);

  TrainResult result;
  result.reward_curve.reserve(config.n_episodes);

  for (int ep = 1; ep <= config.n_episodes; ++ep) {
    const double sigma = sigma_for_episode(config.agent, ep);
    Observation obs = env.reset(derive_seed(config.seed, "episode-road", ep));
    double cumulative = 0.0;

    while (true) {
      const StateVec state = obs.to_state();
      const ActiveAction action = agent.act(state, sigma);
      const StepResult sr = env.step(action);
      cumulative += sr.reward;
      if (!env.diverged()) {
        agent.observe({state,
                       {action.k_a, action.c_a},
                       sr.reward,
                       sr.observation.to_state()});
        agent.update();
      }
      obs = sr.observation;
      if (sr.done) break;
    }

    agent.episode_counter = ep;
    result.reward_curve.push_back(cumulative);
    if (config.progress) config.progress(ep, cumulative, sigma);
    if (!config.checkpoint_path.empty() && config.checkpoint_every > 0 &&
        ep % config.checkpoint_every == 0) {
      const nlohmann::json snapshot = agent.checkpoint();
      atomic_write(config.checkpoint_path,
                   [&](std::ostream& out) { out << snapshot.dump(2) << "\n"; });
    }
  }

  result.checkpoint = agent.checkpoint();
  if (!config.checkpoint_path.empty()) {
    atomic_write(config.checkpoint_path, [&](std::ostream& out) {
      out << result.checkpoint.dump(2) << "\n";
    });
  }
  return result;
}

void write_reward_curve_csv(const std::vector<double>& curve,
                            const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "episode,cumulative_reward\n";
    char line[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
      std::snprintf(line, sizeof(line), "%zu,%.17g\n", i + 1, curve[i]);
      out << line;
    }
  });
}

}  // namespace susp
