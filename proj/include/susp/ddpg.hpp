#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "susp/dynamics.hpp"
#include "susp/neural.hpp"
#include "susp/rng.hpp"

#include "json.hpp"

namespace susp {

inline constexpr std::size_t kStateDim = 6;
inline constexpr std::size_t kActionDim = 2;

using StateVec = std::array<double, kStateDim>;
using ActionVec = std::array<double, kActionDim>;  // physical units (k_a, c_a)

struct Transition {
  StateVec state{};
  ActionVec action{};
  double reward = 0.0;
  StateVec next_state{};
};

// Bounded ring of transitions; once full, the oldest entries are overwritten
// in insertion order.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void store(const Transition& t);
  std::size_t size() const { return occupancy_; }
  std::size_t capacity() const { return storage_.size(); }

  // Storage-slot access; iteration order is unspecified.
  const Transition& slot(std::size_t i) const { return storage_[i]; }

  // Uniform sampling with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
  std::vector<Transition> sample_batch(std::size_t batch_size, Rng& rng) const;

 private:
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
  std::size_t occupancy_ = 0;
};

struct NoiseBand {
  int first_episode = 1;
  int last_episode = 1;
  double sigma = 0.0;
};

// Per-dimension affine map from normalized [-1, 1] outputs to physical units.
class ActionScaler {
 public:
  ActionScaler(std::array<double, kActionDim> low,
               std::array<double, kActionDim> high);

  ActiveAction scale(const ActionVec& raw) const;
  // Inverse map: physical units back to the normalized [-1, 1] coordinates.
  ActionVec normalize(const ActiveAction& action) const;
  // d(physical)/d(raw), per dimension.
  double jacobian(std::size_t dim) const { return 0.5 * (high_[dim] - low_[dim]); }
  double low(std::size_t dim) const { return low_[dim]; }
  double high(std::size_t dim) const { return high_[dim]; }

 private:
  std::array<double, kActionDim> low_;
  std::array<double, kActionDim> high_;
};

enum class UpdateOrder {
  ActorFirst,   // actor, critic, target policy, target Q
  CriticFirst,  // critic, actor, target policy, target Q
};

struct AgentConfig {
  double gamma = 0.95;
  double tau = 0.99;
  std::size_t batch_size = 512;
  std::size_t buffer_capacity = 100000;
  double lr_q = 1e-3;
  double lr_policy = 1e-4;
  std::vector<NoiseBand> noise_schedule = {
      {1, 100, 0.5}, {101, 200, 0.3}, {201, 500, 0.15}, {501, 700, 0.05}};
  std::array<double, kActionDim> action_low = {kMinActiveStiffness,
                                               kMinActiveDamping};
  std::array<double, kActionDim> action_high = {kMaxActiveStiffness,
                                                kMaxActiveDamping};
  std::size_t warmup_transitions = 512;
  UpdateOrder update_order = UpdateOrder::ActorFirst;
  std::vector<std::size_t> policy_hidden = {16, 16};
  std::vector<std::size_t> q_hidden = {32, 32};

  void validate() const;
  ActionScaler scaler() const { return {action_low, action_high}; }
};

nlohmann::json agent_config_to_json(const AgentConfig& c);
AgentConfig agent_config_from_json(const nlohmann::json& j);

// Exploration noise for a 1-based episode index; episodes past the last band
// keep the final sigma.
double sigma_for_episode(const AgentConfig& config, int episode);

// Policy with tanh output over the given state, optionally perturbed by
// Gaussian noise in normalized action space, clipped, then scaled to physical
// units. sigma = 0 is the deterministic inference path (no RNG draw).
ActiveAction select_action(const Mlp& policy, const StateVec& state,
                           double sigma, const ActionScaler& scaler, Rng& rng);

// TD(0) critic regression toward y = r + gamma * Q_t(s', pi_t(s')).
// One Adam step on q_main; returns the mean squared TD error before the step.
// The Q networks consume the action through the scaler's normalized
// coordinates, keeping all eight inputs on comparable scales; their interface
// stays in physical units.
double critic_update(Mlp& q_main, AdamState& q_opt, const Mlp& q_target,
                     const Mlp& policy_target, const ActionScaler& scaler,
                     std::span<const Transition> batch,
                     const AgentConfig& config);

// Signature of a critic for the actor update: fills dq_da (gradient of Q with
// respect to the physical action) and returns Q(s, a).
using CriticEval = std::function<double(
    const StateVec& state, const ActionVec& physical_action, ActionVec& dq_da)>;

// Ascent gradient of J = mean_s Q(s, scale(policy(s))) with respect to the
// policy parameters, chained through the affine scaler and the tanh output.
// Returns mean Q through the out-parameter.
Gradients actor_gradient(const Mlp& policy, const ActionScaler& scaler,
                         std::span<const StateVec> states,
                         const CriticEval& critic, double& mean_q);

// Gradient ascent on J; one Adam step on the policy; returns mean Q before
// the step. The generic form backs both the MLP critic path and synthetic
// critics in tests.
double actor_update_with_critic(Mlp& policy_main, AdamState& policy_opt,
                                const ActionScaler& scaler,
                                std::span<const StateVec> states,
                                const CriticEval& critic);
double actor_update(Mlp& policy_main, AdamState& policy_opt, const Mlp& q_main,
                    const ActionScaler& scaler,
                    std::span<const Transition> batch,
                    const AgentConfig& config);

// Soft-updates both target networks (policy first, then Q).
void update_targets(Mlp& policy_target, Mlp& q_target, const Mlp& policy_main,
                    const Mlp& q_main, double tau);

// The four-network DDPG learner plus replay buffer and optimizers.
class DdpgAgent {
 public:
  DdpgAgent(const AgentConfig& config, std::uint64_t seed);

  ActiveAction act(const StateVec& state, double sigma);
  void observe(const Transition& t) { buffer_.store(t); }

  bool warmed_up() const;
  // Runs one round of updates in the configured order; no-op before warmup.
  void update();

  const AgentConfig& config() const { return config_; }
  const Mlp& policy() const { return policy_main_; }
  const Mlp& q_network() const { return q_main_; }
  const Mlp& policy_target() const { return policy_target_; }
  const Mlp& q_target() const { return q_target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const ActionScaler& scaler() const { return scaler_; }

  double last_critic_loss() const { return last_critic_loss_; }
  double last_actor_q() const { return last_actor_q_; }

  int episode_counter = 0;

  nlohmann::json checkpoint() const;
  static DdpgAgent restore(const nlohmann::json& j, std::uint64_t seed);

 private:
  AgentConfig config_;
  ActionScaler scaler_;
  Mlp policy_main_, policy_target_;
  Mlp q_main_, q_target_;
  AdamState policy_opt_, q_opt_;
  ReplayBuffer buffer_;
  Rng noise_rng_, replay_rng_;
  double last_critic_loss_ = 0.0;
  double last_actor_q_ = 0.0;
};

// Deterministic control policy for evaluation: observation -> bounded action.
using ControlPolicy = std::function<ActiveAction(const StateVec&)>;

ControlPolicy make_mlp_policy(Mlp policy, ActionScaler scaler);
ControlPolicy make_passive_policy();

}  // namespace susp
