#include "susp/ddpg.hpp"

#include <algorithm>
#include <cmath>

namespace susp {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw SpecError("replay buffer capacity must be >= 1");
  storage_.resize(capacity);
}

void ReplayBuffer::store(const Transition& t) {
  storage_[cursor_] = t;
  cursor_ = (cursor_ + 1) % storage_.size();
  if (occupancy_ < storage_.size()) ++occupancy_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size,
                                                      Rng& rng) const {
  if (occupancy_ < batch_size) {
    throw InsufficientData("replay buffer holds " + std::to_string(occupancy_) +
                           " transitions, batch needs " +
                           std::to_string(batch_size));
  }
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t& i : idx) i = rng.uniform_index(occupancy_);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample_batch(std::size_t batch_size,
                                                   Rng& rng) const {
  const auto idx = sample_indices(batch_size, rng);
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i : idx) batch.push_back(storage_[i]);
  return batch;
}

ActionScaler::ActionScaler(std::array<double, kActionDim> low,
                           std::array<double, kActionDim> high)
    : low_(low), high_(high) {
  for (std::size_t d = 0; d < kActionDim; ++d) {
    if (!(low_[d] < high_[d])) {
      throw SpecError("action bounds must satisfy low < high");
    }
  }
}

ActiveAction ActionScaler::scale(const ActionVec& raw) const {
  ActionVec out;
  for (std::size_t d = 0; d < kActionDim; ++d) {
    out[d] = low_[d] + (raw[d] + 1.0) * 0.5 * (high_[d] - low_[d]);
  }
  return {out[0], out[1]};
}

ActionVec ActionScaler::normalize(const ActiveAction& action) const {
  ActionVec phys{action.k_a, action.c_a};
  ActionVec raw;
  for (std::size_t d = 0; d < kActionDim; ++d) {
    raw[d] = (phys[d] - low_[d]) / (high_[d] - low_[d]) * 2.0 - 1.0;
  }
  return raw;
}

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw SpecError("gamma must be in (0,1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw SpecError("tau must be in [0,1]");
  if (batch_size < 1) throw SpecError("batch_size must be >= 1");
  if (buffer_capacity < batch_size) {
    throw SpecError("buffer capacity must be >= batch size");
  }
  if (!(lr_q > 0.0) || !(lr_policy > 0.0)) {
    throw SpecError("learning rates must be > 0");
  }
  if (noise_schedule.empty()) throw SpecError("noise schedule must be non-empty");
  double prev_sigma = 1.0;
  int prev_last = 0;
  for (const NoiseBand& band : noise_schedule) {
    if (band.first_episode <= prev_last) {
      throw SpecError("noise schedule bands must be ascending and disjoint");
    }
    if (band.last_episode < band.first_episode) {
      throw SpecError("noise band range is inverted");
    }
    if (!(band.sigma >= 0.0 && band.sigma <= 1.0)) {
      throw SpecError("noise sigma must be in [0,1]");
    }
    if (band.sigma > prev_sigma) {
      throw SpecError("noise sigmas must be non-increasing over episodes");
    }
    prev_sigma = band.sigma;
    prev_last = band.last_episode;
  }
  for (std::size_t d = 0; d < kActionDim; ++d) {
    if (!(action_low[d] < action_high[d])) {
      throw SpecError("action bounds must satisfy low < high");
    }
  }
}

double sigma_for_episode(const AgentConfig& config, int episode) {
  const auto& bands = config.noise_schedule;
  for (const NoiseBand& band : bands) {
    if (episode <= band.last_episode) return band.sigma;
  }
  return bands.back().sigma;
}

nlohmann::json agent_config_to_json(const AgentConfig& c) {
  nlohmann::json schedule = nlohmann::json::array();
  for (const NoiseBand& band : c.noise_schedule) {
    schedule.push_back({{"from_episode", band.first_episode},
                        {"to_episode", band.last_episode},
                        {"sigma", band.sigma}});
  }
  return {
      {"gamma", c.gamma},
      {"tau", c.tau},
      {"batch_size", c.batch_size},
      {"buffer_capacity", c.buffer_capacity},
      {"lr_q", c.lr_q},
      {"lr_policy", c.lr_policy},
      {"noise_schedule", schedule},
      {"action_low", c.action_low},
      {"action_high", c.action_high},
      {"warmup_transitions", c.warmup_transitions},
      {"update_order",
       c.update_order == UpdateOrder::ActorFirst ? "actor_first" : "critic_first"},
      {"policy_hidden", c.policy_hidden},
      {"q_hidden", c.q_hidden},
  };
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.tau = j.value("tau", c.tau);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.lr_q = j.value("lr_q", c.lr_q);
  c.lr_policy = j.value("lr_policy", c.lr_policy);
  if (j.contains("noise_schedule")) {
    c.noise_schedule.clear();
    for (const auto& band : j.at("noise_schedule")) {
      c.noise_schedule.push_back({band.at("from_episode").get<int>(),
                                  band.at("to_episode").get<int>(),
                                  band.at("sigma").get<double>()});
    }
  }
  if (j.contains("action_low")) {
    c.action_low = j.at("action_low").get<std::array<double, kActionDim>>();
  }
  if (j.contains("action_high")) {
    c.action_high = j.at("action_high").get<std::array<double, kActionDim>>();
  }
  c.warmup_transitions = j.value("warmup_transitions", c.warmup_transitions);
  if (j.contains("update_order")) {
    const std::string order = j.at("update_order").get<std::string>();
    if (order == "actor_first") {
      c.update_order = UpdateOrder::ActorFirst;
    } else if (order == "critic_first") {
      c.update_order = UpdateOrder::CriticFirst;
    } else {
      throw SpecError("unknown update_order '" + order + "'");
    }
  }
  if (j.contains("policy_hidden")) {
    c.policy_hidden = j.at("policy_hidden").get<std::vector<std::size_t>>();
  }
  if (j.contains("q_hidden")) {
    c.q_hidden = j.at("q_hidden").get<std::vector<std::size_t>>();
  }
  c.validate();
  return c;
}

ActiveAction select_action(const Mlp& policy, const StateVec& state,
                           double sigma, const ActionScaler& scaler, Rng& rng) {
  static thread_local ForwardCache cache;
  const std::vector<double>& out = forward(policy, state, cache);
  ActionVec raw{out[0], out[1]};
  if (sigma > 0.0) {
    for (double& r : raw) {
      r += rng.normal(0.0, sigma);
      r = std::clamp(r, -1.0, 1.0);
    }
  }
  return scaler.scale(raw);
}

double critic_update(Mlp& q_main, AdamState& q_opt, const Mlp& q_target,
                     const Mlp& policy_target, const ActionScaler& scaler,
                     std::span<const Transition> batch,
                     const AgentConfig& config) {
  if (batch.empty()) throw InsufficientData("critic_update: empty batch");
  const double n = static_cast<double>(batch.size());

  Gradients grads = make_gradients(q_main);
  ForwardCache pol_cache, tq_cache, q_cache;
  std::array<double, kStateDim + kActionDim> q_in;
  double loss = 0.0;

  for (const Transition& t : batch) {
    // Bootstrap target from the frozen target networks; the physical action
    // enters the Q net in normalized coordinates.
    const std::vector<double>& raw_next =
        forward(policy_target, t.next_state, pol_cache);
    const ActiveAction a_next = scaler.scale({raw_next[0], raw_next[1]});
    const ActionVec a_next_feat = scaler.normalize(a_next);
    std::copy(t.next_state.begin(), t.next_state.end(), q_in.begin());
    q_in[kStateDim] = a_next_feat[0];
    q_in[kStateDim + 1] = a_next_feat[1];
    const double q_next = forward(q_target, q_in, tq_cache)[0];
    const double y = t.reward + config.gamma * q_next;

    const ActionVec a_feat = scaler.normalize({t.action[0], t.action[1]});
    std::copy(t.state.begin(), t.state.end(), q_in.begin());
    q_in[kStateDim] = a_feat[0];
    q_in[kStateDim + 1] = a_feat[1];
    const double q = forward(q_main, q_in, q_cache)[0];

    const double diff = q - y;
    loss += diff * diff;
    const double upstream = 2.0 * diff / n;
    backward_accumulate(q_main, q_cache, std::span(&upstream, 1), grads);
  }

  adam_step(q_main, grads, q_opt);
  return loss / n;
}

Gradients actor_gradient(const Mlp& policy, const ActionScaler& scaler,
                         std::span<const StateVec> states,
                         const CriticEval& critic, double& mean_q) {
  if (states.empty()) throw InsufficientData("actor_update: empty batch");
  const double n = static_cast<double>(states.size());

  Gradients grads = make_gradients(policy);
  ForwardCache cache;
  mean_q = 0.0;

  for (const StateVec& s : states) {
    const std::vector<double>& raw = forward(policy, s, cache);
    const ActiveAction a = scaler.scale({raw[0], raw[1]});
    ActionVec dq_da{};
    mean_q += critic(s, {a.k_a, a.c_a}, dq_da);
    // Chain dQ/da through the affine scaler into the tanh output.
    std::array<double, kActionDim> upstream;
    for (std::size_t d = 0; d < kActionDim; ++d) {
      upstream[d] = dq_da[d] * scaler.jacobian(d);
    }
    backward_accumulate(policy, cache, upstream, grads);
  }
  grads.scale(1.0 / n);
  mean_q /= n;
  return grads;
}

double actor_update_with_critic(Mlp& policy_main, AdamState& policy_opt,
                                const ActionScaler& scaler,
                                std::span<const StateVec> states,
                                const CriticEval& critic) {
  double mean_q = 0.0;
  Gradients grads =
      actor_gradient(policy_main, scaler, states, critic, mean_q);
  // Ascent on J: Adam minimizes, so feed it -dJ/dtheta.
  grads.scale(-1.0);
  adam_step(policy_main, grads, policy_opt);
  return mean_q;
}

double actor_update(Mlp& policy_main, AdamState& policy_opt, const Mlp& q_main,
                    const ActionScaler& scaler,
                    std::span<const Transition> batch,
                    const AgentConfig& config) {
  (void)config;
  ForwardCache q_cache;
  std::array<double, kStateDim + kActionDim> q_in;
  std::array<double, kStateDim + kActionDim> in_grad;
  const CriticEval critic = [&](const StateVec& s, const ActionVec& a,
                                ActionVec& dq_da) {
    const ActionVec feat = scaler.normalize({a[0], a[1]});
    std::copy(s.begin(), s.end(), q_in.begin());
    q_in[kStateDim] = feat[0];
    q_in[kStateDim + 1] = feat[1];
    const double q = forward(q_main, q_in, q_cache)[0];
    constexpr double one = 1.0;
    input_gradient(q_main, q_cache, std::span(&one, 1), in_grad);
    // Chain through the normalization back to physical units.
    dq_da = {in_grad[kStateDim] / scaler.jacobian(0),
             in_grad[kStateDim + 1] / scaler.jacobian(1)};
    return q;
  };

  std::vector<StateVec> states;
  states.reserve(batch.size());
  for (const Transition& t : batch) states.push_back(t.state);
  return actor_update_with_critic(policy_main, policy_opt, scaler, states,
                                  critic);
}

void update_targets(Mlp& policy_target, Mlp& q_target, const Mlp& policy_main,
                    const Mlp& q_main, double tau) {
  soft_update(policy_target, policy_main, tau);
  soft_update(q_target, q_main, tau);
}

namespace {

std::vector<Activation> hidden_then(const std::vector<std::size_t>& hidden,
                                    Activation out_act) {
  std::vector<Activation> acts(hidden.size(), Activation::ReLU);
  acts.push_back(out_act);
  return acts;
}

std::vector<std::size_t> chain(std::size_t in,
                               const std::vector<std::size_t>& hidden,
                               std::size_t out) {
  std::vector<std::size_t> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

DdpgAgent::DdpgAgent(const AgentConfig& config, std::uint64_t seed)
    : config_(config),
      scaler_(config.scaler()),
      policy_main_(init_mlp(chain(kStateDim, config.policy_hidden, kActionDim),
                            hidden_then(config.policy_hidden, Activation::Tanh),
                            derive_seed(seed, "policy-init"))),
      policy_target_(policy_main_),
      q_main_(init_mlp(chain(kStateDim + kActionDim, config.q_hidden, 1),
                       hidden_then(config.q_hidden, Activation::Linear),
                       derive_seed(seed, "q-init"))),
      q_target_(q_main_),
      policy_opt_(make_adam(policy_main_, config.lr_policy)),
      q_opt_(make_adam(q_main_, config.lr_q)),
      buffer_(config.buffer_capacity),
      noise_rng_(derive_seed(seed, "exploration-noise")),
      replay_rng_(derive_seed(seed, "replay-sampling")) {
  config_.validate();
}

ActiveAction DdpgAgent::act(const StateVec& state, double sigma) {
  return select_action(policy_main_, state, sigma, scaler_, noise_rng_);
}

bool DdpgAgent::warmed_up() const {
  return buffer_.size() >= std::max(config_.batch_size, config_.warmup_transitions);
}

void DdpgAgent::update() {
  if (!warmed_up()) return;
  const std::vector<Transition> batch =
      buffer_.sample_batch(config_.batch_size, replay_rng_);
  const auto run_actor = [&] {
    last_actor_q_ =
        actor_update(policy_main_, policy_opt_, q_main_, scaler_, batch, config_);
  };
  const auto run_critic = [&] {
    last_critic_loss_ = critic_update(q_main_, q_opt_, q_target_,
                                      policy_target_, scaler_, batch, config_);
  };
  if (config_.update_order == UpdateOrder::ActorFirst) {
    run_actor();
    run_critic();
  } else {
    run_critic();
    run_actor();
  }
  update_targets(policy_target_, q_target_, policy_main_, q_main_, config_.tau);
}

nlohmann::json DdpgAgent::checkpoint() const {
  return {{"format_version", 1},
          {"episode", episode_counter},
          {"config", agent_config_to_json(config_)},
          {"networks",
           {{"policy_main", mlp_to_json(policy_main_)},
            {"policy_target", mlp_to_json(policy_target_)},
            {"q_main", mlp_to_json(q_main_)},
            {"q_target", mlp_to_json(q_target_)}}}};
}

DdpgAgent DdpgAgent::restore(const nlohmann::json& j, std::uint64_t seed) {
  const AgentConfig config = agent_config_from_json(j.at("config"));
  DdpgAgent agent(config, seed);
  agent.episode_counter = j.at("episode").get<int>();
  const auto& nets = j.at("networks");
  Mlp policy_main = mlp_from_json(nets.at("policy_main"));
  Mlp policy_target = mlp_from_json(nets.at("policy_target"));
  Mlp q_main = mlp_from_json(nets.at("q_main"));
  Mlp q_target = mlp_from_json(nets.at("q_target"));
  if (!policy_main.same_architecture(agent.policy_main_) ||
      !policy_target.same_architecture(agent.policy_main_) ||
      !q_main.same_architecture(agent.q_main_) ||
      !q_target.same_architecture(agent.q_main_)) {
    throw ShapeMismatch("checkpoint networks do not match the config");
  }
  agent.policy_main_ = std::move(policy_main);
  agent.policy_target_ = std::move(policy_target);
  agent.q_main_ = std::move(q_main);
  agent.q_target_ = std::move(q_target);
  return agent;
}

ControlPolicy make_mlp_policy(Mlp policy, ActionScaler scaler) {
  if (policy.input_dim() != kStateDim || policy.output_dim() != kActionDim) {
    throw ShapeMismatch("control policy must map 6 -> 2");
  }
  return [net = std::move(policy), scaler](const StateVec& state) {
    const std::vector<double> raw = forward(net, state);
    ActionVec clipped{std::clamp(raw[0], -1.0, 1.0),
                      std::clamp(raw[1], -1.0, 1.0)};
    return scaler.scale(clipped);
  };
}

ControlPolicy make_passive_policy() {
  return [](const StateVec&) { return ActiveAction{0.0, 0.0}; };
}

}  // namespace susp
