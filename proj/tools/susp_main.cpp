#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "susp/config.hpp"
#include "susp/ddpg.hpp"
#include "susp/env.hpp"
#include "susp/eval.hpp"
#include "susp/io.hpp"
#include "susp/road.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCorruptArtifact = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<std::string> force_mode;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file [path]");
  cmd->add_option("--seed", opts.seed, "master random seed [unsigned integer]");
  cmd->add_option("--out", opts.out_dir, "output directory [path]");
  cmd->add_option("--force-mode", opts.force_mode,
                  "active force law {augmented|paper-literal}")
      ->check(CLI::IsMember({"augmented", "paper-literal"}));
}

susp::RunConfig resolve_config(const CommonOpts& opts) {
  susp::RunConfig config;
  if (!opts.config_path.empty()) {
    config = susp::load_run_config(opts.config_path);
  }
  if (opts.seed) config.seed = *opts.seed;
  if (opts.force_mode) {
    config.vehicle.force_mode = susp::force_mode_from_string(*opts.force_mode);
  }
  return config;
}

struct Checkpoint {
  susp::AgentConfig agent;
  susp::Mlp policy;
};

// Any structural problem with a checkpoint maps to exit code 4.
Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw susp::SpecError("checkpoint not found: " + path);
  json j;
  try {
    j = json::parse(in);
    Checkpoint cp{susp::agent_config_from_json(j.at("config")),
                  susp::mlp_from_json(j.at("networks").at("policy_main"))};
    if (cp.policy.input_dim() != susp::kStateDim ||
        cp.policy.output_dim() != susp::kActionDim) {
      throw susp::ShapeMismatch("policy network must map 6 -> 2");
    }
    return cp;
  } catch (const json::exception& e) {
    throw susp::ShapeMismatch(std::string("corrupt checkpoint: ") + e.what());
  }
}

struct TrainOverrides {
  int episodes = 0;
  int steps = 0;
  double dt = 0.0;
  int interval = 0;
  int checkpoint_every = -1;
  double gamma = 0.0;
  double tau = -1.0;
  int batch_size = 0;
  long buffer_capacity = 0;
  double lr_q = 0.0;
  double lr_policy = 0.0;
  long warmup = -1;
  bool quiet = false;
};

int cmd_train(const CommonOpts& common, const TrainOverrides& o) {
  susp::RunConfig config = resolve_config(common);
  if (o.episodes > 0) config.episodes = o.episodes;
  if (o.steps > 0) config.steps_per_episode = o.steps;
  if (o.dt > 0.0) config.dt = o.dt;
  if (o.interval > 0) config.control_interval = o.interval;
  if (o.checkpoint_every >= 0) config.checkpoint_every = o.checkpoint_every;
  if (o.gamma > 0.0) config.agent.gamma = o.gamma;
  if (o.tau >= 0.0) config.agent.tau = o.tau;
  if (o.batch_size > 0) config.agent.batch_size = o.batch_size;
  if (o.buffer_capacity > 0) {
    config.agent.buffer_capacity = static_cast<std::size_t>(o.buffer_capacity);
  }
  if (o.lr_q > 0.0) config.agent.lr_q = o.lr_q;
  if (o.lr_policy > 0.0) config.agent.lr_policy = o.lr_policy;
  if (o.warmup >= 0) {
    config.agent.warmup_transitions = static_cast<std::size_t>(o.warmup);
  }
  config.agent.validate();
  const bool quiet = o.quiet;

  const std::string started = susp::timestamp_utc_now();
  fs::create_directories(common.out_dir);
  const std::string checkpoint_path =
      (fs::path(common.out_dir) / "checkpoint.json").string();
  const std::string curve_path =
      (fs::path(common.out_dir) / "reward_curve.csv").string();
  const std::string manifest_path =
      (fs::path(common.out_dir) / "manifest.json").string();

  susp::TrainRunConfig train = config.train_config();
  train.checkpoint_path = checkpoint_path;
  if (!quiet) {
    train.progress = [&](int ep, double reward, double sigma) {
      std::printf("episode %4d/%d  cumulative_reward=%.4f  sigma=%.2f\n", ep,
                  config.episodes, reward, sigma);
      std::fflush(stdout);
    };
  }

  const susp::TrainResult result = susp::train(train);
  susp::write_reward_curve_csv(result.reward_curve, curve_path);

  susp::RunManifest manifest;
  manifest.command = "train";
  manifest.seed = config.seed;
  manifest.started_at = started;
  manifest.finished_at = susp::timestamp_utc_now();
  manifest.config = susp::run_config_to_json(config);
  manifest.artifacts = {checkpoint_path, curve_path};
  susp::write_manifest(manifest, manifest_path);

  if (!quiet) {
    std::printf("wrote %s\nwrote %s\nwrote %s\n", checkpoint_path.c_str(),
                curve_path.c_str(), manifest_path.c_str());
  }
  return kExitOk;
}

int cmd_evaluate(const CommonOpts& common, const std::string& checkpoint_path,
                 const std::string& scenario, int experiments_override,
                 long steps_override, int export_trajectories,
                 unsigned threads) {
  susp::RunConfig config = resolve_config(common);
  const Checkpoint cp = load_checkpoint(checkpoint_path);

  susp::EvalConfig eval = config.eval_config();
  eval.road_spec = susp::scenario_road(scenario);
  if (experiments_override > 0) eval.experiments = experiments_override;
  if (steps_override > 0) eval.steps = static_cast<std::size_t>(steps_override);
  if (threads > 0) eval.threads = threads;

  const std::string started = susp::timestamp_utc_now();
  const susp::ControlPolicy policy =
      susp::make_mlp_policy(cp.policy, cp.agent.scaler());
  const susp::ScenarioResult result =
      susp::evaluate_scenario(policy, eval, scenario);

  fs::create_directories(common.out_dir);
  std::vector<std::string> artifacts;
  const std::string metrics_path =
      (fs::path(common.out_dir) / "metrics.json").string();
  susp::atomic_write(metrics_path, [&](std::ostream& out) {
    out << susp::metrics_to_json(result.report, eval).dump(2) << "\n";
  });
  artifacts.push_back(metrics_path);

  int exported = 0;
  for (const susp::TrajectoryPair& pair : result.pairs) {
    if (exported >= export_trajectories) break;
    if (pair.diverged()) continue;
    char name[64];
    std::snprintf(name, sizeof(name), "trajectory_%03d.csv",
                  pair.experiment_index);
    const std::string path = (fs::path(common.out_dir) / name).string();
    susp::write_trajectory_pair_csv(pair, path);
    artifacts.push_back(path);
    ++exported;
  }

  for (int idx : result.report.excluded_experiments) {
    std::fprintf(stderr, "warning: experiment %d diverged and was excluded\n",
                 idx);
  }

  susp::RunManifest manifest;
  manifest.command = "evaluate";
  manifest.seed = eval.seed;
  manifest.started_at = started;
  manifest.finished_at = susp::timestamp_utc_now();
  manifest.config = susp::run_config_to_json(config);
  manifest.config["scenario"] = scenario;
  manifest.artifacts = artifacts;
  susp::write_manifest(manifest,
                       (fs::path(common.out_dir) / "manifest.json").string());

  std::printf(
      "%s: velocity %.2f%% overall / %.2f%% Q3, acceleration %.2f%% overall / "
      "%.2f%% Q3 (K=%d)\n",
      scenario.c_str(), result.report.v_overall, result.report.v_q3,
      result.report.a_overall, result.report.a_q3,
      result.report.effective_experiments);
  return kExitOk;
}

int cmd_simulate(const CommonOpts& common, const std::string& checkpoint_path,
                 const std::string& road_csv, const std::string& scenario,
                 double duration) {
  susp::RunConfig config = resolve_config(common);
  if (road_csv.empty() == scenario.empty()) {
    throw susp::SpecError("simulate needs exactly one of --road or --scenario");
  }

  susp::EvalConfig eval = config.eval_config();
  eval.experiments = 1;
  std::shared_ptr<const susp::RoadTrace> trace;
  std::unique_ptr<susp::RoadSampler> sampler;
  if (!road_csv.empty()) {
    auto loaded = std::make_shared<susp::RoadTrace>(susp::read_road_csv(road_csv));
    eval.dt = loaded->dt;
    eval.steps = loaded->size() - 1;
    eval.road_spec = loaded->spec;
    sampler = susp::make_table_sampler(*loaded);
    trace = std::move(loaded);
  } else {
    eval.road_spec = susp::scenario_road(scenario);
    eval.road_spec.dt = eval.dt;
    eval.road_spec.duration = duration;
    eval.steps = static_cast<std::size_t>(std::llround(duration / eval.dt));
    if (auto* iso = std::get_if<susp::Iso8608Spec>(&eval.road_spec.kind)) {
      iso->seed = susp::derive_seed(eval.seed, "experiment-road", 0);
    }
    sampler = susp::make_road_sampler(eval.road_spec);
    trace = std::make_shared<const susp::RoadTrace>(
        susp::generate_road(eval.road_spec));
  }

  susp::ControlPolicy policy = susp::make_passive_policy();
  if (!checkpoint_path.empty()) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    policy = susp::make_mlp_policy(cp.policy, cp.agent.scaler());
  }

  const std::string started = susp::timestamp_utc_now();
  const susp::TrajectoryPair pair =
      susp::run_pair_on_road(policy, eval, *sampler, trace);
  const susp::RunTrajectory& run =
      checkpoint_path.empty() ? pair.passive : pair.drl;
  if (run.diverged) {
    std::fprintf(stderr, "warning: simulation diverged; trajectory truncated\n");
  }

  fs::create_directories(common.out_dir);
  const std::string traj_path =
      (fs::path(common.out_dir) / "trajectory.csv").string();
  susp::write_single_run_csv(run, *trace, traj_path);

  susp::RunManifest manifest;
  manifest.command = "simulate";
  manifest.seed = eval.seed;
  manifest.started_at = started;
  manifest.finished_at = susp::timestamp_utc_now();
  manifest.config = susp::run_config_to_json(config);
  if (!scenario.empty()) manifest.config["scenario"] = scenario;
  if (!road_csv.empty()) manifest.config["road_csv"] = road_csv;
  manifest.artifacts = {traj_path};
  susp::write_manifest(manifest,
                       (fs::path(common.out_dir) / "manifest.json").string());

  std::printf("wrote %s (%zu samples)\n", traj_path.c_str(), run.x_b.size());
  return kExitOk;
}

int cmd_road_gen(const CommonOpts& common, const std::string& kind,
                 double height, double length, double start, int count,
                 double spacing, const std::string& iso_class, int components,
                 double freq_low, double freq_high, double speed,
                 double duration, double dt, const std::string& out_file) {
  susp::RoadSpec spec;
  spec.vehicle_speed = speed;
  spec.duration = duration;
  spec.dt = dt;
  if (kind == "single-bump") {
    spec.kind = susp::SingleBumpSpec{height, length, start};
  } else if (kind == "multi-hump") {
    spec.kind = susp::MultiHumpSpec{count, height, length, spacing, start};
  } else if (kind == "iso8608") {
    susp::Iso8608Spec iso;
    iso.road_class = susp::iso_class_from_string(iso_class);
    iso.n_components = components;
    iso.freq_low = freq_low;
    iso.freq_high = freq_high;
    iso.seed = common.seed.value_or(0);
    spec.kind = iso;
  } else {
    throw susp::SpecError("unknown road kind '" + kind + "'");
  }

  const std::string started = susp::timestamp_utc_now();
  const susp::RoadTrace trace = susp::generate_road(spec);
  susp::write_road_csv(trace, out_file);

  susp::RunManifest manifest;
  manifest.command = "road-gen";
  manifest.seed = common.seed.value_or(0);
  manifest.started_at = started;
  manifest.finished_at = susp::timestamp_utc_now();
  manifest.config = susp::road_spec_to_json(spec);
  manifest.config["duration"] = duration;
  manifest.config["dt"] = dt;
  manifest.artifacts = {out_file};
  susp::write_manifest(manifest, out_file + ".manifest.json");

  std::printf("wrote %s (%zu samples)\n", out_file.c_str(), trace.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quarter-car active suspension lab: DDPG training, evaluation "
               "and road synthesis"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, sim_opts, road_opts;

  // train
  auto* train = app.add_subcommand("train", "Train the DDPG agent");
  add_common(train, train_opts);
  TrainOverrides tr;
  train->add_option("--episodes", tr.episodes, "number of training episodes [count]");
  train->add_option("--steps", tr.steps, "control steps per episode [count]");
  train->add_option("--dt", tr.dt, "physics time step [s]");
  train->add_option("--control-interval", tr.interval,
                    "physics steps per control action [count]");
  train->add_option("--checkpoint-every", tr.checkpoint_every,
                    "episodes between checkpoints, 0 = final only [count]");
  train->add_option("--gamma", tr.gamma, "discount factor [dimensionless]");
  train->add_option("--tau", tr.tau,
                    "target tracking rate, 1 = frozen [dimensionless]");
  train->add_option("--batch-size", tr.batch_size, "replay batch size [count]");
  train->add_option("--buffer-capacity", tr.buffer_capacity,
                    "replay buffer capacity [count]");
  train->add_option("--lr-q", tr.lr_q, "critic learning rate [1/step]");
  train->add_option("--lr-policy", tr.lr_policy, "policy learning rate [1/step]");
  train->add_option("--warmup", tr.warmup,
                    "transitions stored before updates begin [count]");
  train->add_flag("--quiet", tr.quiet, "suppress per-episode progress output");

  // evaluate
  auto* evaluate =
      app.add_subcommand("evaluate", "Compare a trained policy to the passive suspension");
  add_common(evaluate, eval_opts);
  std::string eval_checkpoint, scenario;
  int experiments = 0, export_trajectories = 5;
  long eval_steps = 0;
  unsigned eval_threads = 0;
  evaluate->add_option("--checkpoint", eval_checkpoint, "agent checkpoint [path]")
      ->required();
  evaluate
      ->add_option("--scenario", scenario,
                   "road scenario {single-bump|multi-hump|iso-a..iso-e}")
      ->required();
  evaluate->add_option("--experiments", experiments, "number of experiments K [count]");
  evaluate->add_option("--steps", eval_steps, "time steps per simulation T [count]");
  evaluate->add_option("--export-trajectories", export_trajectories,
                       "how many pair trajectory CSVs to write [count]");
  evaluate->add_option("--threads", eval_threads,
                       "worker threads, 0 = hardware [count]");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Single rollout over one road");
  add_common(simulate, sim_opts);
  std::string sim_checkpoint, road_csv, sim_scenario;
  double duration = 10.0;
  simulate->add_option("--checkpoint", sim_checkpoint,
                       "agent checkpoint [path]; passive run when omitted");
  simulate->add_option("--road", road_csv, "road trace CSV to ingest [path]");
  simulate->add_option("--scenario", sim_scenario,
                       "generate the road of a named scenario "
                       "{single-bump|multi-hump|iso-a..iso-e}");
  simulate->add_option("--duration", duration, "simulation length [s]");

  // road-gen
  auto* road_gen = app.add_subcommand("road-gen", "Generate a road trace CSV");
  add_common(road_gen, road_opts);
  std::string kind = "single-bump", iso_class = "E", out_file = "road.csv";
  double height = 0.1, length = 5.0, start = 25.0, spacing = 15.0;
  int count = 3, components = 400;
  double freq_low = 0.011, freq_high = 2.83, speed = 20.0, gen_duration = 10.0,
         gen_dt = 1e-3;
  road_gen->add_option("--kind", kind,
                       "road family {single-bump|multi-hump|iso8608}");
  road_gen->add_option("--height", height, "bump height [m]");
  road_gen->add_option("--length", length, "bump length [m]");
  road_gen->add_option("--start", start, "bump start position [m]");
  road_gen->add_option("--count", count, "number of humps [count]");
  road_gen->add_option("--spacing", spacing, "distance between hump starts [m]");
  road_gen->add_option("--class", iso_class, "ISO 8608 roughness class {A..E}");
  road_gen->add_option("--components", components,
                       "number of sinusoidal components [count]");
  road_gen->add_option("--freq-low", freq_low, "lowest spatial frequency [cycles/m]");
  road_gen->add_option("--freq-high", freq_high,
                       "highest spatial frequency [cycles/m]");
  road_gen->add_option("--speed", speed, "vehicle speed [m/s]");
  road_gen->add_option("--duration", gen_duration, "trace duration [s]");
  road_gen->add_option("--dt", gen_dt, "sample interval [s]");
  road_gen->add_option("--out-file", out_file, "output CSV path [path]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      return cmd_train(train_opts, tr);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_opts, eval_checkpoint, scenario, experiments,
                          eval_steps, export_trajectories, eval_threads);
    }
    if (simulate->parsed()) {
      return cmd_simulate(sim_opts, sim_checkpoint, road_csv, sim_scenario,
                          duration);
    }
    if (road_gen->parsed()) {
      return cmd_road_gen(road_opts, kind, height, length, start, count,
                          spacing, iso_class, components, freq_low, freq_high,
                          speed, gen_duration, gen_dt, out_file);
    }
  } catch (const susp::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const susp::ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCorruptArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
