#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "susp/ddpg.hpp"
#include "susp/dynamics.hpp"
#include "susp/env.hpp"
#include "susp/eval.hpp"
#include "susp/road.hpp"

#include "json.hpp"

namespace susp {

inline constexpr const char* kVersion = "0.1.0";

// Whole-run configuration shared by the CLI commands. Defaults mirror the
// published training setup.
struct RunConfig {
  std::uint64_t seed = 1;
  QuarterCarParams vehicle;
  RoadSpec road;  // kind + speed; duration/dt filled per command
  // training
  int episodes = 700;
  std::size_t steps_per_episode = 2000;
  double dt = 1e-3;
  std::size_t control_interval = 1;
  int checkpoint_every = 100;
  AgentConfig agent;
  // evaluation
  int experiments = 50;
  std::size_t eval_steps = 10000;
  unsigned threads = 0;

  RunConfig() {
    road.kind = Iso8608Spec{};
    road.vehicle_speed = 20.0;
    road.duration = 0.0;  // sized by each command
  }

  TrainRunConfig train_config() const;
  EvalConfig eval_config() const;
};

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

// Parses a JSON config file; error messages carry the path and, for syntax
// errors, the line number.
RunConfig load_run_config(const std::string& path);

nlohmann::json road_spec_to_json(const RoadSpec& spec);
RoadSpec road_spec_from_json(const nlohmann::json& j);

nlohmann::json vehicle_to_json(const QuarterCarParams& p);
QuarterCarParams vehicle_from_json(const nlohmann::json& j);

ForceMode force_mode_from_string(const std::string& s);
std::string to_string(ForceMode mode);

// Road spec for a named evaluation scenario: single-bump, multi-hump,
// iso-a .. iso-e.
RoadSpec scenario_road(const std::string& name);
std::vector<std::string> scenario_names();

// Run metadata written once every artifact is in place.
struct RunManifest {
  std::string command;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  nlohmann::json config;
  std::vector<std::string> artifacts;
};

// Verifies that every listed artifact exists, then writes atomically.
void write_manifest(const RunManifest& manifest, const std::string& path);

std::string timestamp_utc_now();

}  // namespace susp
