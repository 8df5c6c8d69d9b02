#include "susp/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "susp/io.hpp"

namespace susp {

ForceMode force_mode_from_string(const std::string& s) {
  if (s == "augmented") return ForceMode::Augmented;
  if (s == "paper-literal" || s == "paper_literal") return ForceMode::PaperLiteral;
  throw SpecError("unknown force mode '" + s +
                  "' (expected augmented or paper-literal)");
}

std::string to_string(ForceMode mode) {
  return mode == ForceMode::Augmented ? "augmented" : "paper-literal";
}

nlohmann::json vehicle_to_json(const QuarterCarParams& p) {
  return {{"m_b", p.m_b}, {"m_w", p.m_w},           {"k_b", p.k_b},
          {"c_b", p.c_b}, {"k_w", p.k_w},           {"c_w", p.c_w},
          {"force_mode", to_string(p.force_mode)}};
}

QuarterCarParams vehicle_from_json(const nlohmann::json& j) {
  QuarterCarParams p;
  p.m_b = j.value("m_b", p.m_b);
  p.m_w = j.value("m_w", p.m_w);
  p.k_b = j.value("k_b", p.k_b);
  p.c_b = j.value("c_b", p.c_b);
  p.k_w = j.value("k_w", p.k_w);
  p.c_w = j.value("c_w", p.c_w);
  if (j.contains("force_mode")) {
    p.force_mode = force_mode_from_string(j.at("force_mode").get<std::string>());
  }
  p.validate();
  return p;
}

nlohmann::json road_spec_to_json(const RoadSpec& spec) {
  nlohmann::json j{{"speed", spec.vehicle_speed}};
  if (const auto* b = std::get_if<SingleBumpSpec>(&spec.kind)) {
    j["kind"] = "single-bump";
    j["height"] = b->height;
    j["length"] = b->length;
    j["start_position"] = b->start_position;
  } else if (const auto* m = std::get_if<MultiHumpSpec>(&spec.kind)) {
    j["kind"] = "multi-hump";
    j["count"] = m->count;
    j["height"] = m->height;
    j["length"] = m->length;
    j["spacing"] = m->spacing;
    j["start_position"] = m->start_position;
  } else if (const auto* iso = std::get_if<Iso8608Spec>(&spec.kind)) {
    j["kind"] = "iso8608";
    j["class"] = to_string(iso->road_class);
    j["n_components"] = iso->n_components;
    j["freq_low"] = iso->freq_low;
    j["freq_high"] = iso->freq_high;
  } else {
    j["kind"] = "external";
  }
  return j;
}

RoadSpec road_spec_from_json(const nlohmann::json& j) {
  RoadSpec spec;
  spec.vehicle_speed = j.value("speed", spec.vehicle_speed);
  const std::string kind = j.value("kind", std::string("iso8608"));
  if (kind == "single-bump") {
    SingleBumpSpec b;
    b.height = j.value("height", b.height);
    b.length = j.value("length", b.length);
    b.start_position = j.value("start_position", b.start_position);
    spec.kind = b;
  } else if (kind == "multi-hump") {
    MultiHumpSpec m;
    m.count = j.value("count", m.count);
    m.height = j.value("height", m.height);
    m.length = j.value("length", m.length);
    m.spacing = j.value("spacing", m.spacing);
    m.start_position = j.value("start_position", m.start_position);
    spec.kind = m;
  } else if (kind == "iso8608") {
    Iso8608Spec iso;
    if (j.contains("class")) {
      iso.road_class = iso_class_from_string(j.at("class").get<std::string>());
    }
    iso.n_components = j.value("n_components", iso.n_components);
    iso.freq_low = j.value("freq_low", iso.freq_low);
    iso.freq_high = j.value("freq_high", iso.freq_high);
    spec.kind = iso;
  } else {
    throw SpecError("unknown road kind '" + kind + "'");
  }
  return spec;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"vehicle", vehicle_to_json(c.vehicle)},
          {"road", road_spec_to_json(c.road)},
          {"training",
           {{"episodes", c.episodes},
            {"steps_per_episode", c.steps_per_episode},
            {"dt", c.dt},
            {"control_interval", c.control_interval},
            {"checkpoint_every", c.checkpoint_every}}},
          {"agent", agent_config_to_json(c.agent)},
          {"evaluation",
           {{"experiments", c.experiments},
            {"steps", c.eval_steps},
            {"threads", c.threads}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("vehicle")) c.vehicle = vehicle_from_json(j.at("vehicle"));
  if (j.contains("road")) c.road = road_spec_from_json(j.at("road"));
  if (j.contains("training")) {
    const auto& t = j.at("training");
    c.episodes = t.value("episodes", c.episodes);
    c.steps_per_episode = t.value("steps_per_episode", c.steps_per_episode);
    c.dt = t.value("dt", c.dt);
    c.control_interval = t.value("control_interval", c.control_interval);
    c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
  }
  if (j.contains("agent")) c.agent = agent_config_from_json(j.at("agent"));
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    c.experiments = e.value("experiments", c.experiments);
    c.eval_steps = e.value("steps", c.eval_steps);
    c.threads = e.value("threads", c.threads);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // Recover the line number from the byte offset.
    std::ifstream again(path);
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && again; ++i) {
      if (again.get() == '\n') ++line;
    }
    throw SpecError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(path + ": " + e.what());
  }
}

TrainRunConfig RunConfig::train_config() const {
  TrainRunConfig t;
  t.n_episodes = episodes;
  t.agent = agent;
  t.episode.steps_per_episode = steps_per_episode;
  t.episode.dt = dt;
  t.episode.control_interval = control_interval;
  t.episode.road_spec = road;
  t.episode.vehicle = vehicle;
  t.seed = seed;
  t.checkpoint_every = checkpoint_every;
  return t;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.experiments = experiments;
  e.steps = eval_steps;
  e.dt = dt;
  e.control_interval = control_interval;
  e.road_spec = road;
  e.vehicle = vehicle;
  e.seed = seed;
  e.threads = threads;
  return e;
}

RoadSpec scenario_road(const std::string& name) {
  RoadSpec spec;
  spec.vehicle_speed = 20.0;
  if (name == "single-bump") {
    spec.kind = SingleBumpSpec{};
    return spec;
  }
  if (name == "multi-hump") {
    spec.kind = MultiHumpSpec{};
    return spec;
  }
  if (name.rfind("iso-", 0) == 0 && name.size() == 5) {
    Iso8608Spec iso;
    iso.road_class = iso_class_from_string(name.substr(4));
    spec.kind = iso;
    return spec;
  }
  std::string valid;
  for (const std::string& s : scenario_names()) valid += " " + s;
  throw SpecError("unknown scenario '" + name + "'; valid scenarios:" + valid);
}

std::vector<std::string> scenario_names() {
  return {"single-bump", "multi-hump", "iso-a", "iso-b", "iso-c", "iso-d",
          "iso-e"};
}

std::string timestamp_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  for (const std::string& artifact : manifest.artifacts) {
    if (!std::filesystem::exists(artifact)) {
      throw std::runtime_error("manifest lists missing artifact: " + artifact);
    }
  }
  const nlohmann::json j{{"command", manifest.command},
                         {"version", manifest.version},
                         {"seed", manifest.seed},
                         {"started_at", manifest.started_at},
                         {"finished_at", manifest.finished_at},
                         {"config", manifest.config},
                         {"artifacts", manifest.artifacts}};
  atomic_write(path, [&](std::ostream& out) { out << j.dump(2) << "\n"; });
}

}  // namespace susp
