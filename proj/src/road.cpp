#include "susp/road.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "susp/io.hpp"
#include "susp/rng.hpp"

namespace susp {

double iso_roughness_coefficient(IsoClass c) {
  switch (c) {
    case IsoClass::A: return 16e-6;
    case IsoClass::B: return 64e-6;
    case IsoClass::C: return 256e-6;
    case IsoClass::D: return 1024e-6;
    case IsoClass::E: return 4096e-6;
  }
  throw SpecError("unknown ISO class");
}

IsoClass iso_class_from_string(const std::string& s) {
  if (s == "A" || s == "a") return IsoClass::A;
  if (s == "B" || s == "b") return IsoClass::B;
  if (s == "C" || s == "c") return IsoClass::C;
  if (s == "D" || s == "d") return IsoClass::D;
  if (s == "E" || s == "e") return IsoClass::E;
  throw SpecError("unknown ISO class '" + s + "' (expected A..E)");
}

std::string to_string(IsoClass c) {
  switch (c) {
    case IsoClass::A: return "A";
    case IsoClass::B: return "B";
    case IsoClass::C: return "C";
    case IsoClass::D: return "D";
    case IsoClass::E: return "E";
  }
  return "?";
}

void RoadSpec::validate() const {
  if (!(vehicle_speed > 0.0)) throw SpecError("vehicle_speed must be > 0");
  if (!(duration > 0.0)) throw SpecError("duration must be > 0");
  if (!(dt > 0.0)) throw SpecError("dt must be > 0");
  const double road_length = vehicle_speed * duration;
  if (const auto* b = std::get_if<SingleBumpSpec>(&kind)) {
    if (!(b->height > 0.0)) throw SpecError("bump height must be > 0");
    if (!(b->length > 0.0)) throw SpecError("bump length must be > 0");
    if (b->start_position < 0.0) throw SpecError("bump start must be >= 0");
    if (b->start_position + b->length > road_length) {
      throw SpecError("bump extends past the end of the road");
    }
  } else if (const auto* m = std::get_if<MultiHumpSpec>(&kind)) {
    if (m->count < 1) throw SpecError("hump count must be >= 1");
    if (!(m->height > 0.0)) throw SpecError("hump height must be > 0");
    if (!(m->length > 0.0)) throw SpecError("hump length must be > 0");
    if (m->spacing < 0.0) throw SpecError("hump spacing must be >= 0");
    if (m->count > 1 && m->spacing < m->length) {
      throw SpecError("hump spacing must be >= hump length (no overlap)");
    }
    if (m->start_position < 0.0) throw SpecError("hump start must be >= 0");
    const double end =
        m->start_position + (m->count - 1) * m->spacing + m->length;
    if (end > road_length) {
      throw SpecError("humps extend past the end of the road");
    }
  } else if (const auto* iso = std::get_if<Iso8608Spec>(&kind)) {
    if (iso->n_components < 1) throw SpecError("n_components must be >= 1");
    if (!(iso->freq_low > 0.0) || !(iso->freq_low < iso->freq_high)) {
      throw SpecError("spatial frequency range must satisfy 0 < low < high");
    }
  }
}

namespace {

// Raised-cosine bump: x(s) = h/2 * (1 - cos(2*pi*(s-s0)/L)) on [s0, s0+L].
// C1 at the boundaries, so the elevation rate is continuous.
class BumpRoad final : public RoadSampler {
 public:
  BumpRoad(double height, double length, double start, int count,
           double spacing, double speed)
      : height_(height),
        length_(length),
        start_(start),
        count_(count),
        spacing_(spacing),
        speed_(speed) {}

  RoadInput eval(double t) const override {
    const double s = speed_ * t;
    // Locate the hump whose support could contain s.
    double rel = s - start_;
    if (rel < 0.0 || rel > (count_ - 1) * spacing_ + length_) return {};
    int idx = 0;
    if (count_ > 1 && spacing_ > 0.0) {
      idx = static_cast<int>(std::floor(rel / spacing_));
      if (idx > count_ - 1) idx = count_ - 1;
    }
    const double local = rel - idx * spacing_;
    if (local < 0.0 || local > length_) return {};
    const double phase = 2.0 * M_PI * local / length_;
    RoadInput r;
    r.x_r = 0.5 * height_ * (1.0 - std::cos(phase));
    r.v_r = 0.5 * height_ * std::sin(phase) * (2.0 * M_PI / length_) * speed_;
    return r;
  }

 private:
  double height_, length_, start_;
  int count_;
  double spacing_, speed_;
};

// Sinusoidal superposition over uniform spatial-frequency bins:
//   x(s) = sum_i sqrt(2 * G_d(n_i) * dn) * cos(2*pi*n_i*s + phi_i)
// with G_d(n) = G_d(n0) * (n/n0)^-2 and seeded i.i.d. phases.
class IsoRoad final : public RoadSampler {
 public:
  IsoRoad(const Iso8608Spec& spec, double speed) : speed_(speed) {
    const int n = spec.n_components;
    const double dn = (spec.freq_high - spec.freq_low) / n;
    const double g0 = iso_roughness_coefficient(spec.road_class);
    amp_.resize(n);
    omega_.resize(n);
    phase_.resize(n);
    Rng rng(derive_seed(spec.seed, "iso8608-phases"));
    for (int i = 0; i < n; ++i) {
      const double ni = spec.freq_low + (i + 0.5) * dn;
      const double gd =
          g0 * (kIsoReferenceFrequency / ni) * (kIsoReferenceFrequency / ni);
      amp_[i] = std::sqrt(2.0 * gd * dn);
      omega_[i] = 2.0 * M_PI * ni;  // per meter of road
      phase_[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
  }

  RoadInput eval(double t) const override {
    const double s = speed_ * t;
    double x = 0.0;
    double dxds = 0.0;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      const double arg = omega_[i] * s + phase_[i];
      x += amp_[i] * std::cos(arg);
      dxds -= amp_[i] * omega_[i] * std::sin(arg);
    }
    return {x, dxds * speed_};
  }

 private:
  double speed_;
  std::vector<double> amp_, omega_, phase_;
};

class TableRoad final : public RoadSampler {
 public:
  explicit TableRoad(RoadTrace trace) : trace_(std::move(trace)) {}

  RoadInput eval(double t) const override {
    const double pos = t / trace_.dt;
    const auto n = trace_.size();
    if (pos <= 0.0) return trace_.at(0);
    if (pos >= static_cast<double>(n - 1)) return trace_.at(n - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (frac == 0.0) return trace_.at(i);
    return {trace_.x_r[i] + frac * (trace_.x_r[i + 1] - trace_.x_r[i]),
            trace_.v_r[i] + frac * (trace_.v_r[i + 1] - trace_.v_r[i])};
  }

 private:
  RoadTrace trace_;
};

RoadTrace sample_grid(const RoadSampler& sampler, const RoadSpec& spec) {
  RoadTrace trace;
  trace.dt = spec.dt;
  trace.spec = spec;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration / spec.dt)) + 1;
  trace.x_r.resize(n);
  trace.v_r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RoadInput r = sampler.eval(static_cast<double>(i) * spec.dt);
    trace.x_r[i] = r.x_r;
    trace.v_r[i] = r.v_r;
  }
  return trace;
}

}  // namespace

std::unique_ptr<RoadSampler> make_road_sampler(const RoadSpec& spec) {
  spec.validate();
  if (const auto* b = std::get_if<SingleBumpSpec>(&spec.kind)) {
    return std::make_unique<BumpRoad>(b->height, b->length, b->start_position,
                                      1, 0.0, spec.vehicle_speed);
  }
  if (const auto* m = std::get_if<MultiHumpSpec>(&spec.kind)) {
    return std::make_unique<BumpRoad>(m->height, m->length, m->start_position,
                                      m->count, m->spacing,
                                      spec.vehicle_speed);
  }
  if (const auto* iso = std::get_if<Iso8608Spec>(&spec.kind)) {
    return std::make_unique<IsoRoad>(*iso, spec.vehicle_speed);
  }
  throw SpecError("external road specs have no closed-form sampler");
}

std::unique_ptr<RoadSampler> make_table_sampler(const RoadTrace& trace) {
  if (trace.size() < 2) throw SpecError("road trace needs at least 2 samples");
  return std::make_unique<TableRoad>(trace);
}

RoadTrace generate_single_bump(const RoadSpec& spec) {
  if (!std::holds_alternative<SingleBumpSpec>(spec.kind)) {
    throw SpecError("generate_single_bump requires a SingleBump spec");
  }
  return sample_grid(*make_road_sampler(spec), spec);
}

RoadTrace generate_multi_hump(const RoadSpec& spec) {
  if (!std::holds_alternative<MultiHumpSpec>(spec.kind)) {
    throw SpecError("generate_multi_hump requires a MultiHump spec");
  }
  return sample_grid(*make_road_sampler(spec), spec);
}

RoadTrace generate_iso8608(const RoadSpec& spec) {
  if (!std::holds_alternative<Iso8608Spec>(spec.kind)) {
    throw SpecError("generate_iso8608 requires an Iso8608 spec");
  }
  return sample_grid(*make_road_sampler(spec), spec);
}

RoadTrace generate_road(const RoadSpec& spec) {
  return sample_grid(*make_road_sampler(spec), spec);
}

void write_road_csv(const RoadTrace& trace, std::ostream& out) {
  out << "t,x_r,v_r\n";
  char line[128];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n",
                  static_cast<double>(i) * trace.dt, trace.x_r[i],
                  trace.v_r[i]);
    out << line;
  }
}

void write_road_csv(const RoadTrace& trace, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) { write_road_csv(trace, out); });
}

RoadTrace read_road_csv(std::istream& in) {
  RoadTrace trace;
  trace.spec.kind = ExternalSpec{};
  std::string line;
  if (!std::getline(in, line)) throw SpecError("road CSV is empty");
  if (line != "t,x_r,v_r" && line != "t,x_r,v_r\r") {
    throw SpecError("road CSV row 1: expected header 't,x_r,v_r'");
  }
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double t, x, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &v) != 3) {
      throw SpecError("road CSV row " + std::to_string(row) +
                      ": expected 3 numeric fields");
    }
    times.push_back(t);
    trace.x_r.push_back(x);
    trace.v_r.push_back(v);
  }
  if (times.size() < 2) {
    throw SpecError("road CSV needs at least 2 samples");
  }
  trace.dt = times[1] - times[0];
  if (!(trace.dt > 0.0)) {
    throw SpecError("road CSV row 3: time column must be strictly increasing");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expected = times[0] + static_cast<double>(i) * trace.dt;
    if (std::fabs(times[i] - expected) > 1e-9 * std::max(1.0, expected)) {
      throw SpecError("road CSV row " + std::to_string(i + 2) +
                      ": non-uniform time step");
    }
  }
  trace.spec.dt = trace.dt;
  trace.spec.duration = times.back() - times.front();
  return trace;
}

RoadTrace read_road_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open road CSV: " + path);
  return read_road_csv(in);
}

}  // namespace susp
