#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "susp/dynamics.hpp"

namespace susp {

enum class IsoClass { A, B, C, D, E };

// Degree-of-roughness constant G_d(n0) [m^3] for each ISO 8608 class
// (geometric means of the class bands), with n0 = 0.1 cycles/m.
double iso_roughness_coefficient(IsoClass c);
inline constexpr double kIsoReferenceFrequency = 0.1;  // cycles/m

IsoClass iso_class_from_string(const std::string& s);
std::string to_string(IsoClass c);

struct SingleBumpSpec {
  double height = 0.1;          // [m]
  double length = 5.0;          // [m]
  double start_position = 25.0; // [m] along the road
};

struct MultiHumpSpec {
  int count = 3;
  double height = 0.1;    // [m]
  double length = 5.0;    // [m]
  double spacing = 15.0;  // [m] between hump starts
  double start_position = 25.0;
};

struct Iso8608Spec {
  IsoClass road_class = IsoClass::E;
  int n_components = 400;
  double freq_low = 0.011;  // cycles/m
  double freq_high = 2.83;  // cycles/m
  std::uint64_t seed = 0;
};

// Marks a trace ingested from an external file rather than generated here.
struct ExternalSpec {};

struct RoadSpec {
  std::variant<SingleBumpSpec, MultiHumpSpec, Iso8608Spec, ExternalSpec> kind =
      SingleBumpSpec{};
  double vehicle_speed = 20.0;  // [m/s]
  double duration = 10.0;       // [s]
  double dt = 1e-3;             // [s]

  void validate() const;
};

// Time-sampled road elevation and its analytic derivative. samples are on the
// uniform grid t_i = i * dt, i = 0..round(duration/dt).
struct RoadTrace {
  double dt = 1e-3;
  std::vector<double> x_r;  // [m]
  std::vector<double> v_r;  // [m/s]
  RoadSpec spec;

  std::size_t size() const { return x_r.size(); }
  RoadInput at(std::size_t i) const { return {x_r[i], v_r[i]}; }
};

// Continuous-time view of a road, exact at any t within [0, duration].
class RoadSampler {
 public:
  virtual ~RoadSampler() = default;
  virtual RoadInput eval(double t) const = 0;
};

// Closed-form sampler for the generated road families.
std::unique_ptr<RoadSampler> make_road_sampler(const RoadSpec& spec);

// Linear-interpolation sampler over an ingested trace; exact at grid points.
std::unique_ptr<RoadSampler> make_table_sampler(const RoadTrace& trace);

RoadTrace generate_single_bump(const RoadSpec& spec);
RoadTrace generate_multi_hump(const RoadSpec& spec);
RoadTrace generate_iso8608(const RoadSpec& spec);
RoadTrace generate_road(const RoadSpec& spec);

// CSV with header "t,x_r,v_r"; full double precision, bit-exact round trip.
void write_road_csv(const RoadTrace& trace, std::ostream& out);
void write_road_csv(const RoadTrace& trace, const std::string& path);
RoadTrace read_road_csv(std::istream& in);
RoadTrace read_road_csv(const std::string& path);

}  // namespace susp
