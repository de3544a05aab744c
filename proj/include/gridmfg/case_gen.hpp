#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "gridmfg/case_bundle.hpp"

namespace gridmfg {

/// Generator counts indexed by GeneratorKind.
using GeneratorMix = std::array<int, 4>;

inline constexpr GeneratorMix kDefaultMix{4, 2, 17, 3};

/// "oil:4,biomass:2,solar:17,wind:3"; omitted kinds count 0.
GeneratorMix parse_generator_mix(std::string_view text);

struct CaseGenOptions {
  int buses = 37;
  GeneratorMix mix = kDefaultMix;
  std::uint64_t seed = 1;
  int steps_per_day = 12;
  long prosumers_per_bus = 500;
  long consumers_per_bus = 5000;
  double capacity_kwh = 10.0;
};

/// Synthetic radial case: bus 1 is the hub, every other bus hangs off a
/// random earlier bus, and each line's PTDF row is 1 on the buses behind it.
/// Thermal units cover the worst-case load with every prosumer charging;
/// line limits are raised until that load is deliverable.
CaseBundle generate_case(const CaseGenOptions& options);

/// Duck-curve shapes at 24 hourly points, fractions of one storage unit.
Eigen::VectorXd synthetic_prosumer_shape();
Eigen::VectorXd synthetic_consumer_shape();
Eigen::VectorXd synthetic_solar_shape();
Eigen::VectorXd synthetic_wind_shape();

}  // namespace gridmfg
