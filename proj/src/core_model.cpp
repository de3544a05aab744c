#include "gridmfg/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridmfg {

TriangularDist TriangularDist::make(double lower, double upper, double mode) {
  if (!(std::isfinite(lower) && std::isfinite(upper) && std::isfinite(mode)) ||
      !(lower <= mode && mode <= upper)) {
    throw ModelError("triangular distribution requires lower <= mode <= upper, got (" +
                     std::to_string(lower) + ", " + std::to_string(upper) + ", " +
                     std::to_string(mode) + ")");
  }
  return TriangularDist{lower, upper, mode};
}

double triangular_quantile(const TriangularDist& dist, double u) {
  const double a = dist.lower;
  const double b = dist.upper;
  const double c = dist.mode;
  const double width = b - a;
  if (width <= 0.0) return a;
  const double split = (c - a) / width;
  if (u < split) return a + std::sqrt(u * width * (c - a));
  return b - std::sqrt((1.0 - u) * width * (b - c));
}

double sample_triangular(const TriangularDist& dist, RngStream& rng) {
  return triangular_quantile(dist, rng.uniform());
}

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::oil: return "oil";
    case GeneratorKind::biomass: return "biomass";
    case GeneratorKind::solar: return "solar";
    case GeneratorKind::wind: return "wind";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  if (text == "oil") return GeneratorKind::oil;
  if (text == "biomass") return GeneratorKind::biomass;
  if (text == "solar") return GeneratorKind::solar;
  if (text == "wind") return GeneratorKind::wind;
  throw ModelError("unknown generator kind '" + std::string(text) + "'");
}

Network::Network(int bus_count, Eigen::MatrixXd ptdf, std::vector<Line> lines,
                 std::vector<Generator> generators)
    : bus_count_(bus_count),
      ptdf_(std::move(ptdf)),
      lines_(std::move(lines)),
      generators_(std::move(generators)) {
  if (bus_count_ < 1) throw ModelError("network needs at least one bus");
  bus_generators_.assign(static_cast<std::size_t>(bus_count_), {});
  for (int g = 0; g < generator_count(); ++g) {
    const int bus = generators_[g].bus;
    if (bus < 0 || bus >= bus_count_) {
      throw ModelError("generator " + std::to_string(generators_[g].id) +
                       " references bus " + std::to_string(bus + 1) +
                       " outside [1, " + std::to_string(bus_count_) + "]");
    }
    bus_generators_[bus].push_back(g);
  }
  validate();
}

Eigen::VectorXd Network::line_limits() const {
  Eigen::VectorXd limits(line_count());
  for (int l = 0; l < line_count(); ++l) limits[l] = lines_[l].flow_limit;
  return limits;
}

void Network::validate() const {
  if (ptdf_.rows() != line_count() || ptdf_.cols() != bus_count_) {
    throw ModelError("PTDF must be " + std::to_string(line_count()) + " x " +
                     std::to_string(bus_count_));
  }
  if (!ptdf_.allFinite()) throw ModelError("PTDF contains non-finite entries");
  for (const auto& line : lines_) {
    if (!(line.flow_limit >= 0.0) || !std::isfinite(line.flow_limit)) {
      throw ModelError("line " + std::to_string(line.id) +
                       " has an invalid flow limit");
    }
  }
  std::vector<int> owner(generators_.size(), -1);
  for (int m = 0; m < bus_count_; ++m) {
    for (int g : bus_generators_[m]) {
      if (g < 0 || g >= generator_count() || owner[g] != -1) {
        throw ModelError("bus generator sets do not partition the generators");
      }
      owner[g] = m;
    }
  }
  for (int g = 0; g < generator_count(); ++g) {
    const Generator& gen = generators_[g];
    if (owner[g] != gen.bus) {
      throw ModelError("bus generator sets do not partition the generators");
    }
    if (!(gen.cost_a >= 0.0 && gen.cost_b >= 0.0 && gen.p_max >= 0.0)) {
      throw ModelError("generator " + std::to_string(gen.id) +
                       " has negative cost coefficients or capacity");
    }
    if (gen.renewable()) {
      if (gen.cost_a != 0.0 || gen.cost_b != 0.0) {
        throw ModelError("renewable generator " + std::to_string(gen.id) +
                         " must have zero cost");
      }
      if (gen.capacity_factor.size() == 0 ||
          (gen.capacity_factor.array() < 0.0).any() ||
          (gen.capacity_factor.array() > 1.0).any()) {
        throw ModelError("renewable generator " + std::to_string(gen.id) +
                         " needs a capacity factor profile in [0, 1]");
      }
    }
  }
}

ClockIndex clock_indices(long t, int steps_per_day) {
  return ClockIndex{static_cast<int>(t % steps_per_day), t / steps_per_day};
}

Clock::Clock(int steps_per_day, long t) : steps_per_day_(steps_per_day), t_(t) {
  if (steps_per_day < 1) throw ModelError("steps per day must be positive");
  if (t < 0) throw ModelError("time index must be nonnegative");
}

double sample_demand(const DemandProfile& profile, int h, RngStream& rng) {
  return profile.hourly_mean[h] * sample_triangular(profile.scale, rng);
}

double effective_capacity(const Generator& gen, int h, double scale_draw) {
  if (!gen.renewable()) return gen.p_max;
  const double raw = gen.p_max * gen.capacity_factor[h] * scale_draw;
  return std::clamp(raw, 0.0, gen.p_max);
}

double effective_capacity(const Generator& gen, int h, RngStream& rng) {
  if (!gen.renewable()) return gen.p_max;
  return effective_capacity(gen, h, sample_triangular(gen.capacity_scale, rng));
}

Eigen::VectorXd resample_profile(const Eigen::VectorXd& values,
                                 int steps_per_day) {
  const auto n = values.size();
  if (n == steps_per_day) return values;
  if (n > 0 && n % steps_per_day == 0) {
    const auto block = n / steps_per_day;
    Eigen::VectorXd out(steps_per_day);
    for (int h = 0; h < steps_per_day; ++h) {
      out[h] = values.segment(h * block, block).mean();
    }
    return out;
  }
  throw ModelError("profile with " + std::to_string(n) +
                   " entries cannot be mapped onto " +
                   std::to_string(steps_per_day) + " steps per day");
}

}  // namespace gridmfg
