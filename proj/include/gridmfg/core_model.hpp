#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridmfg/rng.hpp"

namespace gridmfg {

/// Raised when case data or configuration violates a model invariant.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangular distribution Delta(lower, upper, mode).
struct TriangularDist {
  double lower = 1.0;
  double upper = 1.0;
  double mode = 1.0;

  /// Validating constructor; throws ModelError unless lower <= mode <= upper.
  static TriangularDist make(double lower, double upper, double mode);

  double mean() const { return (lower + upper + mode) / 3.0; }
};

/// Inverse CDF of the triangular distribution at probability u in [0, 1].
double triangular_quantile(const TriangularDist& dist, double u);

/// One uniform draw pushed through the inverse CDF.
double sample_triangular(const TriangularDist& dist, RngStream& rng);

enum class GeneratorKind { oil, biomass, solar, wind };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct Line {
  int id = 0;
  double flow_limit = 0.0;  // MW
};

/// Quadratic-cost generator, C(p) = cost_a p^2 + cost_b p.
struct Generator {
  int id = 0;
  int bus = 0;  // zero-based internally, one-based in case files
  GeneratorKind kind = GeneratorKind::oil;
  double cost_a = 0.0;  // $/MW^2h
  double cost_b = 0.0;  // $/MWh
  double p_max = 0.0;   // MW
  Eigen::VectorXd capacity_factor;  // H entries, renewables only
  TriangularDist capacity_scale;     // renewables only

  bool renewable() const {
    return kind == GeneratorKind::solar || kind == GeneratorKind::wind;
  }
  double marginal_cost(double p) const { return 2.0 * cost_a * p + cost_b; }
  double cost(double p) const { return (cost_a * p + cost_b) * p; }
};

/// Static market topology. PTDF is L x M, rows are lines, columns are buses.
class Network {
 public:
  Network() = default;
  Network(int bus_count, Eigen::MatrixXd ptdf, std::vector<Line> lines,
          std::vector<Generator> generators);

  int bus_count() const { return bus_count_; }
  int line_count() const { return static_cast<int>(lines_.size()); }
  int generator_count() const { return static_cast<int>(generators_.size()); }

  const Eigen::MatrixXd& ptdf() const { return ptdf_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<std::vector<int>>& bus_generators() const {
    return bus_generators_;
  }

  Eigen::VectorXd line_limits() const;

  /// Re-checks every invariant; throws ModelError on the first violation.
  void validate() const;

 private:
  int bus_count_ = 0;
  Eigen::MatrixXd ptdf_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<std::vector<int>> bus_generators_;
};

/// Hourly load shape as a fraction of one storage unit, with multiplicative
/// noise. Prosumer means may be negative (net supply).
struct DemandProfile {
  Eigen::VectorXd hourly_mean;
  TriangularDist scale{0.9, 1.1, 1.0};

  int steps_per_day() const { return static_cast<int>(hourly_mean.size()); }
  double mean(int h) const { return hourly_mean[h] * scale.mean(); }
};

struct ClockIndex {
  int hour = 0;
  long day = 0;

  bool operator==(const ClockIndex&) const = default;
};

/// h(t) = t mod H, k(t) = floor(t / H).
ClockIndex clock_indices(long t, int steps_per_day);

class Clock {
 public:
  explicit Clock(int steps_per_day = 12, long t = 0);

  int steps_per_day() const { return steps_per_day_; }
  long now() const { return t_; }
  int hour() const { return clock_indices(t_, steps_per_day_).hour; }
  long day() const { return clock_indices(t_, steps_per_day_).day; }
  void advance() { ++t_; }

 private:
  int steps_per_day_;
  long t_;
};

double sample_demand(const DemandProfile& profile, int h, RngStream& rng);

/// Available output for hour h given an explicit draw of the capacity scale.
double effective_capacity(const Generator& gen, int h, double scale_draw);

/// Available output for hour h, drawing the capacity scale from rng for
/// renewables. Non-renewables never consume a draw.
double effective_capacity(const Generator& gen, int h, RngStream& rng);

/// Resamples an hourly profile to `steps_per_day` entries. Profiles whose
/// length is an integer multiple are block-averaged (24 -> 12 averages pairs).
Eigen::VectorXd resample_profile(const Eigen::VectorXd& values,
                                 int steps_per_day);

}  // namespace gridmfg
