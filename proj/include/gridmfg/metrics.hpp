#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridmfg/market_sim.hpp"

namespace gridmfg {

class SeriesTooShort : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Mean absolute step-to-step change. Needs at least two prices.
template <typename Derived>
typename Derived::Scalar imv(const Eigen::DenseBase<Derived>& prices) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = prices.size();
  if (n < 2) throw SeriesTooShort("too_short: IMV needs at least 2 prices, got " + std::to_string(n));
  Scalar total(0);
  for (Eigen::Index t = 0; t + 1 < n; ++t) total += std::abs(prices(t + 1) - prices(t));
  return total / Scalar(n - 1);
}

/// Days [first_day, log.days()) covering the last `window_days` days.
long window_start(const RunLog& log, int window_days);

Eigen::VectorXd hub_series(const RunLog& log, long first_day);
Eigen::VectorXd bus_series(const RunLog& log, int bus, long first_day);

struct ExPostCost {
  Eigen::VectorXd per_bus;  // $ summed over the window
  double average = 0.0;
};

/// Sum of bid_mwh * lmp over days [first_day, last_day).
ExPostCost ex_post_cost(const RunLog& log, long first_day, long last_day);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
  double min = 0.0;
  double max = 0.0;
  std::vector<double> per_seed;
};

Summary seed_summary(const std::vector<double>& values);

struct RunMetrics {
  std::uint64_t seed = 0;
  long days = 0;
  double imv = 0.0;
  Eigen::VectorXd bus_imv;
  ExPostCost cost;
  MfeReport mfe;
};

RunMetrics run_metrics(const RunLog& log, int window_days, const MonitorConfig& monitor);

nlohmann::json build_report(const std::vector<RunMetrics>& runs, int window_days);
std::string summary_csv(const std::vector<RunMetrics>& runs);

/// Writes report.json and summary.csv under `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<RunMetrics>& runs,
                  int window_days);

}  // namespace gridmfg
