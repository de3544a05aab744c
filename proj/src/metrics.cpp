#include "gridmfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gridmfg/text_io.hpp"

namespace gridmfg {

long window_start(const RunLog& log, int window_days) {
  if (window_days < 1) throw ModelError("metrics window must be at least 1 day");
  return std::max(0L, log.days() - window_days);
}

Eigen::VectorXd bus_series(const RunLog& log, int bus, long first_day) {
  if (bus < 0 || bus >= log.bus_count) {
    throw ModelError("bus " + std::to_string(bus + 1) + " is not in the run log");
  }
  const long t0 = first_day * log.steps_per_day, t1 = log.steps();
  Eigen::VectorXd out(std::max(0L, t1 - t0));
  for (long t = t0; t < t1; ++t) out[t - t0] = log.at(t, bus).lmp;
  return out;
}

Eigen::VectorXd hub_series(const RunLog& log, long first_day) {
  Eigen::VectorXd out = bus_series(log, 0, first_day);
  for (long i = 0; i < out.size(); ++i) out[i] = log.at(first_day * log.steps_per_day + i, 0).hub_price;
  return out;
}

ExPostCost ex_post_cost(const RunLog& log, long first_day, long last_day) {
  if (first_day < 0 || last_day > log.days() || first_day > last_day) {
    throw ModelError("cost window [" + std::to_string(first_day) + ", " +
                     std::to_string(last_day) + ") is outside the run log");
  }
  ExPostCost c;
  c.per_bus = Eigen::VectorXd::Zero(log.bus_count);
  for (long t = first_day * log.steps_per_day; t < last_day * log.steps_per_day; ++t) {
    for (int m = 0; m < log.bus_count; ++m) c.per_bus[m] += log.at(t, m).bid_mwh * log.at(t, m).lmp;
  }
  c.average = log.bus_count ? c.per_bus.mean() : 0.0;
  return c;
}

Summary seed_summary(const std::vector<double>& values) {
  if (values.empty()) throw ModelError("seed summary needs at least one run");
  Summary s;
  s.per_seed = values;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = values.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

RunMetrics run_metrics(const RunLog& log, int window_days, const MonitorConfig& monitor) {
  RunMetrics r;
  r.seed = log.seed;
  r.days = log.days();
  const long first = window_start(log, window_days);
  r.imv = imv(hub_series(log, first));
  r.bus_imv.resize(log.bus_count);
  for (int m = 0; m < log.bus_count; ++m) r.bus_imv[m] = imv(bus_series(log, m, first));
  r.cost = ex_post_cost(log, first, log.days());
  r.mfe = check_mfe(log, monitor);
  return r;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"per_seed", s.per_seed}};
}

std::vector<double> eigen_to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

nlohmann::json build_report(const std::vector<RunMetrics>& runs, int window_days) {
  if (runs.empty()) throw ModelError("report needs at least one run");
  std::vector<double> imvs, costs;
  std::vector<std::uint64_t> seeds;
  nlohmann::json per_bus = nlohmann::json::array(), bus_imv = nlohmann::json::array(),
                 mfe = nlohmann::json::array();
  int converged = 0;
  for (const auto& r : runs) {
    seeds.push_back(r.seed);
    imvs.push_back(r.imv);
    costs.push_back(r.cost.average);
    per_bus.push_back(eigen_to_vector(r.cost.per_bus));
    bus_imv.push_back(eigen_to_vector(r.bus_imv));
    auto m = to_json(r.mfe);
    m["seed"] = r.seed;
    mfe.push_back(m);
    converged += r.mfe.converged;
  }
  auto cost = summary_json(seed_summary(costs));
  cost["per_bus"] = per_bus;
  auto imv_node = summary_json(seed_summary(imvs));
  imv_node["series"] = "hub";
  imv_node["per_bus"] = bus_imv;
  return {{"seeds", seeds},
          {"window_days", window_days},
          {"imv", imv_node},
          {"ex_post_cost", cost},
          {"converged", converged == static_cast<int>(runs.size())},
          {"converged_seeds", converged},
          {"mfe", mfe}};
}

std::string summary_csv(const std::vector<RunMetrics>& runs) {
  std::ostringstream out;
  out << "seed,days,imv,ex_post_cost,converged,mean_price,price_day_change,"
         "price_window_change,policy_tv\n";
  for (const auto& r : runs) {
    out << r.seed << ',' << r.days << ',' << format_number(r.imv) << ','
        << format_number(r.cost.average) << ',' << (r.mfe.converged ? 1 : 0) << ','
        << format_number(r.mfe.mean_price) << ',' << format_number(r.mfe.price_day_change) << ','
        << format_number(r.mfe.price_window_change) << ',' << format_number(r.mfe.policy_tv)
        << '\n';
  }
  return out.str();
}

void write_report(const std::filesystem::path& dir, const std::vector<RunMetrics>& runs,
                  int window_days) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  write_text_file(dir / "report.json", build_report(runs, window_days).dump(2) + "\n");
  write_text_file(dir / "summary.csv", summary_csv(runs));
}

}  // namespace gridmfg
