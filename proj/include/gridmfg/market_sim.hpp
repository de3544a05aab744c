#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridmfg/aggregator.hpp"
#include "gridmfg/case_bundle.hpp"
#include "gridmfg/dispatch.hpp"
#include "gridmfg/learning.hpp"

namespace gridmfg {

struct MonitorConfig {
  int window_days = 5;
  double price_rel_tol = 0.05;
  double policy_tv_tol = 0.2;
};

struct ScenarioConfig {
  int days = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> delta;      // per bus
  std::vector<long> prosumers;    // per bus
  std::vector<long> consumers;    // per bus
  LearnerConfig learner;
  double action_step = 0.1;
  bool storage = true;
  double capacity_kwh = 10.0;
  double efficiency = 1.0;
  double initial_level = 0.5;
  int cost_segments = 16;
  bool renewable_draw_per_day = false;
  std::optional<double> belief_override;
  MonitorConfig monitor;

  /// Throws ModelError when a field is out of range for `bus_count` buses.
  void validate(int bus_count) const;
};

/// Reads run settings from a bundle's scenario.json; missing keys keep
/// their defaults, scalar per-bus entries are broadcast.
ScenarioConfig scenario_from_json(const nlohmann::json& scenario, int bus_count);
nlohmann::json to_json(const ScenarioConfig& config);

/// Raised when a market step cannot be cleared.
class ScenarioError : public ModelError {
 public:
  ScenarioError(const std::string& what, long t, Eigen::VectorXd bids)
      : ModelError(what), t(t), bids(std::move(bids)) {}
  long t;
  Eigen::VectorXd bids;
};

/// One (t, bus) record. Bids are MWh per step; storage and actions are
/// per-prosumer averages.
struct StepRecord {
  long t = 0;
  long day = 0;
  int hour = 0;
  int bus = 0;
  double bid_mwh = 0.0;
  double lmp = 0.0;
  double hub_price = 0.0;
  double storage_before = 0.0;
  double storage_after = 0.0;
  double action_mean = 0.0;
  double phi_mean = 0.0;
  double demand_mean = 0.0;
  double reward = 0.0;
  DispatchStatus status = DispatchStatus::optimal;
  Eigen::VectorXd belief_after;
  Eigen::VectorXd policy_at_state;
};

struct RunLog {
  std::uint64_t seed = 0;
  int steps_per_day = 12;
  int bus_count = 0;
  std::vector<double> actions;
  std::vector<StepRecord> records;  // ordered by (t, bus)

  long steps() const { return bus_count ? static_cast<long>(records.size()) / bus_count : 0; }
  long days() const { return steps() / steps_per_day; }
  const StepRecord& at(long t, int bus) const { return records[t * bus_count + bus]; }
};

struct PlayResult {
  Eigen::VectorXd bids_mwh;
  Eigen::VectorXd action_mean;
  Eigen::VectorXd phi_mean;
  Eigen::VectorXd demand_mean;
};

/// Random streams owned by the market side of one run.
struct MarketStreams {
  std::vector<RngStream> prosumer_demand;
  std::vector<RngStream> prosumer_actions;
  std::vector<RngStream> consumer_demand;
  RngStream renewable;

  MarketStreams(std::uint64_t seed, int bus_count);
};

/// Per-prosumer demand and action draws for every bus at hour h, summed into
/// one bid per bus. A null policy forces every action to 0. Aggregator storage
/// advances by the mean realized storage change.
PlayResult actual_play(int h, std::vector<AggregatorState>& aggregators,
                       const std::vector<const Policy*>& policies, const CaseBundle& bundle,
                       const ScenarioConfig& config, MarketStreams& streams);

/// Initial beliefs from one storage-free dispatch per hour at mean demand
/// and mean capacity factors.
std::vector<Eigen::VectorXd> initial_beliefs(const CaseBundle& bundle,
                                             const ScenarioConfig& config);

/// Runs `body(i)` for i in [0, n) on up to worker_count() threads.
void parallel_for(int n, const std::function<void(int)>& body);
/// GRIDMFG_THREADS when set, else the hardware concurrency.
int worker_count();

using DayObserver = std::function<void(const RunLog& log, long day)>;

RunLog run_scenario(const CaseBundle& bundle, const ScenarioConfig& config, std::uint64_t seed,
                    const DayObserver& on_day_end = {});

struct MfeReport {
  bool enough_data = false;
  bool converged = false;
  double mean_price = 0.0;
  double price_day_change = 0.0;     // max |hub(d, h) - hub(d - 1, h)| in the last window
  double price_window_change = 0.0;  // max_h |window mean - previous window mean|
  double policy_tv = 0.0;            // max over (bus, hour) of window-averaged policy TV
};

MfeReport check_mfe(const RunLog& log, const MonitorConfig& monitor);
nlohmann::json to_json(const MfeReport& report);

/// Streams runlog.csv, beliefs.csv and policy_trace.csv day by day.
class RunLogWriter {
 public:
  RunLogWriter(const std::filesystem::path& dir, const RunLog& header);
  void append_day(const RunLog& log, long day);

 private:
  std::ofstream runlog_;
  std::ofstream beliefs_;
  std::ofstream trace_;
};

void write_run_json(const std::filesystem::path& dir, const RunLog& log,
                    const ScenarioConfig& config);
void write_run_directory(const std::filesystem::path& dir, const RunLog& log,
                         const ScenarioConfig& config);

/// Reads a run directory back. Beliefs and the policy trace are optional.
RunLog read_run_directory(const std::filesystem::path& dir);
/// Reads only runlog.csv.
RunLog read_runlog_csv(const std::filesystem::path& path);
MonitorConfig read_monitor(const std::filesystem::path& run_dir);

}  // namespace gridmfg
