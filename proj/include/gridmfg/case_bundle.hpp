#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "gridmfg/core_model.hpp"

namespace gridmfg {

/// Everything stored in one case directory:
///
///   network.json    bus_count, line_count, line_limits, ptdf (row-major rows)
///   generators.csv  id,bus,kind,cost_a,cost_b,p_max (bus is one-based)
///   profiles.csv    kind,bus,h0..h{H-1}; kind in prosumer|consumer|solar|wind,
///                   bus is one-based or '*' for every bus
///   scenario.json   steps_per_day, seeds, distributions and run settings
struct CaseBundle {
  Network network;
  int steps_per_day = 12;
  std::vector<DemandProfile> prosumer_demand;  // one per bus
  std::vector<DemandProfile> consumer_demand;  // one per bus
  nlohmann::json scenario = nlohmann::json::object();
};

struct ScaleDistributions {
  TriangularDist solar{0.8, 1.2, 1.0};
  TriangularDist wind{0.5, 1.5, 1.0};
  TriangularDist demand{0.9, 1.1, 1.0};
};

ScaleDistributions read_scale_distributions(const nlohmann::json& scenario);

CaseBundle load_case_bundle(const std::filesystem::path& dir);

/// Writes the four bundle files. Renewable profiles are written per
/// (kind, bus) from the first generator of that kind at the bus.
void write_case_bundle(const CaseBundle& bundle,
                       const std::filesystem::path& dir);

/// Reads `bids.csv` (bus,D_mt) into a per-bus vector of MW.
Eigen::VectorXd load_bids_csv(const std::filesystem::path& path, int bus_count);

}  // namespace gridmfg
