#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridmfg/market_sim.hpp"

namespace gridmfg {

enum class PlotKind { hub, storage, imv, cost };

PlotKind parse_plot_kind(std::string_view text);

struct PlotSeries {
  std::string scenario;  // e.g. the run directory's parent
  std::string seed;
  RunLog log;
};

/// Scenario and seed labels come from <scenario>/seed_<s>/runlog.csv paths.
PlotSeries load_plot_series(const std::filesystem::path& runlog);

/// Standalone SVG. hub: first and last five days, one polyline per log.
/// storage: bus-averaged storage and action. imv and cost: grouped bars per
/// seed over the last `window_days` days.
std::string render_svg(PlotKind kind, const std::vector<PlotSeries>& series, int window_days = 5);

}  // namespace gridmfg
