#include "gridmfg/case_bundle.hpp"

#include <map>
#include <sstream>
#include <string>

#include "gridmfg/text_io.hpp"

namespace gridmfg {
namespace {

TriangularDist read_triangular(const nlohmann::json& node,
                               const TriangularDist& fallback) {
  if (node.is_null()) return fallback;
  if (node.is_array() && node.size() == 3) {
    return TriangularDist::make(node[0].get<double>(), node[1].get<double>(),
                                node[2].get<double>());
  }
  if (node.is_object()) {
    return TriangularDist::make(node.at("lower").get<double>(),
                                node.at("upper").get<double>(),
                                node.at("mode").get<double>());
  }
  throw ModelError("triangular distribution must be [lower, upper, mode]");
}

nlohmann::json triangular_json(const TriangularDist& d) {
  return nlohmann::json::array({d.lower, d.upper, d.mode});
}

Network read_network(const std::filesystem::path& dir,
                     std::vector<Generator> generators) {
  const auto doc = nlohmann::json::parse(read_text_file(dir / "network.json"));
  const int buses = doc.at("bus_count").get<int>();
  const auto& limits = doc.at("line_limits");
  const int lines = doc.value("line_count", static_cast<int>(limits.size()));
  if (static_cast<int>(limits.size()) != lines) {
    throw ModelError("network.json: line_limits has " +
                     std::to_string(limits.size()) + " entries, expected " +
                     std::to_string(lines));
  }
  Eigen::MatrixXd ptdf = Eigen::MatrixXd::Zero(lines, buses);
  const auto& rows = doc.at("ptdf");
  if (rows.size() == static_cast<std::size_t>(lines) * buses &&
      (rows.empty() || rows.front().is_number())) {
    for (int l = 0; l < lines; ++l)
      for (int m = 0; m < buses; ++m) ptdf(l, m) = rows[l * buses + m].get<double>();
  } else {
    if (static_cast<int>(rows.size()) != lines) {
      throw ModelError("network.json: ptdf must have one row per line");
    }
    for (int l = 0; l < lines; ++l) {
      if (static_cast<int>(rows[l].size()) != buses) {
        throw ModelError("network.json: ptdf row " + std::to_string(l + 1) +
                         " must have one entry per bus");
      }
      for (int m = 0; m < buses; ++m) ptdf(l, m) = rows[l][m].get<double>();
    }
  }
  std::vector<Line> line_list;
  for (int l = 0; l < lines; ++l) {
    line_list.push_back(Line{l + 1, limits[l].get<double>()});
  }
  return Network(buses, std::move(ptdf), std::move(line_list),
                 std::move(generators));
}

std::vector<Generator> read_generators(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto c_id = table.column("id");
  const auto c_bus = table.column("bus");
  const auto c_kind = table.column("kind");
  const auto c_a = table.column("cost_a");
  const auto c_b = table.column("cost_b");
  const auto c_p = table.column("p_max");
  std::vector<Generator> gens;
  for (const auto& row : table.rows) {
    Generator g;
    g.id = static_cast<int>(parse_integer(row[c_id]));
    g.bus = static_cast<int>(parse_integer(row[c_bus])) - 1;
    g.kind = parse_generator_kind(row[c_kind]);
    g.cost_a = parse_number(row[c_a]);
    g.cost_b = parse_number(row[c_b]);
    g.p_max = parse_number(row[c_p]);
    gens.push_back(std::move(g));
  }
  return gens;
}

struct ProfileRow {
  std::string kind;
  int bus;  // -1 means every bus
  Eigen::VectorXd values;
};

std::vector<ProfileRow> read_profiles(const std::filesystem::path& path,
                                      int steps_per_day) {
  const auto table = read_csv(path);
  const auto c_kind = table.column("kind");
  const auto c_bus = table.column("bus");
  std::vector<std::size_t> hour_cols;
  for (int h = 0;; ++h) {
    const std::string name = "h" + std::to_string(h);
    if (!table.has_column(name)) break;
    hour_cols.push_back(table.column(name));
  }
  if (hour_cols.empty()) throw ModelError("profiles.csv has no h0.. columns");
  std::vector<ProfileRow> out;
  for (const auto& row : table.rows) {
    ProfileRow p;
    p.kind = row[c_kind];
    p.bus = row[c_bus] == "*" ? -1 : static_cast<int>(parse_integer(row[c_bus])) - 1;
    Eigen::VectorXd raw(static_cast<Eigen::Index>(hour_cols.size()));
    for (std::size_t i = 0; i < hour_cols.size(); ++i) {
      raw[static_cast<Eigen::Index>(i)] = parse_number(row[hour_cols[i]]);
    }
    p.values = resample_profile(raw, steps_per_day);
    out.push_back(std::move(p));
  }
  return out;
}

// Bus-specific rows take precedence over '*' rows.
const Eigen::VectorXd* find_profile(const std::vector<ProfileRow>& rows,
                                    std::string_view kind, int bus) {
  const Eigen::VectorXd* wildcard = nullptr;
  for (const auto& r : rows) {
    if (r.kind != kind) continue;
    if (r.bus == bus) return &r.values;
    if (r.bus == -1) wildcard = &r.values;
  }
  return wildcard;
}

}  // namespace

ScaleDistributions read_scale_distributions(const nlohmann::json& scenario) {
  ScaleDistributions d;
  if (!scenario.contains("distributions")) return d;
  const auto& node = scenario.at("distributions");
  d.solar = read_triangular(node.value("solar_scale", nlohmann::json()), d.solar);
  d.wind = read_triangular(node.value("wind_scale", nlohmann::json()), d.wind);
  d.demand = read_triangular(node.value("demand_scale", nlohmann::json()), d.demand);
  return d;
}

CaseBundle load_case_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ModelError("case bundle directory not found: " + dir.string());
  }
  CaseBundle bundle;
  bundle.scenario = nlohmann::json::parse(read_text_file(dir / "scenario.json"));
  bundle.steps_per_day = bundle.scenario.value("steps_per_day", 12);
  if (bundle.steps_per_day < 1) throw ModelError("steps_per_day must be positive");
  const auto scales = read_scale_distributions(bundle.scenario);

  auto generators = read_generators(dir / "generators.csv");
  const auto profiles = read_profiles(dir / "profiles.csv", bundle.steps_per_day);
  for (auto& g : generators) {
    if (!g.renewable()) continue;
    const auto kind = to_string(g.kind);
    const auto* cf = find_profile(profiles, kind, g.bus);
    if (cf == nullptr) {
      throw ModelError("no " + std::string(kind) + " capacity-factor profile for bus " +
                       std::to_string(g.bus + 1));
    }
    g.capacity_factor = *cf;
    g.capacity_scale = g.kind == GeneratorKind::solar ? scales.solar : scales.wind;
  }
  bundle.network = read_network(dir, std::move(generators));

  const int buses = bundle.network.bus_count();
  for (int m = 0; m < buses; ++m) {
    for (const auto* kind : {"prosumer", "consumer"}) {
      DemandProfile p;
      const auto* values = find_profile(profiles, kind, m);
      p.hourly_mean = values != nullptr
                          ? *values
                          : Eigen::VectorXd::Zero(bundle.steps_per_day).eval();
      p.scale = scales.demand;
      (std::string_view(kind) == "prosumer" ? bundle.prosumer_demand
                                            : bundle.consumer_demand)
          .push_back(std::move(p));
    }
  }
  return bundle;
}

void write_case_bundle(const CaseBundle& bundle,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ModelError("cannot create output directory " + dir.string());
  }
  const Network& net = bundle.network;
  const int H = bundle.steps_per_day;

  nlohmann::json network;
  network["bus_count"] = net.bus_count();
  network["line_count"] = net.line_count();
  network["line_limits"] = nlohmann::json::array();
  for (const auto& line : net.lines()) network["line_limits"].push_back(line.flow_limit);
  network["ptdf"] = nlohmann::json::array();
  for (int l = 0; l < net.line_count(); ++l) {
    auto row = nlohmann::json::array();
    for (int m = 0; m < net.bus_count(); ++m) row.push_back(net.ptdf()(l, m));
    network["ptdf"].push_back(row);
  }
  write_text_file(dir / "network.json", network.dump(2) + "\n");

  std::ostringstream gens;
  gens << "id,bus,kind,cost_a,cost_b,p_max\n";
  for (const auto& g : net.generators()) {
    gens << g.id << ',' << g.bus + 1 << ',' << to_string(g.kind) << ','
         << format_number(g.cost_a) << ',' << format_number(g.cost_b) << ','
         << format_number(g.p_max) << '\n';
  }
  write_text_file(dir / "generators.csv", gens.str());

  std::ostringstream prof;
  prof << "kind,bus";
  for (int h = 0; h < H; ++h) prof << ",h" << h;
  prof << '\n';
  auto emit = [&](std::string_view kind, const std::string& bus,
                  const Eigen::VectorXd& values) {
    prof << kind << ',' << bus;
    for (int h = 0; h < H; ++h) prof << ',' << format_number(values[h]);
    prof << '\n';
  };
  auto emit_per_bus = [&](std::string_view kind,
                          const std::vector<const Eigen::VectorXd*>& per_bus) {
    bool uniform = true;
    const Eigen::VectorXd* first = nullptr;
    for (const auto* v : per_bus) {
      if (v == nullptr) continue;
      if (first == nullptr) first = v;
      else if (*v != *first) uniform = false;
    }
    if (first == nullptr) return;
    if (uniform) {
      emit(kind, "*", *first);
      return;
    }
    for (std::size_t m = 0; m < per_bus.size(); ++m) {
      if (per_bus[m] != nullptr) emit(kind, std::to_string(m + 1), *per_bus[m]);
    }
  };
  const auto buses = static_cast<std::size_t>(net.bus_count());
  std::vector<const Eigen::VectorXd*> pro(buses), con(buses);
  for (std::size_t m = 0; m < buses; ++m) {
    if (m < bundle.prosumer_demand.size()) pro[m] = &bundle.prosumer_demand[m].hourly_mean;
    if (m < bundle.consumer_demand.size()) con[m] = &bundle.consumer_demand[m].hourly_mean;
  }
  emit_per_bus("prosumer", pro);
  emit_per_bus("consumer", con);
  for (auto kind : {GeneratorKind::solar, GeneratorKind::wind}) {
    std::vector<const Eigen::VectorXd*> per_bus(buses, nullptr);
    for (const auto& g : net.generators()) {
      if (g.kind == kind && per_bus[g.bus] == nullptr) per_bus[g.bus] = &g.capacity_factor;
    }
    emit_per_bus(to_string(kind), per_bus);
  }
  write_text_file(dir / "profiles.csv", prof.str());

  nlohmann::json scenario = bundle.scenario;
  scenario["steps_per_day"] = H;
  if (!scenario.contains("distributions")) {
    const ScaleDistributions d;
    scenario["distributions"] = {{"solar_scale", triangular_json(d.solar)},
                                 {"wind_scale", triangular_json(d.wind)},
                                 {"demand_scale", triangular_json(d.demand)}};
  }
  write_text_file(dir / "scenario.json", scenario.dump(2) + "\n");
}

Eigen::VectorXd load_bids_csv(const std::filesystem::path& path, int bus_count) {
  const auto table = read_csv(path);
  const auto c_bus = table.column("bus");
  const auto c_d = table.column("D_mt");
  Eigen::VectorXd bids = Eigen::VectorXd::Zero(bus_count);
  for (const auto& row : table.rows) {
    const long bus = parse_integer(row[c_bus]);
    if (bus < 1 || bus > bus_count) {
      throw ModelError("bids.csv: bus " + std::to_string(bus) + " outside [1, " +
                       std::to_string(bus_count) + "]");
    }
    bids[bus - 1] += parse_number(row[c_d]);
  }
  return bids;
}

}  // namespace gridmfg
