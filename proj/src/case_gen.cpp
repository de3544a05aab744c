#include "gridmfg/case_gen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridmfg/aggregator.hpp"
#include "gridmfg/dispatch.hpp"
#include "gridmfg/rng.hpp"
#include "gridmfg/text_io.hpp"

namespace gridmfg {

namespace {

Eigen::VectorXd from_list(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

struct Draw {
  RngStream& rng;
  double operator()(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
};

}  // namespace

Eigen::VectorXd synthetic_prosumer_shape() {
  return from_list({0.16, 0.16, 0.15, 0.13, 0.14, 0.16, 0.14, 0.10, 0.02, -0.06, -0.15, -0.20,
                    -0.22, -0.20, -0.14, -0.06, 0.06, 0.24, 0.36, 0.40, 0.36, 0.30, 0.24, 0.20});
}

Eigen::VectorXd synthetic_consumer_shape() {
  return from_list({0.16, 0.15, 0.14, 0.14, 0.15, 0.16, 0.19, 0.21, 0.22, 0.22, 0.23, 0.23,
                    0.24, 0.24, 0.25, 0.26, 0.29, 0.33, 0.38, 0.38, 0.35, 0.31, 0.25, 0.20});
}

Eigen::VectorXd synthetic_solar_shape() {
  return from_list({0, 0, 0, 0, 0, 0, 0.03, 0.17, 0.36, 0.54, 0.70, 0.79,
                    0.82, 0.78, 0.66, 0.50, 0.32, 0.14, 0.03, 0, 0, 0, 0, 0});
}

Eigen::VectorXd synthetic_wind_shape() {
  return from_list({0.46, 0.47, 0.48, 0.48, 0.47, 0.45, 0.42, 0.39, 0.36, 0.34, 0.32, 0.31,
                    0.30, 0.30, 0.31, 0.33, 0.35, 0.37, 0.40, 0.42, 0.43, 0.44, 0.45, 0.46});
}

GeneratorMix parse_generator_mix(std::string_view text) {
  GeneratorMix mix{0, 0, 0, 0};
  for (const auto& item : split(text, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) {
      throw ModelError("generator spec entry '" + std::string(t) + "' is not kind:count");
    }
    const auto kind = parse_generator_kind(trim(t.substr(0, colon)));
    const long count = parse_integer(trim(t.substr(colon + 1)));
    if (count < 0) throw ModelError("generator counts must be >= 0");
    mix[static_cast<int>(kind)] += static_cast<int>(count);
  }
  return mix;
}

CaseBundle generate_case(const CaseGenOptions& o) {
  const int M = o.buses, H = o.steps_per_day;
  if (M < 1) throw ModelError("a case needs at least one bus");
  if (o.prosumers_per_bus < 0 || o.consumers_per_bus < 0) {
    throw ModelError("population sizes must be >= 0");
  }
  const int thermal = o.mix[0] + o.mix[1];
  if (thermal == 0) throw ModelError("the generator mix needs at least one oil or biomass unit");
  RngStream rng(o.seed, StreamKind::case_generation, 0);
  Draw draw{rng};
  const ScaleDistributions scales;

  const Eigen::VectorXd pro = resample_profile(synthetic_prosumer_shape(), H);
  const Eigen::VectorXd con = resample_profile(synthetic_consumer_shape(), H);
  const double x_bar = o.capacity_kwh / kKwhPerMwh;
  const double hi = scales.demand.upper, lo = scales.demand.lower;

  std::vector<long> np(M), nc(M);
  Eigen::VectorXd worst(M), least(M), typical(M);
  for (int m = 0; m < M; ++m) {
    np[m] = std::lround(o.prosumers_per_bus * draw(0.5, 1.5));
    nc[m] = std::lround(o.consumers_per_bus * draw(0.5, 1.5));
    worst[m] = least[m] = (np[m] * (pro[0] * hi) + nc[m] * con[0] * hi) * x_bar;
    for (int h = 0; h < H; ++h) {
      const double p_hi = std::max(pro[h] * hi, pro[h] * lo), p_lo = std::min(pro[h] * hi, pro[h] * lo);
      worst[m] = std::max(worst[m], (np[m] * (p_hi + 1.0) + nc[m] * con[h] * hi) * x_bar);
      least[m] = std::min(least[m], (np[m] * (p_lo - 1.0) + nc[m] * con[h] * lo) * x_bar);
    }
    typical[m] = (np[m] * pro.mean() + nc[m] * con.mean()) * x_bar;
  }

  std::vector<int> parent(M, -1);
  for (int m = 1; m < M; ++m) parent[m] = static_cast<int>(rng.index(m));

  std::vector<Generator> gens;
  std::vector<double> weights;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < o.mix[k]; ++i) {
      Generator g;
      g.id = static_cast<int>(gens.size()) + 1;
      g.kind = static_cast<GeneratorKind>(k);
      g.bus = gens.empty() ? 0 : static_cast<int>(rng.index(M));
      switch (g.kind) {
        case GeneratorKind::oil:
          g.cost_a = draw(0.0059, 0.0342);
          g.cost_b = 19.98;
          break;
        case GeneratorKind::biomass:
          g.cost_a = draw(0.001, 0.002);
          g.cost_b = draw(28.45, 52.65);
          break;
        case GeneratorKind::solar:
          g.capacity_factor = resample_profile(synthetic_solar_shape(), H);
          g.capacity_scale = scales.solar;
          break;
        case GeneratorKind::wind:
          g.capacity_factor = resample_profile(synthetic_wind_shape(), H);
          g.capacity_scale = scales.wind;
          break;
      }
      weights.push_back(draw(0.5, 1.5));
      gens.push_back(g);
    }
  }
  auto share = [&](GeneratorKind kind) {
    double s = 0.0;
    for (std::size_t i = 0; i < gens.size(); ++i) s += gens[i].kind == kind ? weights[i] : 0.0;
    return s;
  };
  const double thermal_weight = share(GeneratorKind::oil) + share(GeneratorKind::biomass);
  const double solar_weight = share(GeneratorKind::solar), wind_weight = share(GeneratorKind::wind);
  const double firm = 1.25 * std::max(worst.sum(), 1.0);
  for (std::size_t i = 0; i < gens.size(); ++i) {
    Generator& g = gens[i];
    if (!g.renewable()) {
      g.p_max = firm * weights[i] / thermal_weight;
    } else if (g.kind == GeneratorKind::solar) {
      g.p_max = 0.5 * typical.sum() * weights[i] / solar_weight / synthetic_solar_shape().maxCoeff();
    } else {
      g.p_max = 0.2 * typical.sum() * weights[i] / wind_weight / synthetic_wind_shape().maxCoeff();
    }
    g.p_max = std::max(g.p_max, 1.0);
  }

  // Line m - 1 joins bus m to its parent and carries everything behind bus m.
  const int L = M - 1;
  Eigen::MatrixXd ptdf = Eigen::MatrixXd::Zero(L, M);
  for (int m = 1; m < M; ++m) {
    for (int k = m; k > 0; k = parent[k]) ptdf(k - 1, m) = 1.0;
  }
  Eigen::VectorXd firm_at_bus = Eigen::VectorXd::Zero(M);
  for (const auto& g : gens) {
    if (!g.renewable()) firm_at_bus[g.bus] += g.p_max;
  }
  std::vector<Line> lines;
  for (int l = 0; l < L; ++l) {
    double sub_worst = 0.0, sub_least = 0.0, sub_firm = 0.0, sub_typical = 0.0;
    for (int m = 0; m < M; ++m) {
      if (ptdf(l, m) == 0.0) continue;
      sub_worst += worst[m];
      sub_least += least[m];
      sub_firm += firm_at_bus[m];
      sub_typical += typical[m];
    }
    const double need = std::max({sub_worst - sub_firm, -sub_least, 0.0});
    const double limit = std::max({draw(0.8, 1.5) * sub_typical, 1.05 * need, 1.0});
    lines.push_back(Line{l + 1, limit});
  }

  CaseBundle bundle;
  bundle.steps_per_day = H;
  for (int attempt = 0;; ++attempt) {
    bundle.network = Network(M, ptdf, lines, gens);
    Eigen::VectorXd caps(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) caps[i] = gens[i].renewable() ? 0.0 : gens[i].p_max;
    const auto costs = linearize_costs(bundle.network, caps, 4);
    if (solve_dispatch(bundle.network, worst, costs).status == DispatchStatus::optimal) break;
    if (attempt == 20) throw ModelError("could not size line limits for a deliverable worst case");
    for (auto& line : lines) line.flow_limit *= 1.5;
  }

  DemandProfile pd;
  pd.hourly_mean = pro;
  pd.scale = scales.demand;
  DemandProfile cd = pd;
  cd.hourly_mean = con;
  bundle.prosumer_demand.assign(M, pd);
  bundle.consumer_demand.assign(M, cd);

  std::string mix;
  for (int k = 0; k < 4; ++k) {
    mix += (k ? "," : "") + std::string(to_string(static_cast<GeneratorKind>(k))) + ":" +
           std::to_string(o.mix[k]);
  }
  bundle.scenario = {{"profile_source", "synthetic"},
                     {"case_seed", o.seed},
                     {"generator_mix", mix},
                     {"steps_per_day", H},
                     {"seeds", {1, 2, 3, 4, 5}},
                     {"days", 50},
                     {"t_train", 3600},
                     {"population", {{"prosumers", np}, {"consumers", nc}}},
                     {"storage",
                      {{"capacity_kwh", o.capacity_kwh}, {"efficiency", 1.0}, {"initial_level", 0.5}}}};
  return bundle;
}

}  // namespace gridmfg
