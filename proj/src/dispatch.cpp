#include "gridmfg/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridmfg/simplex.hpp"

namespace gridmfg {
namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

std::size_t PiecewiseCost::total_segments() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

double PiecewiseCost::capacity(int g) const {
  double total = 0.0;
  for (const auto& s : segments[g]) total += s.width;
  return total;
}

PiecewiseCost linearize_costs(const Network& network,
                              const Eigen::VectorXd& capacities, int segments) {
  if (segments < 1) throw std::invalid_argument("need at least one cost segment");
  if (capacities.size() != network.generator_count()) {
    throw std::invalid_argument("one capacity per generator required");
  }
  PiecewiseCost out;
  out.segments.resize(static_cast<std::size_t>(network.generator_count()));
  for (int g = 0; g < network.generator_count(); ++g) {
    const Generator& gen = network.generators()[g];
    const double cap = capacities[g];
    if (!(cap >= 0.0) || cap > gen.p_max * (1.0 + 1e-12)) {
      throw std::invalid_argument("capacity of generator " + std::to_string(gen.id) +
                                  " outside [0, p_max]");
    }
    const double width = cap / segments;
    auto& segs = out.segments[g];
    segs.reserve(static_cast<std::size_t>(segments));
    for (int j = 0; j < segments; ++j) {
      segs.push_back(CostSegment{width, gen.marginal_cost((j + 0.5) * width)});
    }
  }
  return out;
}

std::string_view to_string(DispatchStatus status) {
  return status == DispatchStatus::optimal ? "optimal" : "infeasible";
}

Eigen::VectorXd line_flows(const Network& network, const Eigen::VectorXd& p,
                           const BidVector& bids) {
  Eigen::VectorXd injection = -bids;
  for (int g = 0; g < network.generator_count(); ++g) {
    injection[network.generators()[g].bus] += p[g];
  }
  return network.ptdf() * injection;
}

DispatchResult solve_dispatch(const Network& network, const BidVector& bids,
                              const PiecewiseCost& costs) {
  const int M = network.bus_count();
  const int L = network.line_count();
  const int G = network.generator_count();
  if (bids.size() != M) throw std::invalid_argument("one bid per bus required");
  if (static_cast<int>(costs.segments.size()) != G) {
    throw std::invalid_argument("one cost curve per generator required");
  }
  const double total_demand = bids.sum();
  if (total_demand < -1e-9 * (1.0 + bids.cwiseAbs().sum())) {
    throw AggregateDemandError("system-wide net demand is negative (" +
                               std::to_string(total_demand) + " MW)");
  }

  const auto S = static_cast<Eigen::Index>(costs.total_segments());
  LinearProgram<double> lp;
  lp.A = Eigen::MatrixXd::Zero(1 + L, S + L);
  lp.b = Eigen::VectorXd::Zero(1 + L);
  lp.c = Eigen::VectorXd::Zero(S + L);
  lp.lower = Eigen::VectorXd::Zero(S + L);
  lp.upper = Eigen::VectorXd::Zero(S + L);

  std::vector<int> owner(static_cast<std::size_t>(S));
  Eigen::Index k = 0;
  for (int g = 0; g < G; ++g) {
    const int bus = network.generators()[g].bus;
    for (const auto& seg : costs.segments[g]) {
      lp.A(0, k) = 1.0;
      for (int l = 0; l < L; ++l) lp.A(1 + l, k) = network.ptdf()(l, bus);
      lp.c[k] = seg.marginal;
      lp.upper[k] = seg.width;
      owner[static_cast<std::size_t>(k)] = g;
      ++k;
    }
  }
  // Row 1+l: PTDF_l * generation - s_l = 0, where s_l is bounded so that the
  // flow s_l - PTDF_l * D stays inside [-F_l, F_l].
  const Eigen::VectorXd shift = network.ptdf() * bids;
  for (int l = 0; l < L; ++l) {
    lp.A(1 + l, S + l) = -1.0;
    const double limit = network.lines()[l].flow_limit;
    lp.lower[S + l] = shift[l] - limit;
    lp.upper[S + l] = shift[l] + limit;
  }
  lp.b[0] = total_demand;

  SimplexOptions<double> options;
  options.dual_preference = Eigen::VectorXd::Unit(1 + L, 0);
  const auto sol = solve_bounded_simplex(lp, options);

  DispatchResult r;
  r.iterations = sol.iterations;
  r.p = Eigen::VectorXd::Zero(G);
  r.segment_output = Eigen::VectorXd::Zero(S);
  r.flow = Eigen::VectorXd::Zero(L);
  r.mu_lower = Eigen::VectorXd::Zero(L);
  r.mu_upper = Eigen::VectorXd::Zero(L);
  r.nu_lower = Eigen::VectorXd::Zero(G);
  r.nu_upper = Eigen::VectorXd::Zero(G);
  r.segment_nu_lower = Eigen::VectorXd::Zero(S);
  r.segment_nu_upper = Eigen::VectorXd::Zero(S);
  r.lmp = Eigen::VectorXd::Zero(M);
  if (sol.status == LpStatus::infeasible) {
    r.status = DispatchStatus::infeasible;
    return r;
  }
  if (sol.status != LpStatus::optimal) {
    throw std::logic_error(sol.status == LpStatus::unbounded
                               ? "dispatch LP reported unbounded"
                               : "dispatch LP hit the iteration limit");
  }

  r.status = DispatchStatus::optimal;
  r.segment_output = sol.x.head(S);
  for (Eigen::Index j = 0; j < S; ++j) r.p[owner[static_cast<std::size_t>(j)]] += sol.x[j];
  r.flow = line_flows(network, r.p, bids);
  r.objective = lp.c.head(S).dot(r.segment_output);
  r.hub_price = sol.row_duals[0];
  for (int l = 0; l < L; ++l) {
    const double y = sol.row_duals[1 + l];
    r.mu_upper[l] = std::max(0.0, -y);
    r.mu_lower[l] = std::max(0.0, y);
  }
  r.lmp = Eigen::VectorXd::Constant(M, r.hub_price) -
          network.ptdf().transpose() * (r.mu_upper - r.mu_lower);

  for (Eigen::Index j = 0; j < S; ++j) {
    const double d = sol.reduced_costs[j];
    r.segment_nu_lower[j] = std::max(0.0, d);
    r.segment_nu_upper[j] = std::max(0.0, -d);
  }
  Eigen::Index first = 0;
  for (int g = 0; g < G; ++g) {
    const auto count = static_cast<Eigen::Index>(costs.segments[g].size());
    if (count > 0) {
      r.nu_lower[g] = r.segment_nu_lower[first];
      r.nu_upper[g] = r.segment_nu_upper[first + count - 1];
    }
    first += count;
  }
  return r;
}

double KktReport::primal() const {
  return std::max({balance, flow_limit, capacity});
}

double KktReport::max_violation() const {
  return std::max({primal(), dual_feasibility, complementarity, stationarity,
                   lmp_formula});
}

KktReport verify_kkt(const DispatchResult& result, const Network& network,
                     const BidVector& bids, const PiecewiseCost& costs) {
  if (result.status != DispatchStatus::optimal) {
    throw std::invalid_argument("verify_kkt requires an optimal dispatch");
  }
  KktReport rep;
  const int G = network.generator_count();
  const int L = network.line_count();
  const Eigen::MatrixXd& ptdf = network.ptdf();

  rep.balance = std::abs(result.p.sum() - bids.sum());
  const Eigen::VectorXd flow = line_flows(network, result.p, bids);
  for (int l = 0; l < L; ++l) {
    const double limit = network.lines()[l].flow_limit;
    rep.flow_limit = std::max(rep.flow_limit, std::abs(flow[l]) - limit);
    rep.complementarity = std::max({rep.complementarity,
                                    std::abs(result.mu_upper[l] * (limit - flow[l])),
                                    std::abs(result.mu_lower[l] * (flow[l] + limit))});
    rep.dual_feasibility = std::max({rep.dual_feasibility, -result.mu_upper[l],
                                     -result.mu_lower[l]});
  }

  const Eigen::VectorXd congestion = ptdf.transpose() * (result.mu_upper - result.mu_lower);
  Eigen::Index k = 0;
  for (int g = 0; g < G; ++g) {
    const int bus = network.generators()[g].bus;
    const double cap = costs.capacity(g);
    rep.capacity = std::max({rep.capacity, -result.p[g], result.p[g] - cap});
    rep.dual_feasibility = std::max({rep.dual_feasibility, -result.nu_lower[g],
                                     -result.nu_upper[g]});
    rep.complementarity = std::max({rep.complementarity,
                                    std::abs(result.nu_lower[g] * result.p[g]),
                                    std::abs(result.nu_upper[g] * (cap - result.p[g]))});
    for (const auto& seg : costs.segments[g]) {
      const double y = result.segment_output[k];
      const double lo = result.segment_nu_lower[k];
      const double up = result.segment_nu_upper[k];
      rep.capacity = std::max({rep.capacity, -y, y - seg.width});
      rep.dual_feasibility = std::max({rep.dual_feasibility, -lo, -up});
      rep.complementarity = std::max({rep.complementarity, std::abs(lo * y),
                                      std::abs(up * (seg.width - y))});
      // d/dy of the Lagrangian: c - hub + PTDF'(mu_up - mu_lo) + nu_up - nu_lo.
      const double grad = seg.marginal - result.hub_price + congestion[bus] + up - lo;
      rep.stationarity = std::max(rep.stationarity, std::abs(grad));
      ++k;
    }
  }
  for (int m = 0; m < network.bus_count(); ++m) {
    rep.lmp_formula = std::max(
        rep.lmp_formula, std::abs(result.lmp[m] - (result.hub_price - congestion[m])));
  }
  rep.balance = std::max(rep.balance, 0.0);
  rep.flow_limit = std::max(rep.flow_limit, 0.0);
  rep.capacity = std::max(rep.capacity, 0.0);
  rep.dual_feasibility = std::max(rep.dual_feasibility, 0.0);
  return rep;
}

LmpSensitivity lmp_sensitivity_check(const Network& network, const BidVector& bids,
                                     const PiecewiseCost& costs, int bus,
                                     double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("finite-difference step must be positive");
  }
  if (bus < 0 || bus >= network.bus_count()) {
    throw std::invalid_argument("bus index out of range");
  }
  const auto base = solve_dispatch(network, bids, costs);
  if (base.status != DispatchStatus::optimal) {
    throw std::invalid_argument("sensitivity check needs an optimal base dispatch");
  }
  BidVector up = bids;
  up[bus] += epsilon;
  BidVector down = bids;
  down[bus] -= epsilon;

  const auto fwd = solve_dispatch(network, up, costs);
  double backward = std::numeric_limits<double>::quiet_NaN();
  if (down.sum() >= 0.0) {
    const auto bwd = solve_dispatch(network, down, costs);
    if (bwd.status == DispatchStatus::optimal) {
      backward = (base.objective - bwd.objective) / epsilon;
    }
  }
  if (fwd.status != DispatchStatus::optimal) {
    throw DegenerateSensitivity("perturbed dispatch infeasible",
                                std::numeric_limits<double>::quiet_NaN(), backward);
  }
  const double forward = (fwd.objective - base.objective) / epsilon;
  const double tol = std::max(1e-4, 1e-3 * std::abs(forward));
  if (!std::isfinite(backward) || std::abs(forward - backward) > tol) {
    throw DegenerateSensitivity("one-sided differences disagree at bus " +
                                    std::to_string(bus + 1),
                                forward, backward);
  }
  return LmpSensitivity{base.lmp[bus], forward};
}

nlohmann::json to_json(const DispatchResult& r) {
  nlohmann::json j;
  j["status"] = std::string(to_string(r.status));
  j["objective"] = r.objective;
  j["hub_price"] = r.hub_price;
  j["p"] = to_vector(r.p);
  j["flow"] = to_vector(r.flow);
  j["lmp"] = to_vector(r.lmp);
  j["mu_lower"] = to_vector(r.mu_lower);
  j["mu_upper"] = to_vector(r.mu_upper);
  j["nu_lower"] = to_vector(r.nu_lower);
  j["nu_upper"] = to_vector(r.nu_upper);
  return j;
}

}  // namespace gridmfg
