#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridmfg/core_model.hpp"

namespace gridmfg {

/// Per-bus net demand D_m in MW. Individual entries may be negative (net
/// supply); the system total must not be.
using BidVector = Eigen::VectorXd;

struct CostSegment {
  double width = 0.0;     // MW
  double marginal = 0.0;  // $/MWh
};

/// Piecewise-linear outer description of each generator's quadratic cost.
struct PiecewiseCost {
  std::vector<std::vector<CostSegment>> segments;  // [generator][segment]

  std::size_t total_segments() const;
  double capacity(int g) const;
};

/// Splits generator g into `segments` equal-width pieces over [0, capacity];
/// each piece is priced at the derivative 2 a x + b at its midpoint.
PiecewiseCost linearize_costs(const Network& network,
                              const Eigen::VectorXd& capacities, int segments);

enum class DispatchStatus { optimal, infeasible };

std::string_view to_string(DispatchStatus status);

struct DispatchResult {
  DispatchStatus status = DispatchStatus::infeasible;
  Eigen::VectorXd p;              // generator output, MW
  Eigen::VectorXd segment_output; // flattened in PiecewiseCost order
  Eigen::VectorXd flow;           // line flows, MW
  double objective = 0.0;         // $
  double hub_price = 0.0;         // $/MWh
  Eigen::VectorXd mu_lower;       // per line, >= 0
  Eigen::VectorXd mu_upper;
  Eigen::VectorXd nu_lower;       // per generator, >= 0
  Eigen::VectorXd nu_upper;
  Eigen::VectorXd segment_nu_lower;
  Eigen::VectorXd segment_nu_upper;
  Eigen::VectorXd lmp;            // per bus, $/MWh
  int iterations = 0;
};

/// Raised when the system-wide bid total is negative.
class AggregateDemandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-cost dispatch subject to power balance, PTDF line limits and
/// generator capacities. Duals come from the final simplex basis and
///   lmp_m = hub - sum_l PTDF_lm (mu_upper_l - mu_lower_l).
DispatchResult solve_dispatch(const Network& network, const BidVector& bids,
                              const PiecewiseCost& costs);

/// Line flows implied by generator output p and bids.
Eigen::VectorXd line_flows(const Network& network, const Eigen::VectorXd& p,
                           const BidVector& bids);

/// Largest violation per optimality-condition category.
struct KktReport {
  double balance = 0.0;
  double flow_limit = 0.0;
  double capacity = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;
  double stationarity = 0.0;
  double lmp_formula = 0.0;

  double primal() const;
  double max_violation() const;
};

KktReport verify_kkt(const DispatchResult& result, const Network& network,
                     const BidVector& bids, const PiecewiseCost& costs);

struct LmpSensitivity {
  double dual_lmp = 0.0;
  double finite_difference_lmp = 0.0;
};

/// Raised when the forward and backward differences disagree, i.e. the bid
/// sits on a kink of the cost-to-serve curve.
class DegenerateSensitivity : public std::runtime_error {
 public:
  DegenerateSensitivity(const std::string& what, double forward, double backward)
      : std::runtime_error(what), forward(forward), backward(backward) {}
  double forward;
  double backward;
};

/// Compares the dual LMP at `bus` with (obj(D + eps e_m) - obj(D)) / eps.
LmpSensitivity lmp_sensitivity_check(const Network& network, const BidVector& bids,
                                     const PiecewiseCost& costs, int bus,
                                     double epsilon);

nlohmann::json to_json(const DispatchResult& result);

}  // namespace gridmfg
